//! CSV schemas shared between commands:
//!   scores:    test_index,method,score,base_prediction
//!   truth:     test_index,abs_error
//!   detection: method,tau,auc            (auc empty when undefined)
//!   curves:    dataset,split,method,tau,auc
//!   nll:       dataset,split,method,mean_nll

use std::fs;
use std::path::Path;

use crate::error::CliError;

pub struct ScoreRow {
    pub test_index: usize,
    pub method: String,
    pub score: f64,
    pub base_prediction: f64,
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<(), CliError> {
    let mut out = String::from("test_index,method,score,base_prediction\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.test_index, row.method, row.score, row.base_prediction
        ));
    }
    fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::input(format!(
                "{}:{}: expected 4 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        rows.push(ScoreRow {
            test_index: fields[0]
                .parse()
                .map_err(|_| CliError::input(format!("bad test_index at line {}", lineno + 1)))?,
            method: fields[1].to_string(),
            score: fields[2]
                .parse()
                .map_err(|_| CliError::input(format!("bad score at line {}", lineno + 1)))?,
            base_prediction: fields[3].parse().map_err(|_| {
                CliError::input(format!("bad base_prediction at line {}", lineno + 1))
            })?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::input(format!(
            "{} contains no score rows",
            path.display()
        )));
    }
    Ok(rows)
}

pub fn write_truth(path: &Path, abs_errors: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("test_index,abs_error\n");
    for (i, e) in abs_errors.iter().enumerate() {
        out.push_str(&format!("{i},{e}\n"));
    }
    fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_truth(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(CliError::input(format!(
                "{}:{}: expected 2 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        rows.push(
            fields[1]
                .parse()
                .map_err(|_| CliError::input(format!("bad abs_error at line {}", lineno + 1)))?,
        );
    }
    if rows.is_empty() {
        return Err(CliError::input(format!(
            "{} contains no truth rows",
            path.display()
        )));
    }
    Ok(rows)
}
