//! Dataset ingestion, standardization, splitting, and synthetic generators.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;
use crate::seeding::{stream_rng, STREAM_NOISE, STREAM_SPLIT};
use crate::Real;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("dataset is empty after filtering unparseable rows")]
    EmptyAfterFiltering,
    #[error("no numeric columns found")]
    NoNumericColumns,
    #[error("target column {0} not found")]
    TargetNotFound(String),
    #[error("split spec infeasible: train={train}, test={test} from n={n}")]
    InfeasibleSplit { train: usize, test: usize, n: usize },
    #[error("target has zero variance; cannot standardize")]
    ZeroVarianceTarget,
    #[error("dataset has {actual} input columns, statistics expect {expected}")]
    ColumnCountMismatch { expected: usize, actual: usize },
    #[error("dataset has {rows} input rows but {targets} targets")]
    RowCountMismatch { rows: usize, targets: usize },
    #[error("dataset contains non-finite values")]
    NonFinite,
    #[error("dataset must contain at least one row")]
    Empty,
    #[error("manifest line {line} is malformed: {reason}")]
    BadManifest { line: usize, reason: String },
}

/// n×p input matrix plus length-n target vector.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    inputs: Mat<F>,
    targets: Vec<F>,
    input_names: Vec<String>,
    target_name: String,
}

impl<F: Real> Dataset<F> {
    pub fn new(
        inputs: Mat<F>,
        targets: Vec<F>,
        input_names: Vec<String>,
        target_name: String,
    ) -> Result<Self, DataError> {
        if inputs.rows() != targets.len() {
            return Err(DataError::RowCountMismatch {
                rows: inputs.rows(),
                targets: targets.len(),
            });
        }
        if !inputs.is_finite() || targets.iter().any(|t| !t.is_finite()) {
            return Err(DataError::NonFinite);
        }
        assert_eq!(input_names.len(), inputs.cols());
        Ok(Dataset {
            inputs,
            targets,
            input_names,
            target_name,
        })
    }

    /// Build from row vectors with generated column names.
    pub fn from_rows(rows: &[Vec<F>], targets: Vec<F>) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let p = rows[0].len();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Dataset::new(Mat::from_rows(rows), targets, names, "y".to_string())
    }

    /// Zero-row dataset with `p` input columns; only oracle tests use this
    /// (e.g. to isolate the regularizer Hessian).
    pub fn empty(p: usize) -> Self {
        Dataset {
            inputs: Mat::zeros(0, p),
            targets: Vec::new(),
            input_names: (0..p).map(|j| format!("x{j}")).collect(),
            target_name: "y".to_string(),
        }
    }

    pub fn n(&self) -> usize {
        self.inputs.rows()
    }

    pub fn p(&self) -> usize {
        self.inputs.cols()
    }

    pub fn inputs(&self) -> &Mat<F> {
        &self.inputs
    }

    pub fn input_row(&self, i: usize) -> &[F] {
        self.inputs.row(i)
    }

    pub fn target(&self, i: usize) -> F {
        self.targets[i]
    }

    pub fn targets(&self) -> &[F] {
        &self.targets
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    fn subset(&self, idx: &[usize]) -> Dataset<F> {
        let rows: Vec<Vec<F>> = idx.iter().map(|&i| self.input_row(i).to_vec()).collect();
        Dataset {
            inputs: Mat::from_rows(&rows),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            input_names: self.input_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Target column choice when loading delimited text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSelector {
    /// Last column (the default).
    Last,
    Index(usize),
    Name(String),
}

impl TargetSelector {
    pub fn parse(s: &str) -> TargetSelector {
        if s == "last" {
            TargetSelector::Last
        } else if let Ok(i) = s.parse::<usize>() {
            TargetSelector::Index(i)
        } else {
            TargetSelector::Name(s.to_string())
        }
    }
}

/// Result of loading a delimited text file: the parsed dataset and the
/// number of rows rejected for unparseable fields.
#[derive(Debug)]
pub struct LoadedCsv<F> {
    pub dataset: Dataset<F>,
    pub dropped_rows: usize,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Load a comma- or whitespace-delimited numeric table. Rows with
/// unparseable fields or the wrong field count are dropped and counted.
pub fn load_csv<F: Real>(
    path: impl AsRef<Path>,
    target: &TargetSelector,
    has_header: bool,
) -> Result<LoadedCsv<F>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let mut header: Option<Vec<String>> = None;
    if has_header {
        match lines.next() {
            Some(line) => header = Some(split_fields(line).iter().map(|s| s.to_string()).collect()),
            None => return Err(DataError::EmptyAfterFiltering),
        }
    }

    let mut rows: Vec<Vec<F>> = Vec::new();
    let mut dropped = 0usize;
    let mut width: Option<usize> = None;
    for line in lines {
        let fields = split_fields(line);
        let parsed: Option<Vec<F>> = fields
            .iter()
            .map(|f| f.parse::<f64>().ok().and_then(F::from_f64))
            .collect();
        match parsed {
            Some(values) => {
                if let Some(w) = width {
                    if values.len() != w {
                        dropped += 1;
                        continue;
                    }
                } else {
                    width = Some(values.len());
                }
                rows.push(values);
            }
            None => dropped += 1,
        }
    }
    let Some(width) = width else {
        return if dropped > 0 {
            Err(DataError::EmptyAfterFiltering)
        } else {
            Err(DataError::NoNumericColumns)
        };
    };
    if width == 0 {
        return Err(DataError::NoNumericColumns);
    }

    let names: Vec<String> = match &header {
        Some(h) if h.len() == width => h.clone(),
        _ => (0..width).map(|j| format!("col{j}")).collect(),
    };
    let target_idx = match target {
        TargetSelector::Last => width - 1,
        TargetSelector::Index(i) => {
            if *i >= width {
                return Err(DataError::TargetNotFound(i.to_string()));
            }
            *i
        }
        TargetSelector::Name(name) => names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| DataError::TargetNotFound(name.clone()))?,
    };
    if width < 2 {
        return Err(DataError::NoNumericColumns);
    }

    let mut input_names = names.clone();
    let target_name = input_names.remove(target_idx);
    let targets: Vec<F> = rows.iter().map(|r| r[target_idx]).collect();
    let inputs: Vec<Vec<F>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != target_idx)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect();
    let dataset = Dataset::new(Mat::from_rows(&inputs), targets, input_names, target_name)?;
    Ok(LoadedCsv {
        dataset,
        dropped_rows: dropped,
    })
}

/// Train-set size as a fraction of n or an absolute count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    Fraction(f64),
    Count(usize),
}

impl SplitSpec {
    fn train_size(&self, n: usize) -> usize {
        match *self {
            SplitSpec::Fraction(f) => (n as f64 * f).round() as usize,
            SplitSpec::Count(c) => c,
        }
    }
}

/// Seeded uniform-permutation split into disjoint, exhaustive train/test.
pub fn split<F: Real>(
    data: &Dataset<F>,
    spec: SplitSpec,
    seed: u64,
) -> Result<(Dataset<F>, Dataset<F>), DataError> {
    let n = data.n();
    let train_n = spec.train_size(n);
    if train_n < 2 || train_n >= n {
        return Err(DataError::InfeasibleSplit {
            train: train_n,
            test: n.saturating_sub(train_n),
            n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, STREAM_SPLIT);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let train = data.subset(&order[..train_n]);
    let test = data.subset(&order[train_n..]);
    Ok((train, test))
}

/// Per-column standardization statistics fit on the training portion only.
/// `dropped_columns` lists original input-column indices removed for having
/// (numerically) zero variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardizationStats<F> {
    pub original_p: usize,
    pub dropped_columns: Vec<usize>,
    pub input_mean: Vec<F>,
    pub input_std: Vec<F>,
    pub target_mean: F,
    pub target_std: F,
}

fn mean_and_pop_std<F: Real>(values: impl Iterator<Item = F> + Clone, n: usize) -> (F, F) {
    let nf = F::from_usize(n).unwrap();
    let mean = values.clone().sum::<F>() / nf;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<F>() / nf;
    (mean, var.sqrt())
}

fn negligible_std<F: Real>(std: F, mean: F) -> bool {
    std <= F::epsilon().sqrt() * (mean.abs() + F::one())
}

impl<F: Real> StandardizationStats<F> {
    /// Standardize a dataset with these statistics: drop the recorded
    /// constant columns, then shift/scale inputs and target.
    pub fn transform(&self, data: &Dataset<F>) -> Result<Dataset<F>, DataError> {
        if data.p() != self.original_p {
            return Err(DataError::ColumnCountMismatch {
                expected: self.original_p,
                actual: data.p(),
            });
        }
        let keep: Vec<usize> = (0..self.original_p)
            .filter(|j| !self.dropped_columns.contains(j))
            .collect();
        let rows: Vec<Vec<F>> = (0..data.n())
            .map(|i| {
                let row = data.input_row(i);
                keep.iter()
                    .enumerate()
                    .map(|(k, &j)| (row[j] - self.input_mean[k]) / self.input_std[k])
                    .collect()
            })
            .collect();
        let targets = data
            .targets()
            .iter()
            .map(|&y| (y - self.target_mean) / self.target_std)
            .collect();
        let input_names = keep
            .iter()
            .map(|&j| data.input_names()[j].clone())
            .collect();
        Dataset::new(
            Mat::from_rows(&rows),
            targets,
            input_names,
            data.target_name().to_string(),
        )
    }

    /// Map a standardized target value back to original units.
    pub fn target_to_original(&self, y_std: F) -> F {
        y_std * self.target_std + self.target_mean
    }

    /// Map an original-units target to standardized units.
    pub fn target_to_standardized(&self, y: F) -> F {
        (y - self.target_mean) / self.target_std
    }

    /// Variance scale factor between standardized and original target units.
    pub fn target_variance_scale(&self) -> F {
        self.target_std * self.target_std
    }
}

/// Standardized train/test pair plus the statistics that produced them.
pub type Standardized<F> = (Dataset<F>, Dataset<F>, StandardizationStats<F>);

/// Fit standardization statistics on `train` only and return the
/// transformed train and test sets together with the statistics.
pub fn standardize<F: Real>(
    train: &Dataset<F>,
    test: &Dataset<F>,
) -> Result<Standardized<F>, DataError> {
    if train.n() == 0 {
        return Err(DataError::Empty);
    }
    let n = train.n();
    let p = train.p();
    let mut dropped = Vec::new();
    let mut input_mean = Vec::new();
    let mut input_std = Vec::new();
    for j in 0..p {
        let col = train.inputs().col(j);
        let (mean, std) = mean_and_pop_std(col.iter().copied(), n);
        if negligible_std(std, mean) {
            dropped.push(j);
        } else {
            input_mean.push(mean);
            input_std.push(std);
        }
    }
    let (target_mean, target_std) = mean_and_pop_std(train.targets().iter().copied(), n);
    if negligible_std(target_std, target_mean) {
        return Err(DataError::ZeroVarianceTarget);
    }
    let stats = StandardizationStats {
        original_p: p,
        dropped_columns: dropped,
        input_mean,
        input_std,
        target_mean,
        target_std,
    };
    let train_std = stats.transform(train)?;
    let test_std = stats.transform(test)?;
    Ok((train_std, test_std, stats))
}

/// Parameters of the 1-D saturating-exponential generator
/// y = β₁(1 − e^(−β₂x)) + ε, ε ~ N(0, noise_std²), x ~ U(x_min, x_max).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturatingExpParams<F> {
    pub beta1: F,
    pub beta2: F,
    pub noise_std: F,
    pub x_min: F,
    pub x_max: F,
}

impl<F: Real> Default for SaturatingExpParams<F> {
    fn default() -> Self {
        SaturatingExpParams {
            beta1: F::from_f64(2.0).unwrap(),
            beta2: F::from_f64(1.0).unwrap(),
            noise_std: F::from_f64(0.1).unwrap(),
            x_min: F::zero(),
            x_max: F::from_f64(5.0).unwrap(),
        }
    }
}

impl<F: Real> SaturatingExpParams<F> {
    pub fn mean(&self, x: F) -> F {
        self.beta1 * (F::one() - (-self.beta2 * x).exp())
    }
}

/// Sample the saturating-exponential regression task.
pub fn simulate_saturating_exp<F: Real>(
    params: &SaturatingExpParams<F>,
    n: usize,
    seed: u64,
) -> Dataset<F> {
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let span = params.x_max - params.x_min;
    for _ in 0..n {
        let u: f64 = rng.random();
        let x = params.x_min + span * F::from_f64(u).unwrap();
        let z: f64 = StandardNormal.sample(&mut rng);
        let y = params.mean(x) + params.noise_std * F::from_f64(z).unwrap();
        rows.push(vec![x]);
        targets.push(y);
    }
    Dataset::from_rows(&rows, targets).expect("generated data is finite and nonempty")
}

/// Fixture exercising out-of-support predictions: training inputs cover
/// [0, 5] while test inputs cover [0, 10], so roughly half the test points
/// lie outside the training support.
#[derive(Debug, Clone)]
pub struct ExtrapolationTask<F> {
    pub train: Dataset<F>,
    pub test: Dataset<F>,
    /// Noiseless mean at each test input, for error oracles.
    pub test_true_mean: Vec<F>,
}

pub fn simulate_extrapolation_task<F: Real>(
    params: &SaturatingExpParams<F>,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> ExtrapolationTask<F> {
    let train_params = SaturatingExpParams {
        x_min: F::zero(),
        x_max: F::from_f64(5.0).unwrap(),
        ..*params
    };
    let test_params = SaturatingExpParams {
        x_min: F::zero(),
        x_max: F::from_f64(10.0).unwrap(),
        ..*params
    };
    let train = simulate_saturating_exp(&train_params, n_train, seed);
    let test = simulate_saturating_exp(&test_params, n_test, seed.wrapping_add(1));
    let test_true_mean = (0..test.n())
        .map(|i| test_params.mean(test.input_row(i)[0]))
        .collect();
    ExtrapolationTask {
        train,
        test,
        test_true_mean,
    }
}

/// One entry of the dataset manifest: a named delimited file with its
/// target column and expected shape for sanity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: String,
    pub target: String,
    pub expected_n: usize,
    pub expected_p: usize,
}

/// Parse a plain-text manifest: one `name,path,target,n,p` line per
/// dataset, `#` comments and blank lines ignored.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(DataError::BadManifest {
                line: lineno + 1,
                reason: format!("expected 5 comma-separated fields, got {}", fields.len()),
            });
        }
        let expected_n = fields[3].parse().map_err(|_| DataError::BadManifest {
            line: lineno + 1,
            reason: "bad row count".to_string(),
        })?;
        let expected_p = fields[4].parse().map_err(|_| DataError::BadManifest {
            line: lineno + 1,
            reason: "bad column count".to_string(),
        })?;
        entries.push(ManifestEntry {
            name: fields[0].to_string(),
            path: fields[1].to_string(),
            target: fields[2].to_string(),
            expected_n,
            expected_p,
        });
    }
    Ok(entries)
}
