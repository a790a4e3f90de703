//! Run manifests: enough resolved configuration to bit-reproduce a command.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct DatasetIdentity {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub dataset: Option<DatasetIdentity>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &'static str,
        master_seed: u64,
        config: impl Serialize,
    ) -> Result<Self, CliError> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed,
            config: serde_json::to_value(config)?,
            dataset: None,
            outputs: Vec::new(),
        })
    }

    pub fn with_dataset(mut self, path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::input(format!("cannot hash dataset {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.dataset = Some(DatasetIdentity {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(self)
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write `<output>.manifest.json` next to the main output.
    pub fn write_beside(&self, output: &Path) -> Result<(), CliError> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = output.with_file_name(name);
        fs::write(&path, serde_json::to_string_pretty(self)?)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}
