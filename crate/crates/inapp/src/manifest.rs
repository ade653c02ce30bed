//! Run manifest written next to every output as `<output>.manifest.json`.
//!
//! It records everything needed to re-run the invocation: the resolved
//! parameters (after defaults and config files), the input and output
//! paths and the seed. Only `wall_clock_s` differs between identical runs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;
use crate::fsio::{with_suffix, write_atomic};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub parameters: Map<String, Value>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            parameters: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            wall_clock_s: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn manifest_path(output: &Path) -> PathBuf {
        with_suffix(output, ".manifest.json")
    }

    /// Writes the manifest beside `output`.
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let path = Self::manifest_path(output);
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }
}
