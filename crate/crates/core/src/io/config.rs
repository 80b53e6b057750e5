use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::Hyperparameters;
use crate::error::{GlfmError, Result};

/// Everything a `fit` run needs; echoed verbatim into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
}

fn default_min_count() -> usize {
    1
}

fn default_chains() -> usize {
    1
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        self.hyper.check()?;
        if self.chains < 1 {
            return Err(GlfmError::Config("chain count must be >= 1".into()));
        }
        for p in [&self.data, &self.schema] {
            if !p.exists() {
                return Err(GlfmError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
