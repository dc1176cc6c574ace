//! Structured record of one training run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_rmse: f64,
}

/// Everything needed to audit a run: per-epoch losses and validation
/// metrics, the exact learning rate used at every optimizer step, and the
/// best-validation checkpoint reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub arch: String,
    pub config_hash: String,
    pub seed: u64,
    pub input_side: usize,
    pub epochs: Vec<EpochRecord>,
    /// One entry per optimizer step.
    pub lr_trace: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub wall_time_secs: f64,
    pub checkpoint: Option<String>,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunReport> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
