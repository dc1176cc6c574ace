//! Split evaluation: rebuild a checkpointed model and score it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{load_split, BatchStream, DatasetManifest, Split};
use crate::error::{CoreError, Result};
use crate::eval::metrics::{mae, rmse};
use crate::hash::config_hash;
use crate::model::{build_model, checkpoint, FusionGeometry};
use crate::train::{predict_stream, TrainConfig};

/// Reference accuracy (MAE, RMSE) of the production full-scale system on
/// its original fleet dataset. Desk-scale synthetic runs are not comparable;
/// the numbers are carried as metadata, never as a test target.
pub const FULL_SCALE_REFERENCE: (f64, f64) = (0.150, 0.195);

/// Metrics of one model on one split, stamped with the config hash that
/// produced the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    pub sample_count: usize,
    pub split: String,
    pub config_hash: String,
}

impl MetricsReport {
    /// The quadratic mean dominates the arithmetic mean, so a report with
    /// RMSE < MAE can only come from a computation bug; reject it here.
    pub fn new(
        model: String,
        mae: f64,
        rmse: f64,
        sample_count: usize,
        split: String,
        config_hash: String,
    ) -> Result<Self> {
        if !mae.is_finite() || !rmse.is_finite() || mae < 0.0 || rmse < 0.0 {
            return Err(CoreError::invalid(format!(
                "metrics must be finite and non-negative, got MAE {mae}, RMSE {rmse}"
            )));
        }
        if rmse + 1e-12 < mae {
            return Err(CoreError::invalid(format!(
                "RMSE {rmse} below MAE {mae} violates the power-mean inequality"
            )));
        }
        if sample_count == 0 {
            return Err(CoreError::invalid("a metrics report needs samples"));
        }
        Ok(MetricsReport {
            model,
            mae,
            rmse,
            sample_count,
            split,
            config_hash,
        })
    }
}

/// Rebuild the checkpointed model and score it on one split.
///
/// The checkpoint metadata must carry the full train config (hash-verified),
/// the model's init seed and its input side; `geometry` and `weights_dir`
/// must match the training invocation. Evaluation-mode forward with no
/// augmentation makes repeated calls identical.
pub fn evaluate(
    checkpoint_path: &Path,
    manifest: &DatasetManifest,
    image_root: &Path,
    split: Split,
    geometry: &FusionGeometry,
    weights_dir: Option<&Path>,
) -> Result<MetricsReport> {
    let ck = checkpoint::load(checkpoint_path)?;
    let config: TrainConfig = serde_json::from_value(
        ck.meta
            .get("train_config")
            .cloned()
            .ok_or_else(|| CoreError::Checkpoint("metadata lacks train_config".into()))?,
    )?;
    let stored_hash = ck
        .meta
        .get("config_hash")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let actual_hash = config_hash(&config);
    if stored_hash != actual_hash {
        return Err(CoreError::Checkpoint(format!(
            "config hash mismatch: metadata claims {stored_hash}, config hashes to {actual_hash}"
        )));
    }
    let init_seed = ck
        .meta
        .get("init_seed")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CoreError::Checkpoint("metadata lacks init_seed".into()))?;
    if let Some(side) = ck.meta.get("input_side").and_then(|v| v.as_u64()) {
        if side as usize != geometry.input_side {
            return Err(CoreError::Config(format!(
                "checkpoint was trained at input side {side}, geometry supplies {}",
                geometry.input_side
            )));
        }
    }

    let mut model = build_model::<f32>(&config.model, geometry, weights_dir, init_seed)?;
    {
        let mut params: Vec<_> = model
            .params_mut()
            .into_iter()
            .filter(|p| p.trainable || p.buffer)
            .collect();
        checkpoint::restore_into(&ck, &mut params)?;
    }

    let data = load_split(manifest, image_root, split, geometry.input_side)?;
    let stream = BatchStream::new(
        &data,
        manifest.normalization,
        config.batch_size,
        config.seed,
    )?;
    let (preds, targets) = predict_stream(model.as_mut(), &stream)?;
    MetricsReport::new(
        model.arch_name().to_string(),
        mae(&preds, &targets)?,
        rmse(&preds, &targets)?,
        preds.len(),
        split.tag().to_string(),
        stored_hash,
    )
}
