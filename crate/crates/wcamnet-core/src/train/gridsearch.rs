//! Hyperparameter grid search over base learning rate × weight decay.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::model::{build_model, FusionGeometry};
use crate::train::report::RunReport;
use crate::train::trainer::{train, TrainConfig};

/// Default search ranges: brackets the common SGD regimes.
pub const DEFAULT_LRS: [f64; 3] = [1e-3, 1e-2, 1e-1];
pub const DEFAULT_WDS: [f64; 3] = [1e-5, 1e-4, 1e-3];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub base_lr: f64,
    pub weight_decay: f64,
    /// Best validation MAE of the cell's run; absent if the run failed.
    pub val_mae: Option<f64>,
    pub error: Option<String>,
    pub report: Option<RunReport>,
}

/// Lowest validation MAE wins; exact ties go to the lower base_lr, then
/// the lower weight_decay.
pub fn select_best(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, cell) in cells.iter().enumerate() {
        let Some(mae) = cell.val_mae else { continue };
        let better = match best {
            None => true,
            Some(j) => {
                let b = &cells[j];
                let bm = b.val_mae.expect("selected cell has a score");
                mae < bm
                    || (mae == bm
                        && (cell.base_lr < b.base_lr
                            || (cell.base_lr == b.base_lr && cell.weight_decay < b.weight_decay)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Train one run per (lr, wd) cell — fresh model each time, same seed —
/// and return the winning config plus every cell's outcome. Divergent
/// cells are recorded, not fatal; an all-divergent grid is an error that
/// carries the per-cell reports.
pub fn grid_search<T: Elem>(
    base: &TrainConfig,
    lrs: &[f64],
    wds: &[f64],
    geometry: &FusionGeometry,
    weights_dir: Option<&Path>,
    manifest: &DatasetManifest,
    image_root: &Path,
) -> Result<(TrainConfig, Vec<GridCell>)> {
    if lrs.is_empty() || wds.is_empty() {
        return Err(CoreError::invalid("grid search needs a non-empty grid"));
    }
    let mut cells = Vec::with_capacity(lrs.len() * wds.len());
    for &lr in lrs {
        for &wd in wds {
            let mut config = base.clone();
            config.base_lr = lr;
            config.weight_decay = wd;
            let outcome = build_model::<T>(&config.model, geometry, weights_dir, config.seed)
                .and_then(|mut model| train(&config, manifest, image_root, model.as_mut(), None));
            cells.push(match outcome {
                Ok(report) => GridCell {
                    base_lr: lr,
                    weight_decay: wd,
                    val_mae: Some(report.best_val_mae),
                    error: None,
                    report: Some(report),
                },
                Err(e) => GridCell {
                    base_lr: lr,
                    weight_decay: wd,
                    val_mae: None,
                    error: Some(e.to_string()),
                    report: None,
                },
            });
        }
    }
    match select_best(&cells) {
        Some(i) => {
            let mut config = base.clone();
            config.base_lr = cells[i].base_lr;
            config.weight_decay = cells[i].weight_decay;
            Ok((config, cells))
        }
        None => Err(CoreError::Diverged(format!(
            "every grid cell failed: {}",
            serde_json::to_string(&cells).unwrap_or_else(|e| e.to_string())
        ))),
    }
}
