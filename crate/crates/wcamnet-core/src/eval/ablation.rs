//! Ablation study: the full model against three surgical variants, averaged
//! over seeds because single-seed direction flips are common at small scale.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{CoreError, Result};
use crate::eval::benchmark::fit_and_score;
use crate::model::{
    Architecture, BackboneKind, BackboneSpec, FusionGeometry, ModelConfig,
};
use crate::train::TrainConfig;

/// The four studied graphs: the base model, a higher-capacity backbone swap,
/// and the two branch removals.
pub fn ablation_variants(base: &ModelConfig) -> Result<Vec<(String, ModelConfig)>> {
    if base.architecture != Architecture::Wcamnet {
        return Err(CoreError::config(
            "ablations are defined for the fusion architecture only",
        ));
    }
    if !base.use_hd_branch || !base.use_se_blocks {
        return Err(CoreError::config(
            "the ablation base must carry both the HD branch and the SE blocks",
        ));
    }
    let larger = match base.backbone.kind {
        BackboneKind::TinyRandomFrozen => {
            let mut spec = base.backbone;
            spec.embed_dim *= 2;
            spec
        }
        BackboneKind::PretrainedBase => BackboneSpec::pretrained_large(),
        BackboneKind::PretrainedLarge => {
            return Err(CoreError::config(
                "the ablation base already uses the large backbone",
            ))
        }
    };
    let mut large_backbone = *base;
    large_backbone.backbone = larger;
    let mut no_se = *base;
    no_se.use_se_blocks = false;
    let mut no_hd = *base;
    no_hd.use_hd_branch = false;
    Ok(vec![
        ("base".to_string(), *base),
        ("large-backbone".to_string(), large_backbone),
        ("no-se".to_string(), no_se),
        ("no-hd".to_string(), no_hd),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    /// Test-split MAE per seed; a failed seed is None.
    pub seed_maes: Vec<Option<f64>>,
    pub mean_mae: Option<f64>,
    pub mean_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub seeds: Vec<u64>,
}

impl AblationTable {
    pub fn to_text(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.variant.len())
            .chain(["variant".len()])
            .max()
            .unwrap_or(7);
        let mut out = format!(
            "{:<name_w$}  {:>12}  {:>12}  (seeds: {:?})\n",
            "variant", "mean MAE", "mean RMSE", self.seeds
        );
        for row in &self.rows {
            let line = match (&row.error, row.mean_mae, row.mean_rmse) {
                (Some(e), _, _) => format!("{:<name_w$}  failed: {e}\n", row.variant),
                (None, Some(m), Some(r)) => {
                    format!("{:<name_w$}  {:>12.4}  {:>12.4}\n", row.variant, m, r)
                }
                _ => format!("{:<name_w$}  -\n", row.variant),
            };
            out.push_str(&line);
        }
        out
    }
}

/// Train each variant once per seed and average the test metrics over the
/// seeds that finished. A row fails only when every seed fails.
pub fn run_ablations(
    base: &TrainConfig,
    geometry: &FusionGeometry,
    weights_dir: Option<&Path>,
    manifest: &DatasetManifest,
    image_root: &Path,
    seeds: &[u64],
) -> Result<AblationTable> {
    if seeds.is_empty() {
        return Err(CoreError::invalid("ablations need at least one seed"));
    }
    let variants = ablation_variants(&base.model)?;
    let mut rows = Vec::with_capacity(variants.len());
    for (name, model) in variants {
        let mut seed_maes = Vec::with_capacity(seeds.len());
        let mut rmses = Vec::new();
        let mut errors = Vec::new();
        for &seed in seeds {
            let mut recipe = base.clone();
            recipe.model = model;
            recipe.seed = seed;
            match fit_and_score(&recipe, geometry, weights_dir, manifest, image_root) {
                Ok((mae, rmse, _)) => {
                    seed_maes.push(Some(mae));
                    rmses.push(rmse);
                }
                Err(e) => {
                    seed_maes.push(None);
                    errors.push(format!("seed {seed}: {e}"));
                }
            }
        }
        let done: Vec<f64> = seed_maes.iter().flatten().copied().collect();
        rows.push(AblationRow {
            variant: name,
            mean_mae: (!done.is_empty())
                .then(|| done.iter().sum::<f64>() / done.len() as f64),
            mean_rmse: (!rmses.is_empty())
                .then(|| rmses.iter().sum::<f64>() / rmses.len() as f64),
            error: (done.is_empty()).then(|| errors.join("; ")),
            seed_maes,
        });
    }
    Ok(AblationTable {
        rows,
        seeds: seeds.to_vec(),
    })
}
