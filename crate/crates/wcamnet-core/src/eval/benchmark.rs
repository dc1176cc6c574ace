//! Comparative accuracy table: train every registered recipe on the same
//! manifest and score the held-out test split.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{load_split, BatchStream, DatasetManifest, Split};
use crate::error::Result;
use crate::eval::metrics::{mae, rmse};
use crate::model::{
    build_model, Architecture, BackboneSpec, FusionGeometry, ModelConfig, Profile,
};
use crate::train::{predict_stream, train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub sample_count: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub split: String,
}

impl BenchmarkTable {
    /// Index of the row with the smallest value in a column, ignoring
    /// failed rows.
    fn best_row(&self, col: impl Fn(&BenchmarkRow) -> Option<f64>) -> Option<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| col(r).map(|v| (i, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Aligned text table; the best (minimum) value per metric column is
    /// wrapped in `**`. Failed rows carry the error instead of numbers.
    pub fn to_text(&self) -> String {
        let best_mae = self.best_row(|r| r.mae);
        let best_rmse = self.best_row(|r| r.rmse);
        let name_w = self
            .rows
            .iter()
            .map(|r| r.model.len())
            .chain(["model".len()])
            .max()
            .unwrap_or(5);
        let mut out = format!(
            "{:<name_w$}  {:>12}  {:>12}  (split: {})\n",
            "model", "MAE", "RMSE", self.split
        );
        for (i, row) in self.rows.iter().enumerate() {
            let cell = |v: Option<f64>, bold: bool| match v {
                Some(x) if bold => format!("**{x:.4}**"),
                Some(x) => format!("{x:.4}"),
                None => "-".to_string(),
            };
            let line = match &row.error {
                Some(e) => format!("{:<name_w$}  failed: {e}\n", row.model),
                None => format!(
                    "{:<name_w$}  {:>12}  {:>12}\n",
                    row.model,
                    cell(row.mae, best_mae == Some(i)),
                    cell(row.rmse, best_rmse == Some(i)),
                ),
            };
            out.push_str(&line);
        }
        out
    }
}

/// One train recipe per registered architecture, in declaration order.
pub fn benchmark_recipes(backbone: BackboneSpec, profile: Profile, seed: u64) -> Vec<TrainConfig> {
    Architecture::ALL
        .iter()
        .map(|&arch| {
            let model = match arch {
                Architecture::Wcamnet => {
                    let mut m = ModelConfig::wcamnet(backbone);
                    m.profile = profile;
                    m
                }
                _ => ModelConfig::baseline(arch, backbone, profile),
            };
            let mut config = TrainConfig::recipe(model);
            config.seed = seed;
            config
        })
        .collect()
}

/// Train one recipe from scratch and score the test split.
pub(crate) fn fit_and_score(
    recipe: &TrainConfig,
    geometry: &FusionGeometry,
    weights_dir: Option<&Path>,
    manifest: &DatasetManifest,
    image_root: &Path,
) -> Result<(f64, f64, usize)> {
    let mut model = build_model::<f32>(&recipe.model, geometry, weights_dir, recipe.seed)?;
    train(recipe, manifest, image_root, model.as_mut(), None)?;
    let data = load_split(manifest, image_root, Split::Test, model.input_side())?;
    let stream = BatchStream::new(
        &data,
        manifest.normalization,
        recipe.batch_size,
        recipe.seed,
    )?;
    let (preds, targets) = predict_stream(model.as_mut(), &stream)?;
    Ok((mae(&preds, &targets)?, rmse(&preds, &targets)?, preds.len()))
}

/// Run every recipe; a failed run becomes a marked row, never a dropped one.
pub fn run_benchmark(
    recipes: &[TrainConfig],
    geometry: &FusionGeometry,
    weights_dir: Option<&Path>,
    manifest: &DatasetManifest,
    image_root: &Path,
) -> Result<BenchmarkTable> {
    let mut rows = Vec::with_capacity(recipes.len());
    for recipe in recipes {
        let model = recipe.model.architecture.name().to_string();
        let row = match fit_and_score(recipe, geometry, weights_dir, manifest, image_root) {
            Ok((mae, rmse, n)) => BenchmarkRow {
                model,
                mae: Some(mae),
                rmse: Some(rmse),
                sample_count: n,
                error: None,
            },
            Err(e) => BenchmarkRow {
                model,
                mae: None,
                rmse: None,
                sample_count: 0,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(BenchmarkTable {
        rows,
        split: Split::Test.tag().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, SynthConfig};
    use tempfile::TempDir;

    fn fixture(n: usize, stations: usize, seed: u64) -> (TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let mut config = SynthConfig::new(n, stations, seed);
        config.width = 64;
        config.height = 48;
        let manifest = generate_dataset(&config, dir.path()).unwrap();
        (dir, manifest)
    }

    fn quick(mut config: TrainConfig) -> TrainConfig {
        config.epochs = 1;
        config.batch_size = 8;
        config.augment = false;
        config
    }

    #[test]
    fn recipes_cover_every_architecture_in_order() {
        let recipes = benchmark_recipes(BackboneSpec::tiny(8), Profile::Desk, 1);
        assert_eq!(recipes.len(), Architecture::ALL.len());
        for (recipe, arch) in recipes.iter().zip(Architecture::ALL) {
            assert_eq!(recipe.model.architecture, arch);
            assert_eq!(recipe.seed, 1);
        }
    }

    #[test]
    fn table_text_bolds_the_column_minima() {
        let table = BenchmarkTable {
            rows: vec![
                BenchmarkRow {
                    model: "a".into(),
                    mae: Some(0.30),
                    rmse: Some(0.20),
                    sample_count: 10,
                    error: None,
                },
                BenchmarkRow {
                    model: "b".into(),
                    mae: Some(0.10),
                    rmse: Some(0.40),
                    sample_count: 10,
                    error: None,
                },
                BenchmarkRow {
                    model: "c".into(),
                    mae: None,
                    rmse: None,
                    sample_count: 0,
                    error: Some("boom".into()),
                },
            ],
            split: "test".into(),
        };
        let text = table.to_text();
        assert!(text.contains("**0.1000**"), "minimum MAE must be bolded:\n{text}");
        assert!(text.contains("**0.2000**"), "minimum RMSE must be bolded:\n{text}");
        assert_eq!(text.matches("**").count(), 4, "exactly one bold per column:\n{text}");
        assert!(text.contains("failed: boom"));
        assert_eq!(text.lines().count(), 4, "header plus one line per row");
    }

    #[test]
    fn cheap_architectures_land_inside_the_sanity_band() {
        let (dir, manifest) = fixture(32, 4, 7);
        let geometry = FusionGeometry::reduced();
        let recipes: Vec<TrainConfig> = [
            Architecture::Wcamnet,
            Architecture::BackboneLinearHead,
            Architecture::VitFullFinetune,
        ]
        .iter()
        .map(|&arch| {
            let model = match arch {
                Architecture::Wcamnet => ModelConfig::wcamnet(BackboneSpec::tiny(8)),
                _ => ModelConfig::baseline(arch, BackboneSpec::tiny(8), Profile::Desk),
            };
            let mut c = quick(TrainConfig::recipe(model));
            c.seed = 9;
            c
        })
        .collect();

        let table = run_benchmark(&recipes, &geometry, None, &manifest, dir.path()).unwrap();
        assert_eq!(table.rows.len(), recipes.len(), "no silent row drops");
        assert_eq!(table.split, "test");
        for (row, recipe) in table.rows.iter().zip(&recipes) {
            assert_eq!(row.model, recipe.model.architecture.name());
            assert_eq!(row.error, None, "row {} failed: {:?}", row.model, row.error);
            let mae = row.mae.unwrap();
            let rmse = row.rmse.unwrap();
            assert!(mae > 0.0 && mae < 0.5, "{}: MAE {mae} outside (0, 0.5)", row.model);
            assert!(rmse >= mae);
            assert!(row.sample_count > 0);
        }
    }

    #[test]
    fn a_failed_recipe_marks_its_row_and_spares_the_rest() {
        let (dir, manifest) = fixture(24, 4, 3);
        let geometry = FusionGeometry::reduced();
        let good = {
            let mut c = quick(TrainConfig::recipe(ModelConfig::wcamnet(BackboneSpec::tiny(8))));
            c.seed = 4;
            c
        };
        // pretrained weights are absent, so this recipe cannot even build
        let bad = quick(TrainConfig::recipe(ModelConfig::baseline(
            Architecture::BackboneLinearHead,
            BackboneSpec::pretrained_base(),
            Profile::Desk,
        )));
        let table =
            run_benchmark(&[good, bad], &geometry, None, &manifest, dir.path()).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows[0].error.is_none());
        assert!(table.rows[0].mae.is_some());
        assert!(table.rows[1].error.is_some());
        assert_eq!(table.rows[1].mae, None);
        assert!(table.to_text().contains("failed"));
    }
}
