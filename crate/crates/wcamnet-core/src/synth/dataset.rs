//! Labeled synthetic dataset generation.
//!
//! Draws per-sample friction, lighting, and clutter from `(seed, index)`
//! alone, renders each scene to a PNG under the output directory, assigns
//! disjoint station splits, and writes a manifest the dataset loader
//! consumes unchanged. Train-split normalization stats are accumulated at
//! render resolution during generation so no second pass is needed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, TimeDelta, Utc};
use image::RgbImage;
use ndarray::Array3;
use rand::Rng;

use crate::dataset::{
    save_manifest, split_by_station, DatasetManifest, LabeledSample, Split, StatsAccumulator,
    SPLIT_FRACTIONS,
};
use crate::error::{CoreError, Result};
use crate::hash::sample_rng;
use crate::synth::scene::{generate_scene, SceneSpec};

/// Controls one synthetic dataset generation run.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Number of samples; must be at least the station count.
    pub n: usize,
    /// Number of synthetic camera stations samples are spread across.
    pub stations: usize,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Friction is drawn as u^skew with u uniform; 1.0 keeps it uniform,
    /// larger values pile mass near 0 to exercise label resampling.
    pub skew: f64,
    /// Render every scene with the road painted over, leaving no friction
    /// signal anywhere in the frame.
    pub mask_road: bool,
}

impl SynthConfig {
    pub fn new(n: usize, stations: usize, seed: u64) -> Self {
        Self {
            n,
            stations,
            seed,
            width: 1280,
            height: 720,
            skew: 1.0,
            mask_road: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.stations == 0 || self.n < self.stations {
            return Err(CoreError::invalid(format!(
                "need at least one sample per station, got n={} across {} stations",
                self.n, self.stations
            )));
        }
        if !self.skew.is_finite() || self.skew <= 0.0 {
            return Err(CoreError::invalid(format!(
                "skew exponent must be positive, got {}",
                self.skew
            )));
        }
        Ok(())
    }
}

/// The friction sequence `generate_dataset` uses, without rendering.
/// Values are rounded to 6 decimals to match manifest precision exactly.
pub fn sample_frictions(seed: u64, n: usize, skew: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let u: f64 = sample_rng(seed, 0, i as u64).random();
            (u.powf(skew) * 1e6).round() / 1e6
        })
        .collect()
}

fn unit_chw(img: &RgbImage) -> Array3<f32> {
    let (w, h) = img.dimensions();
    let mut out = Array3::zeros((3, h as usize, w as usize));
    for (x, y, p) in img.enumerate_pixels() {
        for c in 0..3 {
            out[[c, y as usize, x as usize]] = p.0[c] as f32 / 255.0;
        }
    }
    out
}

/// Generate `config.n` labeled scenes under `out_dir` and write
/// `manifest.tsv` beside them. Returns the manifest that was written.
pub fn generate_dataset(config: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    let frictions = sample_frictions(config.seed, config.n, config.skew);
    let base_ts: DateTime<Utc> = "2026-03-01T00:00:00Z".parse().expect("valid timestamp");

    let mut samples = Vec::with_capacity(config.n);
    let mut station_stats: BTreeMap<String, StatsAccumulator> = BTreeMap::new();
    for (i, &friction) in frictions.iter().enumerate() {
        let mut rng = sample_rng(config.seed, 0, i as u64);
        let _: f64 = rng.random(); // friction draw, consumed by sample_frictions
        let station = i % config.stations;
        let camera_station_id = format!("synth-cam-{station:02}");
        let spec = SceneSpec {
            friction,
            seed: rng.random(),
            width: config.width,
            height: config.height,
            station_id: camera_station_id.clone(),
            lighting: rng.random(),
            clutter: rng.random_range(3..=8),
            mask_road: config.mask_road,
        };
        let img = generate_scene(&spec)?;
        let rel = format!("images/{camera_station_id}/img-{i:05}.png");
        let path = out_dir.join(&rel);
        fs::create_dir_all(path.parent().expect("image path has a parent"))?;
        img.save(&path)
            .map_err(|e| CoreError::invalid(format!("failed to write {}: {e}", path.display())))?;
        station_stats
            .entry(camera_station_id.clone())
            .or_default()
            .add(&unit_chw(&img).view());
        samples.push(LabeledSample {
            image_ref: rel,
            camera_station_id,
            weather_station_id: format!("synth-wx-{station:02}"),
            timestamp: base_ts + TimeDelta::minutes(20 * i as i64),
            friction_factor: friction,
        });
    }

    let split_assignment = split_by_station(&samples, SPLIT_FRACTIONS, config.seed)?;
    let mut train_stats = StatsAccumulator::new();
    for (station, stats) in &station_stats {
        if split_assignment.get(station) == Some(&Split::Train) {
            train_stats.merge(stats);
        }
    }
    let manifest = DatasetManifest {
        samples,
        split_assignment,
        normalization: train_stats.finish()?,
        seed: config.seed,
    };
    save_manifest(&manifest, &out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
