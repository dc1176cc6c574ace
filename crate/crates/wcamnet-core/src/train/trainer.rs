//! The training loop: momentum SGD over a manifest's train split with
//! per-epoch validation and best-validation checkpointing.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array4};
use serde::{Deserialize, Serialize};

use crate::dataset::{load_split, BatchStream, DatasetManifest, Split};
use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::eval::{mae, rmse};
use crate::hash::config_hash;
use crate::model::{checkpoint, Architecture, Model, ModelConfig};
use crate::nn::{Mode, Param};
use crate::train::loss::mse_loss_with_grad;
use crate::train::optimizer::Sgd;
use crate::train::report::{EpochRecord, RunReport};
use crate::train::schedule::{ScheduleKind, ScheduleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub schedule: ScheduleSpec,
    pub seed: u64,
    pub augment: bool,
}

impl TrainConfig {
    /// Per-architecture defaults: the fusion net runs 15 epochs under the
    /// cosine warm-restart schedule, the frozen-backbone linear probe 6
    /// epochs with a decay every 2, every other baseline 30 epochs with
    /// the standard step schedule.
    pub fn recipe(model: ModelConfig) -> Self {
        let (epochs, schedule) = match model.architecture {
            Architecture::Wcamnet => (15, ScheduleSpec::cosine_warm_restart()),
            Architecture::BackboneLinearHead => {
                let mut s = ScheduleSpec::step_decay();
                s.step_epochs = 2;
                (6, s)
            }
            _ => (30, ScheduleSpec::step_decay()),
        };
        TrainConfig {
            model,
            epochs,
            batch_size: 16,
            base_lr: 1e-2,
            weight_decay: 1e-4,
            momentum: 0.9,
            schedule,
            seed: 0,
            augment: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()?;
        if self.epochs < 1 {
            return Err(CoreError::config("training needs at least one epoch"));
        }
        if self.batch_size < 1 {
            return Err(CoreError::config("batch size must be at least 1"));
        }
        if !self.base_lr.is_finite() || self.base_lr <= 0.0 {
            return Err(CoreError::config(format!(
                "base learning rate must be positive, got {}",
                self.base_lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CoreError::config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(CoreError::config(format!(
                "weight decay must lie in [0, 1), got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

fn to_elem4<T: Elem>(a: &Array4<f32>) -> Array4<T> {
    a.mapv(|v| T::cast(v as f64))
}

fn to_elem1<T: Elem>(a: &Array1<f32>) -> Array1<T> {
    a.mapv(|v| T::cast(v as f64))
}

/// Predictions and targets for a whole stream, in eval mode.
pub fn predict_stream<T: Elem>(
    model: &mut dyn Model<T>,
    stream: &BatchStream<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for (images, labels, _) in stream.epoch(0) {
        let out = model.forward(&to_elem4::<T>(&images), Mode::Eval)?;
        preds.extend(out.iter().map(|&v| Elem::to_f64(v)));
        targets.extend(labels.iter().map(|&v| v as f64));
    }
    Ok((preds, targets))
}

fn stats(v: &Array1<f32>) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Checkpoint tensors: everything that can differ between two models built
/// from the same config and seed — learnable parameters plus buffers.
/// Frozen backbone weights are reproducible from (config, seed, weights
/// dir) and are not duplicated into checkpoints.
fn checkpoint_tensors<T: Elem>(params: Vec<&Param<T>>) -> Vec<&Param<T>> {
    params
        .into_iter()
        .filter(|p| p.trainable || p.buffer)
        .collect()
}

/// Persist the model's trainable and buffer tensors with enough metadata to
/// rebuild and restore it later without the original invocation: the full
/// train config, its hash, the model's init seed and input side.
pub fn save_checkpoint<T: Elem>(
    path: &Path,
    config: &TrainConfig,
    model: &dyn Model<T>,
    epoch: usize,
    val_mae: f64,
) -> Result<()> {
    let meta = serde_json::json!({
        "arch": model.arch_name(),
        "config_hash": config_hash(config),
        "train_config": config,
        "init_seed": model.init_seed(),
        "input_side": model.input_side(),
        "epoch": epoch,
        "val_mae": val_mae,
        "seed": config.seed,
    });
    checkpoint::save(path, &meta, &checkpoint_tensors(model.params()))
}

/// Restore a best-checkpoint written by [`train`] into a model built from
/// the same config and seed. Returns the checkpoint metadata.
pub fn load_checkpoint_into<T: Elem>(
    path: &Path,
    model: &mut dyn Model<T>,
) -> Result<serde_json::Value> {
    let ck = checkpoint::load(path)?;
    let mut params: Vec<&mut Param<T>> = model
        .params_mut()
        .into_iter()
        .filter(|p| p.trainable || p.buffer)
        .collect();
    checkpoint::restore_into(&ck, &mut params)?;
    Ok(ck.meta)
}

/// Optimize `model` on the manifest's train split and validate per epoch.
///
/// The cosine schedule advances every iteration (fractional epochs), the
/// step schedule once per epoch. When `checkpoint_dir` is given, the model
/// state with the best validation MAE is kept at `best.wcck`. Identical
/// (config, manifest, model seed) reproduce the loss trace bit for bit.
pub fn train<T: Elem>(
    config: &TrainConfig,
    manifest: &DatasetManifest,
    image_root: &Path,
    model: &mut dyn Model<T>,
    checkpoint_dir: Option<&Path>,
) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let side = model.input_side();
    let train_data = load_split(manifest, image_root, Split::Train, side)?;
    let val_data = load_split(manifest, image_root, Split::Val, side)?;
    let train_stream = BatchStream::new(
        &train_data,
        manifest.normalization,
        config.batch_size,
        config.seed,
    )?
    .with_augment(config.augment)
    .with_shuffle(true);
    let val_stream = BatchStream::new(
        &val_data,
        manifest.normalization,
        config.batch_size,
        config.seed,
    )?;

    let hash = config_hash(config);
    let mut opt = Sgd::new(config.momentum, config.weight_decay);
    let mut report = RunReport {
        arch: model.arch_name().to_string(),
        config_hash: hash.clone(),
        seed: config.seed,
        input_side: side,
        epochs: Vec::with_capacity(config.epochs),
        lr_trace: Vec::new(),
        best_epoch: 0,
        best_val_mae: f64::INFINITY,
        wall_time_secs: 0.0,
        checkpoint: None,
    };
    let batches_per_epoch = train_stream.batches_per_epoch();

    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut sample_count = 0usize;
        for (step, (images, labels, _)) in train_stream.epoch(epoch as u64).enumerate() {
            let t = match config.schedule.kind {
                ScheduleKind::CosineWarmRestart => {
                    epoch as f64 + step as f64 / batches_per_epoch as f64
                }
                ScheduleKind::StepDecay => epoch as f64,
            };
            let lr = config.schedule.lr_at(config.base_lr, t);
            report.lr_trace.push(lr);

            model.zero_grads();
            let preds = model.forward(&to_elem4::<T>(&images), Mode::Train)?;
            let (loss, dpred) = mse_loss_with_grad(&preds, &to_elem1::<T>(&labels))?;
            if !loss.is_finite() {
                let (lmean, lstd) = stats(&labels);
                return Err(CoreError::Diverged(format!(
                    "non-finite loss {loss} at epoch {epoch} step {step}: \
                     lr={lr:.3e}, batch of {} labels (mean {lmean:.4}, std {lstd:.4}), \
                     prediction range [{:.4}, {:.4}]",
                    labels.len(),
                    preds.iter().fold(f64::INFINITY, |a, &b| a.min(Elem::to_f64(b))),
                    preds
                        .iter()
                        .fold(f64::NEG_INFINITY, |a, &b| a.max(Elem::to_f64(b))),
                )));
            }
            model.backward(&dpred);
            opt.step(model.params_mut(), lr);
            loss_sum += loss * labels.len() as f64;
            sample_count += labels.len();
        }

        let (preds, targets) = predict_stream(model, &val_stream)?;
        let val_mae = mae(&preds, &targets)?;
        let val_rmse = rmse(&preds, &targets)?;
        report.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / sample_count.max(1) as f64,
            val_mae,
            val_rmse,
        });
        if val_mae < report.best_val_mae {
            report.best_val_mae = val_mae;
            report.best_epoch = epoch;
            if let Some(dir) = checkpoint_dir {
                std::fs::create_dir_all(dir)?;
                let path = dir.join("best.wcck");
                save_checkpoint(&path, config, model, epoch, val_mae)?;
                report.checkpoint = Some(path.to_string_lossy().into_owned());
            }
        }
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, BackboneSpec, FusionGeometry};
    use crate::synth::{generate_dataset, SynthConfig};
    use tempfile::TempDir;

    /// Small synthetic dataset rendered once per test binary would be
    /// nicer, but generation at 96x64 is fast enough to keep tests
    /// independent.
    fn fixture(n: usize, stations: usize, seed: u64) -> (TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let mut config = SynthConfig::new(n, stations, seed);
        config.width = 96;
        config.height = 64;
        let manifest = generate_dataset(&config, dir.path()).unwrap();
        (dir, manifest)
    }

    fn desk_config(seed: u64, epochs: usize) -> TrainConfig {
        let mut config = TrainConfig::recipe(ModelConfig::wcamnet(BackboneSpec::tiny(8)));
        config.epochs = epochs;
        config.batch_size = 8;
        config.base_lr = 0.05;
        config.seed = seed;
        config.augment = false;
        config
    }

    fn build(config: &TrainConfig, seed: u64) -> Box<dyn Model<f32>> {
        build_model::<f32>(&config.model, &FusionGeometry::reduced(), None, seed).unwrap()
    }

    #[test]
    fn training_runs_and_reports_are_reproducible_bitwise() {
        let (dir, manifest) = fixture(24, 4, 3);
        let config = desk_config(11, 2);
        let mut m1 = build(&config, 5);
        let mut m2 = build(&config, 5);
        let r1 = train(&config, &manifest, dir.path(), m1.as_mut(), None).unwrap();
        let r2 = train(&config, &manifest, dir.path(), m2.as_mut(), None).unwrap();
        assert_eq!(r1.lr_trace, r2.lr_trace);
        assert_eq!(r1.epochs, r2.epochs);
        for (a, b) in m1.params().iter().zip(m2.params().iter()) {
            assert_eq!(a.name(), b.name());
            assert_eq!(a.value, b.value, "parameter {} diverged", a.name());
        }
    }

    #[test]
    fn lr_trace_matches_closed_form_at_every_step() {
        let (dir, manifest) = fixture(24, 4, 3);
        let mut config = desk_config(11, 3);
        let mut model = build(&config, 5);
        let report = train(&config, &manifest, dir.path(), model.as_mut(), None).unwrap();
        let train_count = manifest.split_samples(Split::Train).len();
        let bpe = train_count.div_ceil(config.batch_size);
        assert_eq!(report.lr_trace.len(), bpe * config.epochs);
        for (i, &lr) in report.lr_trace.iter().enumerate() {
            let epoch = i / bpe;
            let step = i % bpe;
            let t = epoch as f64 + step as f64 / bpe as f64;
            assert_eq!(lr, config.schedule.lr_at(config.base_lr, t));
        }

        // step schedule advances per epoch: constant within an epoch
        config.schedule = ScheduleSpec::step_decay();
        config.schedule.step_epochs = 2;
        let mut model = build(&config, 5);
        let report = train(&config, &manifest, dir.path(), model.as_mut(), None).unwrap();
        for (i, &lr) in report.lr_trace.iter().enumerate() {
            let epoch = i / bpe;
            assert_eq!(lr, config.schedule.lr_at(config.base_lr, epoch as f64));
        }
    }

    #[test]
    fn frozen_backbone_is_bitwise_stable_while_the_rest_trains() {
        let (dir, manifest) = fixture(24, 4, 3);
        let config = desk_config(2, 1);
        let mut model = build(&config, 9);
        let before: Vec<(String, ndarray::ArrayD<f32>)> = model
            .params()
            .iter()
            .map(|p| (p.name().to_string(), p.value.clone()))
            .collect();
        train(&config, &manifest, dir.path(), model.as_mut(), None).unwrap();
        let mut trained_changed = false;
        for (p, (name, old)) in model.params().iter().zip(&before) {
            assert_eq!(p.name(), name);
            if name.starts_with("backbone.") && !p.buffer {
                assert_eq!(&p.value, old, "frozen {} moved", name);
            } else if p.trainable && p.value != *old {
                trained_changed = true;
            }
        }
        assert!(trained_changed);
    }

    #[test]
    fn checkpoint_restores_the_best_validation_state() {
        let (dir, manifest) = fixture(24, 4, 3);
        let ck_dir = tempfile::tempdir().unwrap();
        let config = desk_config(4, 3);
        let mut model = build(&config, 8);
        let report = train(
            &config,
            &manifest,
            dir.path(),
            model.as_mut(),
            Some(ck_dir.path()),
        )
        .unwrap();
        let ck_path = ck_dir.path().join("best.wcck");
        assert_eq!(report.checkpoint.as_deref(), ck_path.to_str());

        let mut restored = build(&config, 8);
        let meta = load_checkpoint_into(&ck_path, restored.as_mut()).unwrap();
        assert_eq!(meta["epoch"], report.best_epoch);
        assert_eq!(meta["config_hash"], report.config_hash);

        // replaying validation on the restored model reproduces the best MAE
        let side = restored.input_side();
        let val = load_split(&manifest, dir.path(), Split::Val, side).unwrap();
        let stream =
            BatchStream::new(&val, manifest.normalization, config.batch_size, config.seed)
                .unwrap();
        let (preds, targets) = predict_stream(restored.as_mut(), &stream).unwrap();
        assert_eq!(mae(&preds, &targets).unwrap(), report.best_val_mae);
    }

    #[test]
    fn two_hundred_steps_cut_training_loss_tenfold() {
        let (dir, manifest) = fixture(32, 4, 21);
        // put every station in the train split: this smoke test only
        // measures optimization, not generalization
        let mut manifest = manifest;
        for split in manifest.split_assignment.values_mut() {
            *split = Split::Train;
        }
        let data = load_split(&manifest, dir.path(), Split::Train, 8).unwrap();
        assert_eq!(data.len(), 32);
        let stream = BatchStream::new(&data, manifest.normalization, 16, 0)
            .unwrap()
            .with_shuffle(true);

        let config = ModelConfig::wcamnet(BackboneSpec::tiny(8));
        let mut model = build_model::<f32>(&config, &FusionGeometry::reduced(), None, 1).unwrap();
        let mut opt = Sgd::new(0.9, 0.0);
        let mut first = None;
        let mut last = 0.0;
        let mut steps = 0;
        'outer: for epoch in 0.. {
            for (images, labels, _) in stream.epoch(epoch) {
                model.zero_grads();
                let preds = model
                    .forward(&to_elem4::<f32>(&images), Mode::Train)
                    .unwrap();
                let (loss, dpred) = mse_loss_with_grad(&preds, &labels).unwrap();
                model.backward(&dpred);
                opt.step(model.params_mut(), 0.05);
                first.get_or_insert(loss);
                last = loss;
                steps += 1;
                if steps == 200 {
                    break 'outer;
                }
            }
        }
        let first = first.unwrap();
        assert!(
            last <= first / 10.0,
            "loss only moved from {first} to {last} in 200 steps"
        );
    }

    #[test]
    fn empty_validation_split_is_a_config_error() {
        let (dir, manifest) = fixture(24, 4, 3);
        let mut manifest = manifest;
        for split in manifest.split_assignment.values_mut() {
            *split = Split::Train;
        }
        let config = desk_config(0, 1);
        let mut model = build(&config, 1);
        let err = train(&config, &manifest, dir.path(), model.as_mut(), None).unwrap_err();
        assert!(matches!(err, CoreError::Config(_)), "got {err:?}");
    }

    #[test]
    fn non_finite_loss_aborts_with_diagnostics() {
        let (dir, manifest) = fixture(24, 4, 3);
        let config = desk_config(1, 1);
        let mut model = build(&config, 2);
        for p in model.params_mut() {
            if p.trainable && p.name().contains("head") {
                p.value.fill(f32::NAN);
            }
        }
        let err = train(&config, &manifest, dir.path(), model.as_mut(), None).unwrap_err();
        match err {
            CoreError::Diverged(msg) => {
                assert!(msg.contains("lr="), "diagnostic must carry the lr: {msg}");
                assert!(msg.contains("labels"), "diagnostic must carry batch stats: {msg}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn recipes_match_the_protocol() {
        let wc = TrainConfig::recipe(ModelConfig::wcamnet(BackboneSpec::tiny(8)));
        assert_eq!(wc.epochs, 15);
        assert_eq!(wc.schedule.kind, ScheduleKind::CosineWarmRestart);
        assert_eq!(wc.batch_size, 16);
        assert_eq!(wc.momentum, 0.9);

        let vgg = TrainConfig::recipe(ModelConfig::baseline(
            Architecture::Vgg19Style,
            BackboneSpec::tiny(8),
            crate::model::Profile::Desk,
        ));
        assert_eq!(vgg.epochs, 30);
        assert_eq!(vgg.schedule.kind, ScheduleKind::StepDecay);
        assert_eq!(vgg.schedule.step_epochs, 10);

        let probe = TrainConfig::recipe(ModelConfig::baseline(
            Architecture::BackboneLinearHead,
            BackboneSpec::tiny(8),
            crate::model::Profile::Desk,
        ));
        assert_eq!(probe.epochs, 6);
        assert_eq!(probe.schedule.kind, ScheduleKind::StepDecay);
        assert_eq!(probe.schedule.step_epochs, 2);
    }
}
