//! Feature-extractor backbones behind a common token-grid interface.
//!
//! Three kinds: two pretrained transformer widths loaded from checkpoint
//! files, and a tiny frozen random patch projection that serves the same
//! interface at negligible cost for tests and desk-scale runs.

use std::path::Path;

use ndarray::{Array2, Array4, Axis};

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::hash;
use crate::model::checkpoint;
use crate::model::config::{BackboneKind, BackboneSpec};
use crate::model::vit::{interpolate_pos_embed, TokenOutput, VisionTransformer, VitConfig};
use crate::nn::{init, Conv2d, Mode, Param};

/// Frozen random linear projection of non-overlapping patches.
pub struct PatchProjector<T> {
    conv: Conv2d<T>,
    input_side: usize,
}

impl<T: Elem> PatchProjector<T> {
    pub fn new(embed_dim: usize, patch: usize, input_side: usize, seed: u64) -> Result<Self> {
        if !input_side.is_multiple_of(patch) {
            return Err(CoreError::config(format!(
                "input {input_side} not divisible by patch {patch}"
            )));
        }
        let mut rng = hash::stream_rng(seed, "tiny-backbone");
        let conv = Conv2d::new(
            "backbone.patch_proj",
            Param::new(
                "backbone.patch_proj.weight",
                init::fan_in_uniform(&mut rng, &[embed_dim, 3, patch, patch], 3 * patch * patch),
                false,
            ),
            None,
            patch,
            patch,
            0,
        );
        Ok(PatchProjector { conv, input_side })
    }

    fn forward(&mut self, images: &Array4<T>) -> Result<TokenOutput<T>> {
        let (_, c, h, w) = images.dim();
        if c != 3 || h != self.input_side || w != self.input_side {
            return Err(CoreError::shape(format!(
                "backbone expects (B, 3, {0}, {0}), got (B, {c}, {h}, {w})",
                self.input_side
            )));
        }
        let tokens = self.conv.forward(images, Mode::Eval);
        // global summary token: spatial mean of the patch tokens
        let (_, _, gh, gw) = tokens.dim();
        let n = T::cast((gh * gw) as f64);
        let class_token = tokens.sum_axis(Axis(3)).sum_axis(Axis(2)) / n;
        Ok(TokenOutput { tokens, class_token })
    }
}

pub enum BackboneNet<T> {
    Tiny(PatchProjector<T>),
    Vit(Box<VisionTransformer<T>>),
}

pub struct Backbone<T> {
    pub spec: BackboneSpec,
    net: BackboneNet<T>,
}

impl<T: Elem> Backbone<T> {
    /// Build a backbone for `spec` working on `input_side`×`input_side`
    /// inputs with patches of `patch`. Pretrained kinds require a weights
    /// file in `weights_dir`; the tiny kind is derived from `seed`.
    pub fn build(
        spec: BackboneSpec,
        input_side: usize,
        patch: usize,
        weights_dir: Option<&Path>,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let net = match spec.kind {
            BackboneKind::TinyRandomFrozen => BackboneNet::Tiny(PatchProjector::new(
                spec.embed_dim,
                patch,
                input_side,
                seed,
            )?),
            BackboneKind::PretrainedBase | BackboneKind::PretrainedLarge => {
                if patch != spec.patch_size {
                    return Err(CoreError::config(format!(
                        "pretrained backbone requires patch {}, got {patch}",
                        spec.patch_size
                    )));
                }
                let path = weights_path(spec.kind, weights_dir)?;
                let vit = load_vit(&path, &spec, input_side, false)?;
                BackboneNet::Vit(Box::new(vit))
            }
        };
        Ok(Backbone { spec, net })
    }

    /// Frozen feature extraction: evaluation-mode forward, no caches, no
    /// gradients recorded for backbone parameters.
    pub fn extract(&mut self, images: &Array4<T>) -> Result<TokenOutput<T>> {
        match &mut self.net {
            BackboneNet::Tiny(p) => p.forward(images),
            BackboneNet::Vit(v) => v.forward(images, Mode::Eval),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.spec.embed_dim
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        match &self.net {
            BackboneNet::Tiny(p) => p.conv.collect(out),
            BackboneNet::Vit(v) => v.collect(out),
        }
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        match &mut self.net {
            BackboneNet::Tiny(p) => p.conv.collect_mut(out),
            BackboneNet::Vit(v) => v.collect_mut(out),
        }
    }
}

/// Locate the weights file a pretrained backbone kind expects.
pub(crate) fn weights_path(
    kind: BackboneKind,
    weights_dir: Option<&Path>,
) -> Result<std::path::PathBuf> {
    let file = match kind {
        BackboneKind::PretrainedBase => "backbone-base.ckpt",
        BackboneKind::PretrainedLarge => "backbone-large.ckpt",
        BackboneKind::TinyRandomFrozen => {
            return Err(CoreError::config("tiny backbone needs no weights file"))
        }
    };
    weights_dir
        .map(|d| d.join(file))
        .filter(|p| p.exists())
        .ok_or_else(|| {
            CoreError::BackboneUnavailable(format!(
                "backbone unavailable: weights file {file} not found{}",
                weights_dir
                    .map(|d| format!(" in {}", d.display()))
                    .unwrap_or_else(|| " (no weights directory configured)".into())
            ))
        })
}

/// Load a transformer backbone checkpoint, resampling its position table if
/// it was saved for a different token grid.
pub(crate) fn load_vit<T: Elem>(
    path: &Path,
    spec: &BackboneSpec,
    input_side: usize,
    trainable: bool,
) -> Result<VisionTransformer<T>> {
    let ck = checkpoint::load(path)
        .map_err(|e| CoreError::BackboneUnavailable(format!("backbone unavailable: {e}")))?;
    let file_cfg: VitConfig = serde_json::from_value(ck.meta["vit_config"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("checkpoint lacks vit_config: {e}")))?;
    if file_cfg.embed_dim != spec.embed_dim {
        return Err(CoreError::Checkpoint(format!(
            "backbone width mismatch: file has {}, spec requires {}",
            file_cfg.embed_dim, spec.embed_dim
        )));
    }
    if file_cfg.patch_size != spec.patch_size {
        return Err(CoreError::Checkpoint(format!(
            "backbone patch mismatch: file has {}, spec requires {}",
            file_cfg.patch_size, spec.patch_size
        )));
    }
    let target_cfg = VitConfig {
        input_side,
        ..file_cfg.clone()
    };
    let mut rng = hash::stream_rng(0, "backbone-load-placeholder");
    let mut vit = VisionTransformer::new(target_cfg.clone(), &mut rng, trainable)?;
    let old_grid = file_cfg.grid();
    let new_grid = target_cfg.grid();

    let mut params: Vec<&mut Param<T>> = Vec::new();
    vit.collect_mut(&mut params);
    for p in params.iter_mut() {
        let t = ck
            .tensor(p.name())
            .ok_or_else(|| CoreError::Checkpoint(format!("missing tensor {}", p.name())))?;
        if p.name() == "backbone.pos_embed" && old_grid != new_grid {
            let d = file_cfg.embed_dim;
            let src = Array2::from_shape_vec((old_grid * old_grid + 1, d), t.data.iter().map(|&v| T::cast(v)).collect())
                .map_err(|e| CoreError::Checkpoint(format!("pos table malformed: {e}")))?;
            let resampled = interpolate_pos_embed(&src, old_grid, new_grid)?;
            p.value = resampled.into_dyn();
        } else {
            checkpoint::fill_param(p, &t.desc.shape, &t.data)?;
        }
    }
    Ok(vit)
}

/// Write a transformer backbone as a loadable weights file.
pub fn save_vit_backbone<T: Elem>(path: &Path, vit: &VisionTransformer<T>) -> Result<()> {
    let meta = serde_json::json!({
        "kind": "backbone",
        "vit_config": &vit.config,
    });
    let mut params = Vec::new();
    vit.collect(&mut params);
    checkpoint::save(path, &meta, &params)
}
