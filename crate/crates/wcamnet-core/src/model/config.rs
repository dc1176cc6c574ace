//! Declarative architecture descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const INPUT_SIDE: usize = 602;
pub const PATCH_SIZE: usize = 14;
/// 602 / 14.
pub const TOKEN_GRID: usize = INPUT_SIDE / PATCH_SIZE;
pub const HD_OUT_CHANNELS: usize = 64;

pub const EMBED_BASE: usize = 768;
pub const EMBED_LARGE: usize = 1024;
pub const EMBED_TINY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackboneKind {
    PretrainedBase,
    PretrainedLarge,
    TinyRandomFrozen,
}

/// Which feature-extractor backbone a model uses and at what width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub kind: BackboneKind,
    pub embed_dim: usize,
    pub patch_size: usize,
    pub frozen: bool,
}

impl BackboneSpec {
    pub fn pretrained_base() -> Self {
        BackboneSpec {
            kind: BackboneKind::PretrainedBase,
            embed_dim: EMBED_BASE,
            patch_size: PATCH_SIZE,
            frozen: true,
        }
    }

    pub fn pretrained_large() -> Self {
        BackboneSpec {
            kind: BackboneKind::PretrainedLarge,
            embed_dim: EMBED_LARGE,
            patch_size: PATCH_SIZE,
            frozen: true,
        }
    }

    /// Cheap frozen random projection standing in for a pretrained backbone
    /// at the same interface; `embed_dim` is free so tests can exercise any
    /// width without weight files.
    pub fn tiny(embed_dim: usize) -> Self {
        BackboneSpec {
            kind: BackboneKind::TinyRandomFrozen,
            embed_dim,
            patch_size: PATCH_SIZE,
            frozen: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(CoreError::config("backbone embed_dim must be positive"));
        }
        if self.patch_size == 0 {
            return Err(CoreError::config("backbone patch_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Wcamnet,
    Resnet50Style,
    Resnet152Style,
    Vgg19Style,
    BackboneLinearHead,
    VitFullFinetune,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::Wcamnet,
        Architecture::Resnet50Style,
        Architecture::Resnet152Style,
        Architecture::Vgg19Style,
        Architecture::BackboneLinearHead,
        Architecture::VitFullFinetune,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Wcamnet => "wcamnet",
            Architecture::Resnet50Style => "resnet50-style",
            Architecture::Resnet152Style => "resnet152-style",
            Architecture::Vgg19Style => "vgg19-style",
            Architecture::BackboneLinearHead => "backbone-linear-head",
            Architecture::VitFullFinetune => "vit-full-finetune",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|a| a.name() == name)
            .copied()
            .ok_or_else(|| CoreError::UnknownArchitecture {
                name: name.to_string(),
                valid: Self::ALL.map(|a| a.name()).join(", "),
            })
    }
}

/// Capacity profile: `Paper` mirrors the published layer layouts; `Desk`
/// shrinks widths/depths so the same graphs train on a laptop CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Paper,
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub backbone: BackboneSpec,
    pub use_hd_branch: bool,
    pub use_se_blocks: bool,
    pub se_reduction: usize,
    pub profile: Profile,
}

impl ModelConfig {
    pub fn wcamnet(backbone: BackboneSpec) -> Self {
        ModelConfig {
            architecture: Architecture::Wcamnet,
            backbone,
            use_hd_branch: true,
            use_se_blocks: true,
            se_reduction: 8,
            profile: Profile::Desk,
        }
    }

    pub fn baseline(architecture: Architecture, backbone: BackboneSpec, profile: Profile) -> Self {
        ModelConfig {
            architecture,
            backbone,
            use_hd_branch: true,
            use_se_blocks: true,
            se_reduction: 8,
            profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        if self.se_reduction == 0 {
            return Err(CoreError::config("se_reduction must be positive"));
        }
        Ok(())
    }
}

/// Per-layer convolution spec: (kernel, stride, padding, out_channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_channels: usize,
}

/// Spatial wiring of the fusion network. The production geometry works on
/// 602×602 inputs; a reduced geometry with the same topology (three HD conv
/// layers whose total stride equals the patch size) exists for fast
/// finite-difference checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionGeometry {
    pub input_side: usize,
    pub patch_size: usize,
    pub hd_layers: [ConvSpec; 3],
}

impl FusionGeometry {
    pub fn production() -> Self {
        FusionGeometry {
            input_side: INPUT_SIDE,
            patch_size: PATCH_SIZE,
            hd_layers: [
                ConvSpec { kernel: 7, stride: 7, pad: 0, out_channels: 32 },
                ConvSpec { kernel: 3, stride: 2, pad: 1, out_channels: HD_OUT_CHANNELS },
                ConvSpec { kernel: 3, stride: 1, pad: 1, out_channels: HD_OUT_CHANNELS },
            ],
        }
    }

    /// Same topology at 8×8 input for finite-difference gradient checks.
    pub fn reduced() -> Self {
        FusionGeometry {
            input_side: 8,
            patch_size: 2,
            hd_layers: [
                ConvSpec { kernel: 2, stride: 2, pad: 0, out_channels: 4 },
                ConvSpec { kernel: 3, stride: 1, pad: 1, out_channels: 6 },
                ConvSpec { kernel: 3, stride: 1, pad: 1, out_channels: 6 },
            ],
        }
    }

    pub fn token_grid(&self) -> usize {
        self.input_side / self.patch_size
    }

    pub fn hd_out_channels(&self) -> usize {
        self.hd_layers[2].out_channels
    }

    pub fn validate(&self) -> Result<()> {
        if !self.input_side.is_multiple_of(self.patch_size) {
            return Err(CoreError::config(format!(
                "input side {} not divisible by patch size {}",
                self.input_side, self.patch_size
            )));
        }
        // the HD stack must land exactly on the token grid
        let mut side = self.input_side;
        for layer in &self.hd_layers {
            side = crate::nn::conv_out_dim(side, layer.kernel, layer.stride, layer.pad);
        }
        if side != self.token_grid() {
            return Err(CoreError::shape(format!(
                "HD branch output {}x{} does not match token grid {}x{}",
                side,
                side,
                self.token_grid(),
                self.token_grid()
            )));
        }
        Ok(())
    }
}
