//! Architectures: the fusion regression network, its frozen backbones, and
//! the baseline models it is benchmarked against.

pub mod backbone;
pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod hd_branch;
pub mod head;
pub mod se_block;
pub mod vit;
pub mod wcamnet;

use std::path::Path;

use ndarray::{Array1, Array4};

use crate::elem::Elem;
use crate::error::Result;
use crate::nn::{Mode, ParamSet};

pub use backbone::{save_vit_backbone, Backbone};
pub use baselines::{BackboneLinearHead, ResNetStyle, VggStyle, VitRegressor};
pub use config::{
    Architecture, BackboneKind, BackboneSpec, ConvSpec, FusionGeometry, ModelConfig, Profile,
};
pub use vit::{VisionTransformer, VitConfig};
pub use wcamnet::{fuse, ForwardTrace, WcamNet};

/// A trainable regression network: images in, sigmoid-bounded friction out.
pub trait Model<T: Elem>: ParamSet<T> + Send {
    fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<Array1<T>>;

    /// Accumulate parameter gradients from the prediction gradient of the
    /// most recent training-mode forward pass.
    fn backward(&mut self, dpred: &Array1<T>);

    fn config(&self) -> &ModelConfig;

    fn arch_name(&self) -> &'static str;

    /// Image side length (pixels) this instance was built for.
    fn input_side(&self) -> usize;

    /// Seed the instance was initialized from. Together with the config,
    /// geometry and weights directory this reproduces every non-checkpointed
    /// (frozen) tensor, so checkpoints can stay small.
    fn init_seed(&self) -> u64;
}

/// Instantiate the architecture named by `config` at the given geometry.
pub fn build_model<T: Elem>(
    config: &ModelConfig,
    geometry: &FusionGeometry,
    weights_dir: Option<&Path>,
    seed: u64,
) -> Result<Box<dyn Model<T>>> {
    config.validate()?;
    Ok(match config.architecture {
        Architecture::Wcamnet => Box::new(WcamNet::new(
            *config,
            geometry.clone(),
            weights_dir,
            seed,
        )?),
        Architecture::Resnet50Style | Architecture::Resnet152Style => {
            Box::new(ResNetStyle::new(*config, geometry.input_side, seed)?)
        }
        Architecture::Vgg19Style => Box::new(VggStyle::new(*config, geometry.input_side, seed)?),
        Architecture::BackboneLinearHead => {
            Box::new(BackboneLinearHead::new(*config, geometry, weights_dir, seed)?)
        }
        Architecture::VitFullFinetune => {
            Box::new(VitRegressor::new(*config, geometry, weights_dir, seed)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::BackboneSpec;

    #[test]
    fn registry_builds_every_architecture_at_desk_scale() {
        // 98 = 7 patches of 14: the production HD trace (total stride 14)
        // lands on the same grid, so even the fusion net scales down
        let geom = FusionGeometry {
            input_side: 98,
            ..FusionGeometry::production()
        };
        for arch in Architecture::ALL {
            let config = if arch == Architecture::Wcamnet {
                ModelConfig::wcamnet(BackboneSpec::tiny(8))
            } else {
                ModelConfig::baseline(arch, BackboneSpec::tiny(8), Profile::Desk)
            };
            let model = build_model::<f32>(&config, &geom, None, 1).unwrap();
            assert_eq!(model.arch_name(), arch.name());
        }
    }

    #[test]
    fn wcamnet_trainable_set_excludes_backbone() {
        let config = ModelConfig::wcamnet(BackboneSpec::tiny(8));
        let model = build_model::<f64>(&config, &FusionGeometry::reduced(), None, 2).unwrap();
        let names: Vec<String> = model
            .params()
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.name().to_string())
            .collect();
        assert!(!names.is_empty());
        assert!(names.iter().all(|n| !n.starts_with("backbone.")));
    }
}
