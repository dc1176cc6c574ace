//! The fusion regression network: a frozen token backbone and a trainable
//! high-definition conv branch, channel-concatenated and refined by two
//! residual squeeze-and-excitation blocks before the pooled sigmoid head.

use std::path::Path;

use ndarray::{concatenate, s, Array1, Array4, Axis};

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::hash;
use crate::model::backbone::Backbone;
use crate::model::config::{FusionGeometry, ModelConfig};
use crate::model::hd_branch::HdBranch;
use crate::model::head::RegressionHead;
use crate::model::se_block::SeResidualBlock;
use crate::model::Model;
use crate::nn::{Mode, Param, ParamSet};

/// Channel-concatenate token grid and HD features, tokens first.
pub fn fuse<T: Elem>(tokens: &Array4<T>, hd: &Array4<T>) -> Result<Array4<T>> {
    let (tb, _, th, tw) = tokens.dim();
    let (hb, _, hh, hw) = hd.dim();
    if tb != hb || th != hh || tw != hw {
        return Err(CoreError::shape(format!(
            "fuse inputs disagree: tokens (B={tb}, {th}x{tw}) vs hd (B={hb}, {hh}x{hw})"
        )));
    }
    Ok(concatenate(Axis(1), &[tokens.view(), hd.view()]).expect("channel concat"))
}

/// Shapes observed during the most recent forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardTrace {
    pub token_shape: [usize; 4],
    pub hd_shape: Option<[usize; 4]>,
    pub fused_shape: [usize; 4],
    pub prediction_len: usize,
}

pub struct WcamNet<T> {
    config: ModelConfig,
    pub geometry: FusionGeometry,
    backbone: Backbone<T>,
    hd: Option<HdBranch<T>>,
    se1: Option<SeResidualBlock<T>>,
    se2: Option<SeResidualBlock<T>>,
    head: RegressionHead<T>,
    fused_channels: usize,
    init_seed: u64,
    trace: Option<ForwardTrace>,
}

impl<T: Elem> WcamNet<T> {
    pub fn new(
        config: ModelConfig,
        geometry: FusionGeometry,
        weights_dir: Option<&Path>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        geometry.validate()?;
        let backbone = Backbone::build(
            config.backbone,
            geometry.input_side,
            geometry.patch_size,
            weights_dir,
            seed,
        )?;
        let mut rng = hash::stream_rng(seed, "init");
        let hd = if config.use_hd_branch {
            Some(HdBranch::new(&geometry, &mut rng, "hd")?)
        } else {
            None
        };
        let fused_channels = config.backbone.embed_dim
            + hd.as_ref().map(|h| h.out_channels()).unwrap_or(0);
        let (se1, se2) = if config.use_se_blocks {
            (
                Some(SeResidualBlock::new(fused_channels, config.se_reduction, &mut rng, "se1")?),
                Some(SeResidualBlock::new(fused_channels, config.se_reduction, &mut rng, "se2")?),
            )
        } else {
            (None, None)
        };
        let head = RegressionHead::new(fused_channels, &mut rng, "head");
        Ok(WcamNet {
            config,
            geometry,
            backbone,
            hd,
            se1,
            se2,
            head,
            fused_channels,
            init_seed: seed,
            trace: None,
        })
    }

    pub fn fused_channels(&self) -> usize {
        self.fused_channels
    }

    pub fn last_trace(&self) -> Option<&ForwardTrace> {
        self.trace.as_ref()
    }

    pub fn se_blocks(&mut self) -> (Option<&mut SeResidualBlock<T>>, Option<&mut SeResidualBlock<T>>) {
        (self.se1.as_mut(), self.se2.as_mut())
    }

    fn dims4(a: &Array4<T>) -> [usize; 4] {
        let (b, c, h, w) = a.dim();
        [b, c, h, w]
    }
}

impl<T: Elem> ParamSet<T> for WcamNet<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        self.backbone.collect(&mut v);
        if let Some(hd) = &self.hd {
            hd.collect(&mut v);
        }
        if let Some(se) = &self.se1 {
            se.collect(&mut v);
        }
        if let Some(se) = &self.se2 {
            se.collect(&mut v);
        }
        self.head.collect(&mut v);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        self.backbone.collect_mut(&mut v);
        if let Some(hd) = &mut self.hd {
            hd.collect_mut(&mut v);
        }
        if let Some(se) = &mut self.se1 {
            se.collect_mut(&mut v);
        }
        if let Some(se) = &mut self.se2 {
            se.collect_mut(&mut v);
        }
        self.head.collect_mut(&mut v);
        v
    }
}

impl<T: Elem> Model<T> for WcamNet<T> {
    fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<Array1<T>> {
        let tokens = self.backbone.extract(images)?;
        let token_shape = Self::dims4(&tokens.tokens);
        let (fused, hd_shape) = match &mut self.hd {
            Some(hd) => {
                let hd_out = hd.forward(images, mode);
                let shape = Self::dims4(&hd_out);
                (fuse(&tokens.tokens, &hd_out)?, Some(shape))
            }
            None => (tokens.tokens, None),
        };
        let fused_shape = Self::dims4(&fused);
        let mut z = fused;
        if let Some(se) = &mut self.se1 {
            z = se.forward(&z, mode);
        }
        if let Some(se) = &mut self.se2 {
            z = se.forward(&z, mode);
        }
        let pred = self.head.forward(&z, mode);
        self.trace = Some(ForwardTrace {
            token_shape,
            hd_shape,
            fused_shape,
            prediction_len: pred.len(),
        });
        Ok(pred)
    }

    fn backward(&mut self, dpred: &Array1<T>) {
        let mut dz = self.head.backward(dpred);
        if let Some(se) = &mut self.se2 {
            dz = se.backward(&dz);
        }
        if let Some(se) = &mut self.se1 {
            dz = se.backward(&dz);
        }
        // the backbone is frozen: its token gradient is dropped; only the HD
        // slice continues
        if let Some(hd) = &mut self.hd {
            let embed = self.config.backbone.embed_dim;
            let dhd = dz.slice(s![.., embed.., .., ..]).to_owned();
            let _ = hd.backward(&dhd);
        }
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn arch_name(&self) -> &'static str {
        self.config.architecture.name()
    }

    fn input_side(&self) -> usize {
        self.geometry.input_side
    }

    fn init_seed(&self) -> u64 {
        self.init_seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::BackboneSpec;

    fn small_net(use_hd: bool, use_se: bool) -> WcamNet<f64> {
        let mut config = ModelConfig::wcamnet(BackboneSpec::tiny(8));
        config.use_hd_branch = use_hd;
        config.use_se_blocks = use_se;
        WcamNet::new(config, FusionGeometry::reduced(), None, 42).unwrap()
    }

    fn batch(b: usize) -> Array4<f64> {
        Array4::from_shape_fn((b, 3, 8, 8), |(bi, c, i, j)| {
            ((bi * 192 + c * 64 + i * 8 + j) as f64 * 0.11).sin()
        })
    }

    #[test]
    fn fuse_keeps_tokens_in_leading_channels() {
        let tokens = Array4::from_shape_fn((2, 3, 4, 4), |(b, c, i, j)| {
            (b * 48 + c * 16 + i * 4 + j) as f64
        });
        let hd = Array4::from_elem((2, 2, 4, 4), -1.0);
        let fused = fuse(&tokens, &hd).unwrap();
        assert_eq!(fused.dim(), (2, 5, 4, 4));
        assert_eq!(fused.slice(s![.., 0..3, .., ..]), tokens.view());
        assert!(fused.slice(s![.., 3.., .., ..]).iter().all(|&v| v == -1.0));
    }

    #[test]
    fn fuse_rejects_spatial_mismatch() {
        let tokens = Array4::<f64>::zeros((1, 3, 4, 4));
        let hd = Array4::<f64>::zeros((1, 2, 5, 5));
        assert!(fuse(&tokens, &hd).is_err());
    }

    #[test]
    fn full_graph_predicts_in_open_interval() {
        let mut net = small_net(true, true);
        let x = batch(3);
        let y = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.len(), 3);
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
        let trace = net.last_trace().unwrap();
        assert_eq!(trace.token_shape, [3, 8, 4, 4]);
        assert_eq!(trace.hd_shape, Some([3, 6, 4, 4]));
        assert_eq!(trace.fused_shape, [3, 14, 4, 4]);
    }

    #[test]
    fn no_hd_branch_feeds_tokens_straight_through() {
        let mut net = small_net(false, true);
        assert_eq!(net.fused_channels(), 8);
        let x = batch(2);
        let y = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.len(), 2);
        let trace = net.last_trace().unwrap();
        assert_eq!(trace.hd_shape, None);
        assert_eq!(trace.fused_shape, [2, 8, 4, 4]);
    }

    #[test]
    fn no_se_blocks_head_consumes_fused_map() {
        let mut net = small_net(true, false);
        assert_eq!(net.head.channels(), 14);
        let x = batch(1);
        let y = net.forward(&x, Mode::Eval).unwrap();
        assert!(y[0] > 0.0 && y[0] < 1.0);
    }

    #[test]
    fn no_se_variant_has_fewer_params() {
        let with_se = small_net(true, true);
        let without = small_net(true, false);
        assert!(without.param_count() < with_se.param_count());
    }

    #[test]
    fn backward_accumulates_trainable_grads_only() {
        let mut net = small_net(true, true);
        let x = batch(2);
        let y = net.forward(&x, Mode::Train).unwrap();
        let dy = Array1::from_elem(y.len(), 1.0);
        net.backward(&dy);
        for p in net.params() {
            if p.name().starts_with("backbone.") {
                assert!(p.grad.is_none(), "frozen {} must have no grad", p.name());
            }
        }
        // at least one gradient exists in each trainable stage
        for prefix in ["hd.", "se1.", "se2.", "head."] {
            let any = net
                .params()
                .iter()
                .any(|p| p.name().starts_with(prefix) && p.grad.is_some());
            assert!(any, "no gradient reached {prefix}");
        }
    }
}
