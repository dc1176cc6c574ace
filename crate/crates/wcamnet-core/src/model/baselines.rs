//! Baseline architectures benchmarked against the fusion network: two
//! bottleneck-residual CNNs, a VGG-style plain CNN, a frozen-backbone
//! linear probe, and a fully trainable compact vision transformer.

use std::path::Path;

use ndarray::{concatenate, Array1, Array4, Axis};
use rand_chacha::ChaCha8Rng;

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::hash;
use crate::model::backbone::{self, Backbone};
use crate::model::config::{
    Architecture, BackboneKind, FusionGeometry, ModelConfig, Profile,
};
use crate::model::head::RegressionHead;
use crate::model::vit::{VisionTransformer, VitConfig};
use crate::model::Model;
use crate::nn::{
    conv_out_dim, init, AdaptiveAvgPool, BatchNorm2d, Conv2d, Linear, MaxPool2d, Mode, Param,
    ParamSet, Relu, Sigmoid,
};

/// Conv → batch norm → optional rectifier, the repeating unit of the CNN
/// baselines. Convs are bias-free: the norm's shift replaces the bias.
struct ConvBnRelu<T> {
    conv: Conv2d<T>,
    bn: BatchNorm2d<T>,
    relu: Option<Relu<T>>,
}

impl<T: Elem> ConvBnRelu<T> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        rng: &mut ChaCha8Rng,
        stem: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        relu: bool,
    ) -> Self {
        let conv = Conv2d::new(
            &format!("{stem}.conv"),
            Param::new(
                format!("{stem}.conv.weight"),
                init::fan_in_uniform(rng, &[out_ch, in_ch, kernel, kernel], in_ch * kernel * kernel),
                true,
            ),
            None,
            kernel,
            stride,
            pad,
        );
        let bn = BatchNorm2d::new(&format!("{stem}.norm"), out_ch, true);
        ConvBnRelu {
            conv,
            bn,
            relu: relu.then(Relu::new),
        }
    }

    fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let mut y = self.bn.forward(&self.conv.forward(x, mode), mode);
        if let Some(r) = &mut self.relu {
            y = r
                .forward(y.into_dyn().view(), mode)
                .into_dimensionality::<ndarray::Ix4>()
                .unwrap();
        }
        y
    }

    fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let mut d = dy.clone();
        if let Some(r) = &mut self.relu {
            d = r
                .backward(d.into_dyn().view())
                .into_dimensionality::<ndarray::Ix4>()
                .unwrap();
        }
        self.conv.backward(&self.bn.backward(&d))
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.conv.collect(out);
        self.bn.collect(out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.conv.collect_mut(out);
        self.bn.collect_mut(out);
    }
}

/// Pre-activation-free bottleneck: 1×1 reduce → 3×3 spatial → 1×1 expand,
/// with a projection shortcut when shape changes.
struct Bottleneck<T> {
    reduce: ConvBnRelu<T>,
    spatial: ConvBnRelu<T>,
    expand: ConvBnRelu<T>,
    proj: Option<ConvBnRelu<T>>,
    relu_out: Relu<T>,
}

impl<T: Elem> Bottleneck<T> {
    fn new(
        rng: &mut ChaCha8Rng,
        stem: &str,
        in_ch: usize,
        width: usize,
        out_ch: usize,
        stride: usize,
    ) -> Self {
        let proj = (in_ch != out_ch || stride != 1)
            .then(|| ConvBnRelu::new(rng, &format!("{stem}.proj"), in_ch, out_ch, 1, stride, 0, false));
        Bottleneck {
            reduce: ConvBnRelu::new(rng, &format!("{stem}.reduce"), in_ch, width, 1, 1, 0, true),
            spatial: ConvBnRelu::new(rng, &format!("{stem}.spatial"), width, width, 3, stride, 1, true),
            expand: ConvBnRelu::new(rng, &format!("{stem}.expand"), width, out_ch, 1, 1, 0, false),
            proj,
            relu_out: Relu::new(),
        }
    }

    fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let main = self.expand.forward(
            &self.spatial.forward(&self.reduce.forward(x, mode), mode),
            mode,
        );
        let skip = match &mut self.proj {
            Some(p) => p.forward(x, mode),
            None => x.clone(),
        };
        self.relu_out
            .forward((main + skip).into_dyn().view(), mode)
            .into_dimensionality::<ndarray::Ix4>()
            .unwrap()
    }

    fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let d = self
            .relu_out
            .backward(dy.clone().into_dyn().view())
            .into_dimensionality::<ndarray::Ix4>()
            .unwrap();
        let dx_main = self
            .reduce
            .backward(&self.spatial.backward(&self.expand.backward(&d)));
        let dx_skip = match &mut self.proj {
            Some(p) => p.backward(&d),
            None => d,
        };
        dx_main + dx_skip
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.reduce.collect(out);
        self.spatial.collect(out);
        self.expand.collect(out);
        if let Some(p) = &self.proj {
            p.collect(out);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.reduce.collect_mut(out);
        self.spatial.collect_mut(out);
        self.expand.collect_mut(out);
        if let Some(p) = &mut self.proj {
            p.collect_mut(out);
        }
    }
}

struct ResNetLayout {
    stem_channels: usize,
    widths: [usize; 4],
    blocks: [usize; 4],
    expansion: usize,
}

impl ResNetLayout {
    fn for_arch(arch: Architecture, profile: Profile) -> Result<Self> {
        let deep = match arch {
            Architecture::Resnet50Style => false,
            Architecture::Resnet152Style => true,
            other => {
                return Err(CoreError::config(format!(
                    "no residual-CNN layout for {}",
                    other.name()
                )))
            }
        };
        Ok(match profile {
            Profile::Paper => ResNetLayout {
                stem_channels: 64,
                widths: [64, 128, 256, 512],
                blocks: if deep { [3, 8, 36, 3] } else { [3, 4, 6, 3] },
                expansion: 4,
            },
            Profile::Desk => ResNetLayout {
                stem_channels: 8,
                widths: [8, 12, 16, 24],
                blocks: if deep { [2, 2, 2, 2] } else { [1, 1, 1, 1] },
                expansion: 2,
            },
        })
    }
}

/// Bottleneck-residual CNN ending in pooled sigmoid regression.
pub struct ResNetStyle<T> {
    config: ModelConfig,
    input_side: usize,
    init_seed: u64,
    stem: ConvBnRelu<T>,
    pool: MaxPool2d,
    stages: Vec<Vec<Bottleneck<T>>>,
    head: RegressionHead<T>,
}

impl<T: Elem> ResNetStyle<T> {
    pub fn new(config: ModelConfig, input_side: usize, seed: u64) -> Result<Self> {
        let layout = ResNetLayout::for_arch(config.architecture, config.profile)?;
        let mut rng = hash::stream_rng(seed, "init");
        let stem = ConvBnRelu::new(&mut rng, "stem", 3, layout.stem_channels, 7, 2, 3, true);
        let side = conv_out_dim(input_side, 7, 2, 3);
        if side < 3 {
            return Err(CoreError::shape(format!(
                "input {input_side} too small for the stem pool"
            )));
        }
        let pool = MaxPool2d::new(3, 2);
        let mut side = pool.out_spatial(side);
        let mut in_ch = layout.stem_channels;
        let mut stages = Vec::new();
        for (si, (&width, &count)) in layout.widths.iter().zip(&layout.blocks).enumerate() {
            let out_ch = width * layout.expansion;
            let mut blocks = Vec::new();
            for bi in 0..count {
                let stride = if si > 0 && bi == 0 { 2 } else { 1 };
                blocks.push(Bottleneck::new(
                    &mut rng,
                    &format!("stage{}.block{}", si + 1, bi),
                    in_ch,
                    width,
                    out_ch,
                    stride,
                ));
                side = conv_out_dim(side, 3, stride, 1);
                in_ch = out_ch;
            }
            stages.push(blocks);
        }
        let head = RegressionHead::new(in_ch, &mut rng, "head");
        Ok(ResNetStyle {
            config,
            input_side,
            init_seed: seed,
            stem,
            pool,
            stages,
            head,
        })
    }
}

impl<T: Elem> ParamSet<T> for ResNetStyle<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        self.stem.collect(&mut v);
        for stage in &self.stages {
            for b in stage {
                b.collect(&mut v);
            }
        }
        self.head.collect(&mut v);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        self.stem.collect_mut(&mut v);
        for stage in &mut self.stages {
            for b in stage {
                b.collect_mut(&mut v);
            }
        }
        self.head.collect_mut(&mut v);
        v
    }
}

impl<T: Elem> Model<T> for ResNetStyle<T> {
    fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<Array1<T>> {
        let mut x = self.stem.forward(images, mode);
        x = self.pool.forward(&x, mode);
        for stage in &mut self.stages {
            for b in stage {
                x = b.forward(&x, mode);
            }
        }
        Ok(self.head.forward(&x, mode))
    }

    fn backward(&mut self, dpred: &Array1<T>) {
        let mut d = self.head.backward(dpred);
        for stage in self.stages.iter_mut().rev() {
            for b in stage.iter_mut().rev() {
                d = b.backward(&d);
            }
        }
        let d = self.pool.backward(&d);
        let _ = self.stem.backward(&d);
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn arch_name(&self) -> &'static str {
        self.config.architecture.name()
    }

    fn input_side(&self) -> usize {
        self.input_side
    }

    fn init_seed(&self) -> u64 {
        self.init_seed
    }
}

struct VggLayout {
    widths: [usize; 5],
    convs: [usize; 5],
    pool_out: usize,
    hidden: usize,
}

impl VggLayout {
    fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => VggLayout {
                widths: [64, 128, 256, 512, 512],
                convs: [2, 2, 4, 4, 4],
                pool_out: 7,
                hidden: 4096,
            },
            Profile::Desk => VggLayout {
                widths: [8, 16, 24, 32, 32],
                convs: [1, 1, 2, 2, 2],
                pool_out: 3,
                hidden: 48,
            },
        }
    }
}

/// Plain deep CNN: stacked 3×3 conv blocks with halving pools, adaptive
/// average pooling, and a small fully connected regressor.
pub struct VggStyle<T> {
    config: ModelConfig,
    input_side: usize,
    init_seed: u64,
    blocks: Vec<Vec<ConvBnRelu<T>>>,
    pools: Vec<MaxPool2d>,
    adaptive: AdaptiveAvgPool,
    fc1: Linear<T>,
    relu1: Relu<T>,
    fc2: Linear<T>,
    sigmoid: Sigmoid<T>,
    feat_shape: Option<(usize, usize, usize, usize)>,
}

impl<T: Elem> VggStyle<T> {
    pub fn new(config: ModelConfig, input_side: usize, seed: u64) -> Result<Self> {
        let layout = VggLayout::for_profile(config.profile);
        let mut rng = hash::stream_rng(seed, "init");
        let mut blocks = Vec::new();
        let mut pools = Vec::new();
        let mut in_ch = 3;
        let mut side = input_side;
        for (bi, (&width, &n)) in layout.widths.iter().zip(&layout.convs).enumerate() {
            let mut convs = Vec::new();
            for ci in 0..n {
                convs.push(ConvBnRelu::new(
                    &mut rng,
                    &format!("block{}.conv{}", bi + 1, ci + 1),
                    in_ch,
                    width,
                    3,
                    1,
                    1,
                    true,
                ));
                in_ch = width;
            }
            blocks.push(convs);
            let pool = MaxPool2d::new(2, 2);
            side = pool.out_spatial(side);
            pools.push(pool);
            if side < layout.pool_out {
                return Err(CoreError::shape(format!(
                    "input {input_side} too small for conv stack"
                )));
            }
        }
        let flat = in_ch * layout.pool_out * layout.pool_out;
        let fc1 = Linear::new(
            "head.fc1",
            Param::new(
                "head.fc1.weight",
                init::fan_in_uniform(&mut rng, &[layout.hidden, flat], flat),
                true,
            ),
            Some(Param::new("head.fc1.bias", init::zeros(&[layout.hidden]), true)),
        );
        let fc2 = Linear::new(
            "head.fc2",
            Param::new(
                "head.fc2.weight",
                init::fan_in_uniform(&mut rng, &[1, layout.hidden], layout.hidden),
                true,
            ),
            Some(Param::new("head.fc2.bias", init::zeros(&[1]), true)),
        );
        Ok(VggStyle {
            config,
            input_side,
            init_seed: seed,
            blocks,
            pools,
            adaptive: AdaptiveAvgPool::new(layout.pool_out),
            fc1,
            relu1: Relu::new(),
            fc2,
            sigmoid: Sigmoid::new(),
            feat_shape: None,
        })
    }
}

impl<T: Elem> ParamSet<T> for VggStyle<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        for block in &self.blocks {
            for c in block {
                c.collect(&mut v);
            }
        }
        self.fc1.collect(&mut v);
        self.fc2.collect(&mut v);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        for block in &mut self.blocks {
            for c in block {
                c.collect_mut(&mut v);
            }
        }
        self.fc1.collect_mut(&mut v);
        self.fc2.collect_mut(&mut v);
        v
    }
}

impl<T: Elem> Model<T> for VggStyle<T> {
    fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<Array1<T>> {
        let mut x = images.clone();
        for (block, pool) in self.blocks.iter_mut().zip(&mut self.pools) {
            for c in block {
                x = c.forward(&x, mode);
            }
            x = pool.forward(&x, mode);
        }
        let x = self.adaptive.forward(&x, mode);
        let (b, c, h, w) = x.dim();
        self.feat_shape = Some((b, c, h, w));
        let flat = x.into_shape_with_order((b, c * h * w)).expect("contiguous");
        let z = self.relu1.forward(self.fc1.forward(&flat, mode).into_dyn().view(), mode);
        let z = z.into_dimensionality::<ndarray::Ix2>().unwrap();
        let y = self.sigmoid.forward(self.fc2.forward(&z, mode).into_dyn().view(), mode);
        Ok(y
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap()
            .index_axis(Axis(1), 0)
            .to_owned())
    }

    fn backward(&mut self, dpred: &Array1<T>) {
        let dy = dpred.view().insert_axis(Axis(1)).to_owned();
        let dz = self.sigmoid.backward(dy.into_dyn().view());
        let dz = self.fc2.backward(&dz.into_dimensionality::<ndarray::Ix2>().unwrap());
        let dz = self.relu1.backward(dz.into_dyn().view());
        let dflat = self.fc1.backward(&dz.into_dimensionality::<ndarray::Ix2>().unwrap());
        let shape = self.feat_shape.take().expect("backward without forward");
        let mut d = dflat.into_shape_with_order(shape).expect("contiguous");
        d = self.adaptive.backward(&d);
        for (block, pool) in self.blocks.iter_mut().zip(&mut self.pools).rev() {
            d = pool.backward(&d);
            for c in block.iter_mut().rev() {
                d = c.backward(&d);
            }
        }
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn arch_name(&self) -> &'static str {
        self.config.architecture.name()
    }

    fn input_side(&self) -> usize {
        self.input_side
    }

    fn init_seed(&self) -> u64 {
        self.init_seed
    }
}

/// Linear probe on the frozen backbone: every patch token plus the class
/// token, flattened into one feature vector, through a single sigmoid unit.
pub struct BackboneLinearHead<T> {
    config: ModelConfig,
    input_side: usize,
    init_seed: u64,
    backbone: Backbone<T>,
    fc: Linear<T>,
    sigmoid: Sigmoid<T>,
}

impl<T: Elem> BackboneLinearHead<T> {
    pub fn new(
        config: ModelConfig,
        geometry: &FusionGeometry,
        weights_dir: Option<&Path>,
        seed: u64,
    ) -> Result<Self> {
        let backbone = Backbone::build(
            config.backbone,
            geometry.input_side,
            geometry.patch_size,
            weights_dir,
            seed,
        )?;
        let grid = geometry.token_grid();
        let d = config.backbone.embed_dim;
        let width = grid * grid * d + d;
        let mut rng = hash::stream_rng(seed, "init");
        let fc = Linear::new(
            "head.fc",
            Param::new(
                "head.fc.weight",
                init::fan_in_uniform(&mut rng, &[1, width], width),
                true,
            ),
            Some(Param::new("head.fc.bias", init::zeros(&[1]), true)),
        );
        Ok(BackboneLinearHead {
            config,
            input_side: geometry.input_side,
            init_seed: seed,
            backbone,
            fc,
            sigmoid: Sigmoid::new(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.fc.in_dim()
    }
}

impl<T: Elem> ParamSet<T> for BackboneLinearHead<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        self.backbone.collect(&mut v);
        self.fc.collect(&mut v);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        self.backbone.collect_mut(&mut v);
        self.fc.collect_mut(&mut v);
        v
    }
}

impl<T: Elem> Model<T> for BackboneLinearHead<T> {
    fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<Array1<T>> {
        let out = self.backbone.extract(images)?;
        let (b, d, g, _) = out.tokens.dim();
        let flat = out
            .tokens
            .into_shape_with_order((b, d * g * g))
            .expect("contiguous");
        let x = concatenate(Axis(1), &[flat.view(), out.class_token.view()]).expect("concat");
        let z = self.fc.forward(&x, mode);
        let y = self.sigmoid.forward(z.into_dyn().view(), mode);
        Ok(y
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap()
            .index_axis(Axis(1), 0)
            .to_owned())
    }

    fn backward(&mut self, dpred: &Array1<T>) {
        let dy = dpred.view().insert_axis(Axis(1)).to_owned();
        let dz = self.sigmoid.backward(dy.into_dyn().view());
        // gradient stops at the frozen backbone; only the probe accumulates
        let _ = self.fc.backward(&dz.into_dimensionality::<ndarray::Ix2>().unwrap());
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn arch_name(&self) -> &'static str {
        self.config.architecture.name()
    }

    fn input_side(&self) -> usize {
        self.input_side
    }

    fn init_seed(&self) -> u64 {
        self.init_seed
    }
}

/// Fully trainable vision transformer regressing from its class token.
pub struct VitRegressor<T> {
    config: ModelConfig,
    input_side: usize,
    init_seed: u64,
    vit: VisionTransformer<T>,
    fc: Linear<T>,
    sigmoid: Sigmoid<T>,
    token_shape: Option<(usize, usize, usize, usize)>,
}

impl<T: Elem> VitRegressor<T> {
    pub fn new(
        config: ModelConfig,
        geometry: &FusionGeometry,
        weights_dir: Option<&Path>,
        seed: u64,
    ) -> Result<Self> {
        let spec = config.backbone;
        let mut rng = hash::stream_rng(seed, "init");
        let vit = match spec.kind {
            BackboneKind::TinyRandomFrozen => {
                let mut cfg = VitConfig::desk(spec.embed_dim);
                cfg.input_side = geometry.input_side;
                cfg.patch_size = geometry.patch_size;
                VisionTransformer::new(cfg, &mut rng, true)?
            }
            BackboneKind::PretrainedBase | BackboneKind::PretrainedLarge => {
                let path = backbone::weights_path(spec.kind, weights_dir)?;
                backbone::load_vit(&path, &spec, geometry.input_side, true)?
            }
        };
        let d = spec.embed_dim;
        let fc = Linear::new(
            "head.fc",
            Param::new(
                "head.fc.weight",
                init::fan_in_uniform(&mut rng, &[1, d], d),
                true,
            ),
            Some(Param::new("head.fc.bias", init::zeros(&[1]), true)),
        );
        Ok(VitRegressor {
            config,
            input_side: geometry.input_side,
            init_seed: seed,
            vit,
            fc,
            sigmoid: Sigmoid::new(),
            token_shape: None,
        })
    }
}

impl<T: Elem> ParamSet<T> for VitRegressor<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        self.vit.collect(&mut v);
        self.fc.collect(&mut v);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        self.vit.collect_mut(&mut v);
        self.fc.collect_mut(&mut v);
        v
    }
}

impl<T: Elem> Model<T> for VitRegressor<T> {
    fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<Array1<T>> {
        let out = self.vit.forward(images, mode)?;
        self.token_shape = Some(out.tokens.dim());
        let z = self.fc.forward(&out.class_token, mode);
        let y = self.sigmoid.forward(z.into_dyn().view(), mode);
        Ok(y
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap()
            .index_axis(Axis(1), 0)
            .to_owned())
    }

    fn backward(&mut self, dpred: &Array1<T>) {
        let dy = dpred.view().insert_axis(Axis(1)).to_owned();
        let dz = self.sigmoid.backward(dy.into_dyn().view());
        let dclass = self.fc.backward(&dz.into_dimensionality::<ndarray::Ix2>().unwrap());
        let shape = self.token_shape.take().expect("backward without forward");
        let dtokens = Array4::zeros(shape);
        self.vit.backward(&dtokens, &dclass);
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn arch_name(&self) -> &'static str {
        self.config.architecture.name()
    }

    fn input_side(&self) -> usize {
        self.input_side
    }

    fn init_seed(&self) -> u64 {
        self.init_seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::BackboneSpec;

    fn desk_config(arch: Architecture) -> ModelConfig {
        ModelConfig::baseline(arch, BackboneSpec::tiny(8), Profile::Desk)
    }

    fn image(b: usize, side: usize) -> Array4<f64> {
        Array4::from_shape_fn((b, 3, side, side), |(bi, c, i, j)| {
            ((bi * 3 + c) as f64 + (i * side + j) as f64 * 0.01).sin() * 0.5
        })
    }

    #[test]
    fn residual_cnn_runs_and_deep_variant_has_more_params() {
        let mut small =
            ResNetStyle::<f64>::new(desk_config(Architecture::Resnet50Style), 64, 7).unwrap();
        let deep =
            ResNetStyle::<f64>::new(desk_config(Architecture::Resnet152Style), 64, 7).unwrap();
        assert!(deep.param_count() > small.param_count());
        let y = small.forward(&image(2, 64), Mode::Eval).unwrap();
        assert_eq!(y.len(), 2);
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn residual_cnn_backward_reaches_stem() {
        let mut net =
            ResNetStyle::<f64>::new(desk_config(Architecture::Resnet50Style), 64, 3).unwrap();
        let y = net.forward(&image(2, 64), Mode::Train).unwrap();
        net.backward(&Array1::from_elem(y.len(), 1.0));
        let stem_grad = net
            .params()
            .iter()
            .any(|p| p.name() == "stem.conv.weight" && p.grad.is_some());
        assert!(stem_grad);
    }

    #[test]
    fn plain_cnn_runs_and_backward_reaches_first_conv() {
        let mut net = VggStyle::<f64>::new(desk_config(Architecture::Vgg19Style), 96, 5).unwrap();
        let y = net.forward(&image(2, 96), Mode::Train).unwrap();
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
        net.backward(&Array1::from_elem(2, 0.5));
        let first = net
            .params()
            .iter()
            .any(|p| p.name() == "block1.conv1.conv.weight" && p.grad.is_some());
        assert!(first);
    }

    #[test]
    fn linear_probe_has_exactly_one_trainable_weight_and_bias() {
        let geom = FusionGeometry::reduced();
        let config = desk_config(Architecture::BackboneLinearHead);
        let net = BackboneLinearHead::<f64>::new(config, &geom, None, 11).unwrap();
        let trainable: Vec<_> = net.params().into_iter().filter(|p| p.trainable).collect();
        assert_eq!(trainable.len(), 2);
        assert_eq!(trainable[0].name(), "head.fc.weight");
        assert_eq!(trainable[1].name(), "head.fc.bias");
        // 4x4 grid of 8-wide tokens plus the class token
        assert_eq!(net.input_width(), 4 * 4 * 8 + 8);
    }

    #[test]
    fn linear_probe_trains_only_the_probe() {
        let geom = FusionGeometry::reduced();
        let mut net =
            BackboneLinearHead::<f64>::new(desk_config(Architecture::BackboneLinearHead), &geom, None, 11)
                .unwrap();
        let _ = net.forward(&image(3, 8), Mode::Train).unwrap();
        net.backward(&Array1::from_elem(3, 1.0));
        for p in net.params() {
            if p.trainable {
                assert!(p.grad.is_some(), "{} missing grad", p.name());
            } else {
                assert!(p.grad.is_none(), "{} should stay frozen", p.name());
            }
        }
    }

    #[test]
    fn full_finetune_transformer_is_fully_trainable() {
        let geom = FusionGeometry::reduced();
        let mut net =
            VitRegressor::<f64>::new(desk_config(Architecture::VitFullFinetune), &geom, None, 13)
                .unwrap();
        assert!(net.params().iter().all(|p| p.trainable || p.buffer));
        assert_eq!(net.trainable_param_count(), net.param_count());
        let y = net.forward(&image(2, 8), Mode::Train).unwrap();
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
        net.backward(&Array1::from_elem(2, 1.0));
        let patch_grad = net
            .params()
            .iter()
            .any(|p| p.name() == "backbone.patch_embed.weight" && p.grad.is_some());
        assert!(patch_grad, "gradient must reach the patch embedding");
    }
}
