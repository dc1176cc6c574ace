//! High-definition branch: three strided conv/norm/relu layers taking the
//! full-resolution image down to the backbone's token grid, preserving
//! fine texture detail the patch embedding washes out.

use ndarray::Array4;
use rand_chacha::ChaCha8Rng;

use crate::elem::Elem;
use crate::error::Result;
use crate::model::config::FusionGeometry;
use crate::nn::{init, BatchNorm2d, Conv2d, Mode, Param, Relu};

pub struct HdBranch<T> {
    convs: Vec<Conv2d<T>>,
    norms: Vec<BatchNorm2d<T>>,
    relus: Vec<Relu<T>>,
    out_channels: usize,
    out_side: usize,
}

impl<T: Elem> HdBranch<T> {
    pub fn new(geometry: &FusionGeometry, rng: &mut ChaCha8Rng, prefix: &str) -> Result<Self> {
        geometry.validate()?;
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut relus = Vec::new();
        let mut in_ch = 3;
        let mut side = geometry.input_side;
        for (i, layer) in geometry.hd_layers.iter().enumerate() {
            let name = format!("{prefix}.conv{}", i + 1);
            convs.push(Conv2d::new(
                &name,
                Param::new(
                    format!("{name}.weight"),
                    init::fan_in_uniform(
                        rng,
                        &[layer.out_channels, in_ch, layer.kernel, layer.kernel],
                        in_ch * layer.kernel * layer.kernel,
                    ),
                    true,
                ),
                Some(Param::new(format!("{name}.bias"), init::zeros(&[layer.out_channels]), true)),
                layer.kernel,
                layer.stride,
                layer.pad,
            ));
            norms.push(BatchNorm2d::new(&format!("{prefix}.norm{}", i + 1), layer.out_channels, true));
            relus.push(Relu::new());
            side = crate::nn::conv_out_dim(side, layer.kernel, layer.stride, layer.pad);
            in_ch = layer.out_channels;
        }
        Ok(HdBranch {
            convs,
            norms,
            relus,
            out_channels: in_ch,
            out_side: side,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn out_side(&self) -> usize {
        self.out_side
    }

    pub fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Array4<T> {
        let mut x = images.clone();
        for i in 0..self.convs.len() {
            x = self.convs[i].forward(&x, mode);
            x = self.norms[i].forward(&x, mode);
            x = self.relus[i]
                .forward(x.into_dyn().view(), mode)
                .into_dimensionality::<ndarray::Ix4>()
                .unwrap();
        }
        x
    }

    pub fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let mut d = dy.clone();
        for i in (0..self.convs.len()).rev() {
            let dd = self.relus[i].backward(d.into_dyn().view());
            d = dd.into_dimensionality::<ndarray::Ix4>().unwrap();
            d = self.norms[i].backward(&d);
            d = self.convs[i].backward(&d);
        }
        d
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        for i in 0..self.convs.len() {
            self.convs[i].collect(out);
            self.norms[i].collect(out);
        }
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        // interleave conv and norm params in layer order
        for (conv, norm) in self.convs.iter_mut().zip(self.norms.iter_mut()) {
            conv.collect_mut(out);
            norm.collect_mut(out);
        }
    }

    /// Learnable parameter count by closed form:
    /// sum over layers of (C_out·C_in·k² + C_out) + 2·C_out for the norm.
    pub fn expected_param_count(geometry: &FusionGeometry) -> usize {
        let mut total = 0;
        let mut in_ch = 3;
        for layer in &geometry.hd_layers {
            total += layer.out_channels * in_ch * layer.kernel * layer.kernel; // weights
            total += layer.out_channels; // bias
            total += 2 * layer.out_channels; // norm gamma + beta
            in_ch = layer.out_channels;
        }
        total
    }
}
