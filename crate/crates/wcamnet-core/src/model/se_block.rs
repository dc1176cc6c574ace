//! Residual block with squeeze-and-excitation channel gating.
//!
//! residual = norm2(conv2(relu(norm1(conv1(x)))))
//! gate     = sigmoid(fc2(relu(fc1(global_avg_pool(residual)))))
//! output   = x + gate ⊙ residual
//!
//! The gating bottleneck shrinks channels by `reduction` (floor, minimum 1).

use ndarray::{Array2, Array4, Axis};
use rand_chacha::ChaCha8Rng;

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::nn::{init, BatchNorm2d, Conv2d, GlobalAvgPool, Linear, Mode, Param, Relu, Sigmoid};

pub struct SeResidualBlock<T> {
    conv1: Conv2d<T>,
    norm1: BatchNorm2d<T>,
    relu1: Relu<T>,
    conv2: Conv2d<T>,
    norm2: BatchNorm2d<T>,
    pool: GlobalAvgPool,
    fc1: Linear<T>,
    relu2: Relu<T>,
    fc2: Linear<T>,
    gate: Sigmoid<T>,
    channels: usize,
    squeeze: usize,
    cache: Option<SeCache<T>>,
}

struct SeCache<T> {
    residual: Array4<T>,
    gate: Array2<T>,
}

impl<T: Elem> SeResidualBlock<T> {
    pub fn new(channels: usize, reduction: usize, rng: &mut ChaCha8Rng, prefix: &str) -> Result<Self> {
        if channels == 0 {
            return Err(CoreError::config("SE block requires at least one channel"));
        }
        if reduction == 0 {
            return Err(CoreError::config("SE reduction must be positive"));
        }
        let squeeze = (channels / reduction).max(1);
        let conv = |rng: &mut ChaCha8Rng, name: String| {
            Conv2d::new(
                &name,
                Param::new(
                    format!("{name}.weight"),
                    init::fan_in_uniform(rng, &[channels, channels, 3, 3], channels * 9),
                    true,
                ),
                Some(Param::new(format!("{name}.bias"), init::zeros(&[channels]), true)),
                3,
                1,
                1,
            )
        };
        Ok(SeResidualBlock {
            conv1: conv(rng, format!("{prefix}.conv1")),
            norm1: BatchNorm2d::new(&format!("{prefix}.norm1"), channels, true),
            relu1: Relu::new(),
            conv2: conv(rng, format!("{prefix}.conv2")),
            norm2: BatchNorm2d::new(&format!("{prefix}.norm2"), channels, true),
            pool: GlobalAvgPool::new(),
            fc1: Linear::new(
                &format!("{prefix}.fc1"),
                Param::new(
                    format!("{prefix}.fc1.weight"),
                    init::fan_in_uniform(rng, &[squeeze, channels], channels),
                    true,
                ),
                Some(Param::new(format!("{prefix}.fc1.bias"), init::zeros(&[squeeze]), true)),
            ),
            relu2: Relu::new(),
            fc2: Linear::new(
                &format!("{prefix}.fc2"),
                Param::new(
                    format!("{prefix}.fc2.weight"),
                    init::fan_in_uniform(rng, &[channels, squeeze], squeeze),
                    true,
                ),
                Some(Param::new(format!("{prefix}.fc2.bias"), init::zeros(&[channels]), true)),
            ),
            gate: Sigmoid::new(),
            channels,
            squeeze,
            cache: None,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn squeeze_width(&self) -> usize {
        self.squeeze
    }

    /// Channel gate values for an input, for inspection: (B, C) in (0,1).
    pub fn gate_values(&mut self, x: &Array4<T>) -> Array2<T> {
        let r = self.residual_forward(x, Mode::Eval);
        self.gate_forward(&r, Mode::Eval)
    }

    fn residual_forward(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let r = self.conv1.forward(x, mode);
        let r = self.norm1.forward(&r, mode);
        let r = self.relu1.forward(r.into_dyn().view(), mode);
        let r = r.into_dimensionality::<ndarray::Ix4>().unwrap();
        let r = self.conv2.forward(&r, mode);
        self.norm2.forward(&r, mode)
    }

    fn gate_forward(&mut self, residual: &Array4<T>, mode: Mode) -> Array2<T> {
        let s = self.pool.forward(residual, mode);
        let s = self.fc1.forward(&s, mode);
        let s = self.relu2.forward(s.into_dyn().view(), mode);
        let s = s.into_dimensionality::<ndarray::Ix2>().unwrap();
        let s = self.fc2.forward(&s, mode);
        self.gate
            .forward(s.into_dyn().view(), mode)
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap()
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let (_, c, _h, _w) = x.dim();
        assert_eq!(c, self.channels, "SE block channel mismatch");
        let residual = self.residual_forward(x, mode);
        let gate = self.gate_forward(&residual, mode);
        let mut y = x.clone();
        for (bi, mut yb) in y.axis_iter_mut(Axis(0)).enumerate() {
            for ci in 0..c {
                let g = gate[[bi, ci]];
                let rb = residual.index_axis(Axis(0), bi);
                let rc = rb.index_axis(Axis(0), ci);
                let mut yc = yb.index_axis_mut(Axis(0), ci);
                ndarray::Zip::from(&mut yc).and(&rc).for_each(|yv, &rv| {
                    *yv += g * rv;
                });
            }
        }
        if mode == Mode::Train {
            self.cache = Some(SeCache {
                residual,
                gate,
            });
        } else {
            self.cache = None;
        }
        y
    }

    pub fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let SeCache { residual, gate } =
            self.cache.take().expect("SE backward without forward");
        let (b, c, _, _) = dy.dim();

        // d(gate) aggregates over spatial positions; d(residual) has a direct
        // path (scaled by the gate) plus the path through the gate MLP.
        let mut dgate = Array2::<T>::zeros((b, c));
        let mut dres_direct = Array4::<T>::zeros(dy.raw_dim());
        for bi in 0..b {
            for ci in 0..c {
                let dyc = dy.index_axis(Axis(0), bi);
                let dyc = dyc.index_axis(Axis(0), ci);
                let rc = residual.index_axis(Axis(0), bi);
                let rc = rc.index_axis(Axis(0), ci);
                dgate[[bi, ci]] = ndarray::Zip::from(&dyc).and(&rc).fold(T::zero(), |acc, &d, &r| acc + d * r);
                let g = gate[[bi, ci]];
                let mut dd = dres_direct.index_axis_mut(Axis(0), bi);
                let mut dd = dd.index_axis_mut(Axis(0), ci);
                ndarray::Zip::from(&mut dd).and(&dyc).for_each(|o, &d| *o = d * g);
            }
        }

        // gate MLP backward: sigmoid -> fc2 -> relu -> fc1 -> pool
        let ds = self.gate.backward(dgate.into_dyn().view());
        let ds = ds.into_dimensionality::<ndarray::Ix2>().unwrap();
        let ds = self.fc2.backward(&ds);
        let ds = self.relu2.backward(ds.into_dyn().view());
        let ds = ds.into_dimensionality::<ndarray::Ix2>().unwrap();
        let ds = self.fc1.backward(&ds);
        let dres_gate = self.pool.backward(&ds);

        let dres = &dres_direct + &dres_gate;

        // residual branch backward: norm2 -> conv2 -> relu -> norm1 -> conv1
        let dr = self.norm2.backward(&dres);
        let dr = self.conv2.backward(&dr);
        let dr = self.relu1.backward(dr.into_dyn().view());
        let dr = dr.into_dimensionality::<ndarray::Ix4>().unwrap();
        let dr = self.norm1.backward(&dr);
        let dx_res = self.conv1.backward(&dr);

        // skip connection
        dy + &dx_res
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.conv1.collect(out);
        self.norm1.collect(out);
        self.conv2.collect(out);
        self.norm2.collect(out);
        self.fc1.collect(out);
        self.fc2.collect(out);
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.conv1.collect_mut(out);
        self.norm1.collect_mut(out);
        self.conv2.collect_mut(out);
        self.norm2.collect_mut(out);
        self.fc1.collect_mut(out);
        self.fc2.collect_mut(out);
    }
}
