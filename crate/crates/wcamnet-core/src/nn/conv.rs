//! 2D convolution via im2col + GEMM.
//!
//! The column matrix is laid out `(C*K*K, OH*OW)` so the forward pass is a
//! single `(Cout, CKK) x (CKK, OHOW)` product with no transposes. The batch
//! dimension is processed per-sample; weight gradients are reduced over
//! samples in index order, so results are bitwise identical regardless of
//! worker count.

use ndarray::{s, Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};
use rayon::prelude::*;

use crate::elem::Elem;
use crate::nn::param::{Mode, Param};

pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Unfold `(C, H, W)` into `(C*K*K, OH*OW)` columns. Out-of-bounds taps
/// (padding) stay zero.
pub fn im2col<T: Elem>(x: ArrayView3<'_, T>, kernel: usize, stride: usize, pad: usize) -> Array2<T> {
    let (c, h, w) = x.dim();
    let oh = conv_out_dim(h, kernel, stride, pad);
    let ow = conv_out_dim(w, kernel, stride, pad);
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut col = Array2::<T>::zeros((c * kernel * kernel, oh * ow));
    let cols = col.as_slice_mut().expect("standard layout");
    let n = oh * ow;
    for ci in 0..c {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = (ci * kernel + ky) * kernel + kx;
                let dst_base = row * n;
                // valid output ranges where the tap lands inside the image
                let oy_lo = oy_range_lo(ky, pad, stride);
                let oy_hi = oy_range_hi(ky, pad, stride, h, oh);
                let ox_lo = oy_range_lo(kx, pad, stride);
                let ox_hi = oy_range_hi(kx, pad, stride, w, ow);
                for oy in oy_lo..oy_hi {
                    let iy = oy * stride + ky - pad;
                    let src_base = (ci * h + iy) * w;
                    let dst_row = dst_base + oy * ow;
                    if stride == 1 {
                        let ix0 = ox_lo + kx - pad;
                        let len = ox_hi - ox_lo;
                        cols[dst_row + ox_lo..dst_row + ox_lo + len]
                            .copy_from_slice(&xs[src_base + ix0..src_base + ix0 + len]);
                    } else {
                        for ox in ox_lo..ox_hi {
                            let ix = ox * stride + kx - pad;
                            cols[dst_row + ox] = xs[src_base + ix];
                        }
                    }
                }
            }
        }
    }
    col
}

fn oy_range_lo(k: usize, pad: usize, stride: usize) -> usize {
    if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    }
}

fn oy_range_hi(k: usize, pad: usize, stride: usize, input: usize, out: usize) -> usize {
    // largest oy with oy*stride + k - pad <= input - 1
    let limit = input + pad;
    if k >= limit {
        return 0;
    }
    ((limit - 1 - k) / stride + 1).min(out)
}

/// Fold `(C*K*K, OH*OW)` columns back into `(C, H, W)`, accumulating
/// overlapping taps.
pub fn col2im<T: Elem>(
    col: ArrayView2<'_, T>,
    shape: (usize, usize, usize),
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Array3<T> {
    let (c, h, w) = shape;
    let oh = conv_out_dim(h, kernel, stride, pad);
    let ow = conv_out_dim(w, kernel, stride, pad);
    let col = col.as_standard_layout();
    let cs = col.as_slice().expect("standard layout");
    let mut x = Array3::<T>::zeros((c, h, w));
    let xs = x.as_slice_mut().expect("standard layout");
    let n = oh * ow;
    for ci in 0..c {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = (ci * kernel + ky) * kernel + kx;
                let src_base = row * n;
                let oy_lo = oy_range_lo(ky, pad, stride);
                let oy_hi = oy_range_hi(ky, pad, stride, h, oh);
                let ox_lo = oy_range_lo(kx, pad, stride);
                let ox_hi = oy_range_hi(kx, pad, stride, w, ow);
                for oy in oy_lo..oy_hi {
                    let iy = oy * stride + ky - pad;
                    let dst_base = (ci * h + iy) * w;
                    let src_row = src_base + oy * ow;
                    for ox in ox_lo..ox_hi {
                        let ix = ox * stride + kx - pad;
                        xs[dst_base + ix] += cs[src_row + ox];
                    }
                }
            }
        }
    }
    x
}

/// 2D convolution layer.
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    in_channels: usize,
    out_channels: usize,
    cache: Option<Array4<T>>,
}

impl<T: Elem> Conv2d<T> {
    pub fn new(
        name: &str,
        weight: Param<T>,
        bias: Option<Param<T>>,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let shape = weight.value.shape().to_vec();
        assert_eq!(shape.len(), 4, "conv weight must be 4-d: {name}");
        assert_eq!(shape[2], kernel);
        assert_eq!(shape[3], kernel);
        Conv2d {
            in_channels: shape[1],
            out_channels: shape[0],
            weight,
            bias,
            kernel,
            stride,
            pad,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn out_spatial(&self, input: usize) -> usize {
        conv_out_dim(input, self.kernel, self.stride, self.pad)
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let (b, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "conv {}: input channels", self.weight.name());
        let oh = self.out_spatial(h);
        let ow = self.out_spatial(w);
        let ckk = self.in_channels * self.kernel * self.kernel;
        let w2 = self
            .weight
            .value
            .view()
            .into_shape_with_order((self.out_channels, ckk))
            .expect("weight reshape");
        let bias = self.bias.as_ref().map(|p| p.value.view());
        let mut y = Array4::<T>::zeros((b, self.out_channels, oh, ow));
        y.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(x.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut yb, xb)| {
                let col = im2col(xb, self.kernel, self.stride, self.pad);
                let y2 = w2.dot(&col);
                let mut y3 = y2.into_shape_with_order((self.out_channels, oh, ow)).unwrap();
                if let Some(bv) = &bias {
                    for (mut plane, bc) in y3.axis_iter_mut(Axis(0)).zip(bv.iter()) {
                        plane += *bc;
                    }
                }
                yb.assign(&y3);
            });
        self.cache = if mode == Mode::Train { Some(x.clone()) } else { None };
        y
    }

    pub fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let x = self.cache.take().expect("conv backward without forward");
        let (b, _c, h, w) = x.dim();
        let (_, oc, oh, ow) = dy.dim();
        assert_eq!(oc, self.out_channels);
        let ckk = self.in_channels * self.kernel * self.kernel;
        let w2 = self
            .weight
            .value
            .view()
            .into_shape_with_order((self.out_channels, ckk))
            .expect("weight reshape");
        let want_wgrad = self.weight.trainable;

        let mut dx = Array4::<T>::zeros(x.raw_dim());
        // per-sample weight-gradient contributions, reduced in sample order below
        let per_sample: Vec<Option<Array2<T>>> = dx
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(x.axis_iter(Axis(0)).into_par_iter())
            .zip(dy.axis_iter(Axis(0)).into_par_iter())
            .map(|((mut dxb, xb), dyb)| {
                let dy2 = dyb.into_shape_with_order((self.out_channels, oh * ow)).unwrap();
                let dcol = w2.t().dot(&dy2);
                let dxi = col2im(
                    dcol.view(),
                    (self.in_channels, h, w),
                    self.kernel,
                    self.stride,
                    self.pad,
                );
                dxb.assign(&dxi);
                if want_wgrad {
                    let col = im2col(xb, self.kernel, self.stride, self.pad);
                    Some(dy2.dot(&col.t()))
                } else {
                    None
                }
            })
            .collect();

        if want_wgrad {
            let mut dw = Array2::<T>::zeros((self.out_channels, ckk));
            for g in per_sample.into_iter().flatten() {
                dw += &g;
            }
            self.weight.add_grad(dw.into_dyn().view());
        }
        if let Some(bias) = &mut self.bias {
            if bias.trainable {
                let mut db = ndarray::Array1::<T>::zeros(self.out_channels);
                for bi in 0..b {
                    for c in 0..self.out_channels {
                        db[c] += dy.slice(s![bi, c, .., ..]).sum();
                    }
                }
                bias.add_grad(db.into_dyn().view());
            }
        }
        dx
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.push(&self.weight);
        if let Some(b) = &self.bias {
            out.push(b);
        }
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.weight);
        if let Some(b) = &mut self.bias {
            out.push(b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn out_dim_matches_hand_computation() {
        assert_eq!(conv_out_dim(602, 7, 7, 0), 86);
        assert_eq!(conv_out_dim(86, 3, 2, 1), 43);
        assert_eq!(conv_out_dim(43, 3, 1, 1), 43);
        assert_eq!(conv_out_dim(602, 14, 14, 0), 43);
    }

    #[test]
    fn im2col_col2im_adjoint() {
        // <im2col(x), c> == <x, col2im(c)> for random x, c — the pair is an
        // adjoint, which is exactly what backward relies on.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = Array3::<f64>::from_shape_fn((3, 9, 9), |_| rng.random_range(-1.0..1.0));
        let col = im2col(x.view(), 3, 2, 1);
        let c = Array2::<f64>::from_shape_fn(col.raw_dim(), |_| rng.random_range(-1.0..1.0));
        let lhs: f64 = (&col * &c).sum();
        let folded = col2im(c.view(), (3, 9, 9), 3, 2, 1);
        let rhs: f64 = (&x * &folded).sum();
        assert!((lhs - rhs).abs() < 1e-10, "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn conv_identity_kernel_passthrough() {
        // 1x1 identity kernel reproduces the input
        let w = ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[1, 1, 1, 1]), vec![1.0f64]).unwrap();
        let mut conv = Conv2d::new(
            "t",
            Param::new("t.weight", w, true),
            Some(Param::new("t.bias", Array1::zeros(1).into_dyn(), true)),
            1,
            1,
            0,
        );
        let x = Array4::from_shape_fn((2, 1, 4, 4), |(b, _, i, j)| (b * 100 + i * 4 + j) as f64);
        let y = conv.forward(&x, Mode::Eval);
        assert_eq!(y, x);
    }
}
