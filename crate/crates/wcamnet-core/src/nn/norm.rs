//! Batch and layer normalization with explicit backward passes.

use ndarray::{Array1, Array2, Array4, Axis};

use crate::elem::Elem;
use crate::nn::param::{Mode, Param};

/// Per-channel batch normalization over `(B, C, H, W)`.
///
/// Training uses batch statistics (biased variance, matching the usual
/// convention) and updates running estimates with `momentum`; eval uses the
/// running estimates.
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    pub momentum: T,
    pub eps: T,
    channels: usize,
    cache: Option<BnCache<T>>,
}

struct BnCache<T> {
    xhat: Array4<T>,
    inv_std: Array1<T>,
}

impl<T: Elem> BatchNorm2d<T> {
    pub fn new(name: &str, channels: usize, trainable: bool) -> Self {
        BatchNorm2d {
            gamma: Param::new(format!("{name}.weight"), Array1::ones(channels).into_dyn(), trainable),
            beta: Param::new(format!("{name}.bias"), Array1::zeros(channels).into_dyn(), trainable),
            running_mean: Param::new_buffer(format!("{name}.running_mean"), Array1::zeros(channels).into_dyn()),
            running_var: Param::new_buffer(format!("{name}.running_var"), Array1::ones(channels).into_dyn()),
            momentum: T::cast(0.1),
            eps: T::cast(1e-5),
            channels,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let (b, c, h, w) = x.dim();
        assert_eq!(c, self.channels, "bn {}: channels", self.gamma.name());
        let n = T::cast((b * h * w) as f64);
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = Array1::<T>::zeros(c);
                let mut var = Array1::<T>::zeros(c);
                for ci in 0..c {
                    let slice = x.index_axis(Axis(1), ci);
                    let m = slice.sum() / n;
                    let v = slice.mapv(|e| (e - m) * (e - m)).sum() / n;
                    mean[ci] = m;
                    var[ci] = v;
                }
                let one = T::one();
                let mom = self.momentum;
                // unbiased variance feeds the running estimate
                let count = (b * h * w) as f64;
                let unbias = T::cast(count / (count - 1.0).max(1.0));
                for ci in 0..c {
                    self.running_mean.value[ci] = (one - mom) * self.running_mean.value[ci] + mom * mean[ci];
                    self.running_var.value[ci] = (one - mom) * self.running_var.value[ci] + mom * var[ci] * unbias;
                }
                (mean, var)
            }
            Mode::Eval => {
                let rm = self.running_mean.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
                let rv = self.running_var.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
                (rm.to_owned(), rv.to_owned())
            }
        };
        let inv_std = var.mapv(|v| T::one() / (v + self.eps).sqrt());
        let mut xhat = x.clone();
        for ci in 0..c {
            let m = mean[ci];
            let s = inv_std[ci];
            xhat.index_axis_mut(Axis(1), ci).mapv_inplace(|e| (e - m) * s);
        }
        let mut y = xhat.clone();
        for ci in 0..c {
            let g = self.gamma.value[ci];
            let be = self.beta.value[ci];
            y.index_axis_mut(Axis(1), ci).mapv_inplace(|e| e * g + be);
        }
        self.cache = if mode == Mode::Train {
            Some(BnCache { xhat, inv_std })
        } else {
            None
        };
        y
    }

    pub fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let BnCache { xhat, inv_std } = self.cache.take().expect("bn backward without forward");
        let (b, c, h, w) = dy.dim();
        let n = T::cast((b * h * w) as f64);
        let mut dgamma = Array1::<T>::zeros(c);
        let mut dbeta = Array1::<T>::zeros(c);
        for ci in 0..c {
            let dyc = dy.index_axis(Axis(1), ci);
            let xc = xhat.index_axis(Axis(1), ci);
            dgamma[ci] = (&dyc * &xc).sum();
            dbeta[ci] = dyc.sum();
        }
        let mut dx = Array4::<T>::zeros(dy.raw_dim());
        for ci in 0..c {
            let g = self.gamma.value[ci];
            let s = inv_std[ci];
            let dyc = dy.index_axis(Axis(1), ci);
            let xc = xhat.index_axis(Axis(1), ci);
            let sum_dy = dbeta[ci];
            let sum_dy_xhat = dgamma[ci];
            let mut dxc = dx.index_axis_mut(Axis(1), ci);
            // dx = g*s/n * (n*dy - sum(dy) - xhat*sum(dy*xhat))
            azip_bn(&mut dxc, &dyc, &xc, g * s / n, n, sum_dy, sum_dy_xhat);
        }
        if self.gamma.trainable {
            self.gamma.add_grad(dgamma.into_dyn().view());
            self.beta.add_grad(dbeta.into_dyn().view());
        }
        dx
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.push(&self.gamma);
        out.push(&self.beta);
        out.push(&self.running_mean);
        out.push(&self.running_var);
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
        out.push(&mut self.running_mean);
        out.push(&mut self.running_var);
    }
}

fn azip_bn<T: Elem>(
    dx: &mut ndarray::ArrayViewMut3<'_, T>,
    dy: &ndarray::ArrayView3<'_, T>,
    xhat: &ndarray::ArrayView3<'_, T>,
    scale: T,
    n: T,
    sum_dy: T,
    sum_dy_xhat: T,
) {
    ndarray::Zip::from(dx).and(dy).and(xhat).for_each(|d, &dyv, &xh| {
        *d = scale * (n * dyv - sum_dy - xh * sum_dy_xhat);
    });
}

/// Layer normalization over the last axis of a `(N, D)` matrix.
pub struct LayerNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub eps: T,
    dim: usize,
    cache: Option<LnCache<T>>,
}

struct LnCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

impl<T: Elem> LayerNorm<T> {
    pub fn new(name: &str, dim: usize, trainable: bool) -> Self {
        LayerNorm {
            gamma: Param::new(format!("{name}.weight"), Array1::ones(dim).into_dyn(), trainable),
            beta: Param::new(format!("{name}.bias"), Array1::zeros(dim).into_dyn(), trainable),
            eps: T::cast(1e-6),
            dim,
            cache: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forward(&mut self, x: &Array2<T>, mode: Mode) -> Array2<T> {
        let (n, d) = x.dim();
        assert_eq!(d, self.dim, "ln {}: dim", self.gamma.name());
        let dt = T::cast(d as f64);
        let mut xhat = Array2::<T>::zeros((n, d));
        let mut inv_std = Array1::<T>::zeros(n);
        for i in 0..n {
            let row = x.row(i);
            let m = row.sum() / dt;
            let v = row.mapv(|e| (e - m) * (e - m)).sum() / dt;
            let s = T::one() / (v + self.eps).sqrt();
            inv_std[i] = s;
            let mut hr = xhat.row_mut(i);
            ndarray::Zip::from(&mut hr).and(&row).for_each(|h, &e| *h = (e - m) * s);
        }
        let mut y = xhat.clone();
        for i in 0..n {
            let mut row = y.row_mut(i);
            ndarray::Zip::from(&mut row)
                .and(&self.gamma.value.view().into_dimensionality::<ndarray::Ix1>().unwrap())
                .and(&self.beta.value.view().into_dimensionality::<ndarray::Ix1>().unwrap())
                .for_each(|yv, &g, &b| *yv = *yv * g + b);
        }
        self.cache = if mode == Mode::Train {
            Some(LnCache { xhat, inv_std })
        } else {
            None
        };
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let LnCache { xhat, inv_std } = self.cache.take().expect("ln backward without forward");
        let (n, d) = dy.dim();
        let dt = T::cast(d as f64);
        let gamma = self.gamma.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut dgamma = Array1::<T>::zeros(d);
        let mut dbeta = Array1::<T>::zeros(d);
        let mut dx = Array2::<T>::zeros((n, d));
        for i in 0..n {
            let dyr = dy.row(i);
            let xr = xhat.row(i);
            ndarray::Zip::from(&mut dgamma).and(&dyr).and(&xr).for_each(|dg, &dyv, &xh| {
                *dg += dyv * xh;
            });
            ndarray::Zip::from(&mut dbeta).and(&dyr).for_each(|db, &dyv| *db += dyv);
            // dxhat = dy * gamma; dx = s/d * (d*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
            let mut sum_dxhat = T::zero();
            let mut sum_dxhat_xhat = T::zero();
            for j in 0..d {
                let dxh = dyr[j] * gamma[j];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xr[j];
            }
            let s = inv_std[i];
            let mut dxr = dx.row_mut(i);
            for j in 0..d {
                let dxh = dyr[j] * gamma[j];
                dxr[j] = s / dt * (dt * dxh - sum_dxhat - xr[j] * sum_dxhat_xhat);
            }
        }
        if self.gamma.trainable {
            self.gamma.add_grad(dgamma.into_dyn().view());
            self.beta.add_grad(dbeta.into_dyn().view());
        }
        dx
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.push(&self.gamma);
        out.push(&self.beta);
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
    }
}
