//! Spatial pooling layers.

use ndarray::{s, Array2, Array4};

use crate::elem::Elem;
use crate::nn::param::Mode;

/// Global average pool: `(B, C, H, W) -> (B, C)`.
pub struct GlobalAvgPool {
    spatial: Option<(usize, usize)>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool { spatial: None }
    }

    pub fn forward<T: Elem>(&mut self, x: &Array4<T>, mode: Mode) -> Array2<T> {
        let (b, c, h, w) = x.dim();
        let n = T::cast((h * w) as f64);
        let mut y = Array2::<T>::zeros((b, c));
        for bi in 0..b {
            for ci in 0..c {
                y[[bi, ci]] = x.slice(s![bi, ci, .., ..]).sum() / n;
            }
        }
        if mode == Mode::Train {
            self.spatial = Some((h, w));
        }
        y
    }

    pub fn backward<T: Elem>(&mut self, dy: &Array2<T>) -> Array4<T> {
        let (h, w) = self.spatial.take().expect("gap backward without forward");
        let (b, c) = dy.dim();
        let n = T::cast((h * w) as f64);
        let mut dx = Array4::<T>::zeros((b, c, h, w));
        for bi in 0..b {
            for ci in 0..c {
                let g = dy[[bi, ci]] / n;
                dx.slice_mut(s![bi, ci, .., ..]).fill(g);
            }
        }
        dx
    }
}

impl Default for GlobalAvgPool {
    fn default() -> Self {
        Self::new()
    }
}

/// Max pool with square kernel and equal stride.
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    argmax: Option<Vec<usize>>, // flat input index per output element
    in_shape: Option<(usize, usize, usize, usize)>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        MaxPool2d {
            kernel,
            stride,
            argmax: None,
            in_shape: None,
        }
    }

    pub fn out_spatial(&self, input: usize) -> usize {
        (input - self.kernel) / self.stride + 1
    }

    pub fn forward<T: Elem>(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let (b, c, h, w) = x.dim();
        let oh = self.out_spatial(h);
        let ow = self.out_spatial(w);
        let xs = x.as_slice().expect("standard layout");
        let mut y = Array4::<T>::zeros((b, c, oh, ow));
        let mut arg = vec![0usize; b * c * oh * ow];
        let ys = y.as_slice_mut().unwrap();
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = T::neg_infinity();
                        let mut best_idx = 0usize;
                        for ky in 0..self.kernel {
                            let iy = oy * self.stride + ky;
                            let row = base + iy * w + ox * self.stride;
                            for kx in 0..self.kernel {
                                let v = xs[row + kx];
                                if v > best {
                                    best = v;
                                    best_idx = row + kx;
                                }
                            }
                        }
                        let oidx = ((bi * c + ci) * oh + oy) * ow + ox;
                        ys[oidx] = best;
                        arg[oidx] = best_idx;
                    }
                }
            }
        }
        if mode == Mode::Train {
            self.argmax = Some(arg);
            self.in_shape = Some((b, c, h, w));
        }
        y
    }

    pub fn backward<T: Elem>(&mut self, dy: &Array4<T>) -> Array4<T> {
        let arg = self.argmax.take().expect("maxpool backward without forward");
        let shape = self.in_shape.take().unwrap();
        let mut dx = Array4::<T>::zeros(shape);
        let dxs = dx.as_slice_mut().unwrap();
        let dys = dy.as_slice().expect("standard layout");
        for (o, &src) in arg.iter().enumerate() {
            dxs[src] += dys[o];
        }
        dx
    }
}

/// Adaptive average pool to a fixed `(out, out)` grid: each output cell
/// averages the half-open input window `[floor(i*H/out), ceil((i+1)*H/out))`.
pub struct AdaptiveAvgPool {
    pub out: usize,
    in_shape: Option<(usize, usize, usize, usize)>,
}

impl AdaptiveAvgPool {
    pub fn new(out: usize) -> Self {
        AdaptiveAvgPool { out, in_shape: None }
    }

    fn window(&self, i: usize, input: usize) -> (usize, usize) {
        let lo = i * input / self.out;
        let hi = ((i + 1) * input).div_ceil(self.out);
        (lo, hi)
    }

    pub fn forward<T: Elem>(&mut self, x: &Array4<T>, mode: Mode) -> Array4<T> {
        let (b, c, h, w) = x.dim();
        let o = self.out;
        let mut y = Array4::<T>::zeros((b, c, o, o));
        for oy in 0..o {
            let (y0, y1) = self.window(oy, h);
            for ox in 0..o {
                let (x0, x1) = self.window(ox, w);
                let n = T::cast(((y1 - y0) * (x1 - x0)) as f64);
                for bi in 0..b {
                    for ci in 0..c {
                        y[[bi, ci, oy, ox]] =
                            x.slice(s![bi, ci, y0..y1, x0..x1]).sum() / n;
                    }
                }
            }
        }
        if mode == Mode::Train {
            self.in_shape = Some((b, c, h, w));
        }
        y
    }

    pub fn backward<T: Elem>(&mut self, dy: &Array4<T>) -> Array4<T> {
        let (b, c, h, w) = self.in_shape.take().expect("adaptive pool backward without forward");
        let o = self.out;
        let mut dx = Array4::<T>::zeros((b, c, h, w));
        for oy in 0..o {
            let (y0, y1) = self.window(oy, h);
            for ox in 0..o {
                let (x0, x1) = self.window(ox, w);
                let n = T::cast(((y1 - y0) * (x1 - x0)) as f64);
                for bi in 0..b {
                    for ci in 0..c {
                        let g = dy[[bi, ci, oy, ox]] / n;
                        dx.slice_mut(s![bi, ci, y0..y1, x0..x1]).mapv_inplace(|v| v + g);
                    }
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_averages_each_plane() {
        let x = Array4::from_shape_fn((1, 2, 2, 2), |(_, c, i, j)| (c * 4 + i * 2 + j) as f64);
        let mut gap = GlobalAvgPool::new();
        let y = gap.forward(&x, Mode::Eval);
        assert_eq!(y[[0, 0]], 1.5); // (0+1+2+3)/4
        assert_eq!(y[[0, 1]], 5.5); // (4+5+6+7)/4
    }

    #[test]
    fn maxpool_picks_max_and_routes_gradient() {
        let x = Array4::from_shape_vec(
            (1, 1, 2, 2),
            vec![1.0f64, 5.0, 3.0, 2.0],
        )
        .unwrap();
        let mut mp = MaxPool2d::new(2, 2);
        let y = mp.forward(&x, Mode::Train);
        assert_eq!(y[[0, 0, 0, 0]], 5.0);
        let dy = Array4::from_elem((1, 1, 1, 1), 1.0f64);
        let dx = mp.backward(&dy);
        assert_eq!(dx.as_slice().unwrap(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn adaptive_pool_covers_all_input() {
        // 5 -> 2: windows [0,3) and [2,5) per torch convention
        let p = AdaptiveAvgPool::new(2);
        assert_eq!(p.window(0, 5), (0, 3));
        assert_eq!(p.window(1, 5), (2, 5));
    }
}
