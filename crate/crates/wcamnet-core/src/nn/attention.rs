//! Multi-head self-attention over one token sequence `(N, D)`.
//!
//! Query/key/value projections are fused into one `(3D, D)` weight, matching
//! the layout used by common transformer checkpoints.

use ndarray::{s, Array2, Array3};

use crate::elem::Elem;
use crate::nn::param::{Mode, Param};

pub struct MultiHeadAttention<T> {
    pub qkv_weight: Param<T>, // (3D, D)
    pub qkv_bias: Param<T>,   // (3D,)
    pub proj_weight: Param<T>, // (D, D)
    pub proj_bias: Param<T>,   // (D,)
    pub heads: usize,
    dim: usize,
    caches: Vec<AttnCache<T>>,
}

struct AttnCache<T> {
    x: Array2<T>,
    q: Array3<T>, // (H, N, dh)
    k: Array3<T>,
    v: Array3<T>,
    attn: Array3<T>, // (H, N, N) post-softmax
    concat: Array2<T>,
}

impl<T: Elem> MultiHeadAttention<T> {
    pub fn new(
        qkv_weight: Param<T>,
        qkv_bias: Param<T>,
        proj_weight: Param<T>,
        proj_bias: Param<T>,
        heads: usize,
    ) -> Self {
        let dim = proj_weight.value.shape()[0];
        assert_eq!(qkv_weight.value.shape(), &[3 * dim, dim]);
        assert_eq!(dim % heads, 0, "embed dim must divide into heads");
        MultiHeadAttention {
            qkv_weight,
            qkv_bias,
            proj_weight,
            proj_bias,
            heads,
            dim,
            caches: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn split_heads(&self, m: &Array2<T>, n: usize) -> Array3<T> {
        let dh = self.dim / self.heads;
        let mut out = Array3::<T>::zeros((self.heads, n, dh));
        for h in 0..self.heads {
            out.slice_mut(s![h, .., ..])
                .assign(&m.slice(s![.., h * dh..(h + 1) * dh]));
        }
        out
    }

    fn merge_heads(&self, m: &Array3<T>, n: usize) -> Array2<T> {
        let dh = self.dim / self.heads;
        let mut out = Array2::<T>::zeros((n, self.dim));
        for h in 0..self.heads {
            out.slice_mut(s![.., h * dh..(h + 1) * dh])
                .assign(&m.slice(s![h, .., ..]));
        }
        out
    }

    pub fn forward(&mut self, x: &Array2<T>, mode: Mode) -> Array2<T> {
        let (n, d) = x.dim();
        assert_eq!(d, self.dim);
        let dh = d / self.heads;
        let scale = T::cast(1.0 / (dh as f64).sqrt());

        let wqkv = self.qkv_weight.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let bqkv = self.qkv_bias.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut qkv = x.dot(&wqkv.t());
        qkv += &bqkv;

        let q = self.split_heads(&qkv.slice(s![.., 0..d]).to_owned(), n);
        let k = self.split_heads(&qkv.slice(s![.., d..2 * d]).to_owned(), n);
        let v = self.split_heads(&qkv.slice(s![.., 2 * d..3 * d]).to_owned(), n);

        let mut attn = Array3::<T>::zeros((self.heads, n, n));
        let mut ctx = Array3::<T>::zeros((self.heads, n, dh));
        for h in 0..self.heads {
            let qh = q.slice(s![h, .., ..]);
            let kh = k.slice(s![h, .., ..]);
            let vh = v.slice(s![h, .., ..]);
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|e| e * scale);
            // row softmax, max-shifted for stability
            for mut row in scores.rows_mut() {
                let mx = row.iter().cloned().fold(T::neg_infinity(), T::max);
                row.mapv_inplace(|e| (e - mx).exp());
                let sum = row.sum();
                row.mapv_inplace(|e| e / sum);
            }
            ctx.slice_mut(s![h, .., ..]).assign(&scores.dot(&vh));
            attn.slice_mut(s![h, .., ..]).assign(&scores);
        }
        let concat = self.merge_heads(&ctx, n);
        let wp = self.proj_weight.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let bp = self.proj_bias.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut y = concat.dot(&wp.t());
        y += &bp;

        if mode == Mode::Train {
            self.caches.push(AttnCache {
                x: x.clone(),
                q,
                k,
                v,
                attn,
                concat,
            });
        }
        y
    }

    /// Backward for the most recent cached forward. With several cached
    /// forwards (one per batch sample), call in reverse forward order.
    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let AttnCache { x, q, k, v, attn, concat } =
            self.caches.pop().expect("attention backward without forward");
        let (n, d) = x.dim();
        let dh = d / self.heads;
        let scale = T::cast(1.0 / (dh as f64).sqrt());

        let dconcat = {
            let wp = self.proj_weight.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            dy.dot(&wp)
        };
        if self.proj_weight.trainable {
            let dwp = dy.t().dot(&concat);
            self.proj_weight.add_grad(dwp.into_dyn().view());
            let dbp = dy.sum_axis(ndarray::Axis(0));
            self.proj_bias.add_grad(dbp.into_dyn().view());
        }
        let dctx = self.split_heads(&dconcat, n);

        let mut dq = Array3::<T>::zeros((self.heads, n, dh));
        let mut dk = Array3::<T>::zeros((self.heads, n, dh));
        let mut dv = Array3::<T>::zeros((self.heads, n, dh));
        for h in 0..self.heads {
            let a = attn.slice(s![h, .., ..]);
            let dctx_h = dctx.slice(s![h, .., ..]);
            let vh = v.slice(s![h, .., ..]);
            let qh = q.slice(s![h, .., ..]);
            let kh = k.slice(s![h, .., ..]);
            dv.slice_mut(s![h, .., ..]).assign(&a.t().dot(&dctx_h));
            let dattn = dctx_h.dot(&vh.t());
            // softmax backward per row: ds = a * (dattn - sum(dattn*a))
            let mut ds = Array2::<T>::zeros((n, n));
            for i in 0..n {
                let ar = a.row(i);
                let dr = dattn.row(i);
                let dot = ndarray::Zip::from(&ar).and(&dr).fold(T::zero(), |acc, &av, &dv| acc + av * dv);
                let mut dsr = ds.row_mut(i);
                ndarray::Zip::from(&mut dsr).and(&ar).and(&dr).for_each(|o, &av, &dv| {
                    *o = av * (dv - dot);
                });
            }
            ds.mapv_inplace(|e| e * scale);
            dq.slice_mut(s![h, .., ..]).assign(&ds.dot(&kh));
            dk.slice_mut(s![h, .., ..]).assign(&ds.t().dot(&qh));
        }

        let mut dqkv = Array2::<T>::zeros((n, 3 * d));
        dqkv.slice_mut(s![.., 0..d]).assign(&self.merge_heads(&dq, n));
        dqkv.slice_mut(s![.., d..2 * d]).assign(&self.merge_heads(&dk, n));
        dqkv.slice_mut(s![.., 2 * d..3 * d]).assign(&self.merge_heads(&dv, n));

        let dx = {
            let wqkv = self.qkv_weight.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            dqkv.dot(&wqkv)
        };
        if self.qkv_weight.trainable {
            let dw = dqkv.t().dot(&x);
            self.qkv_weight.add_grad(dw.into_dyn().view());
            let db = dqkv.sum_axis(ndarray::Axis(0));
            self.qkv_bias.add_grad(db.into_dyn().view());
        }
        dx
    }

    pub fn clear_cache(&mut self) {
        self.caches.clear();
    }

    /// Forward over a batch of sequences `(B, N, D)`; caches one entry per
    /// sample in train mode.
    pub fn forward_batch(&mut self, x: &Array3<T>, mode: Mode) -> Array3<T> {
        let (b, n, d) = x.dim();
        let mut y = Array3::<T>::zeros((b, n, d));
        for bi in 0..b {
            let xb = x.index_axis(ndarray::Axis(0), bi).to_owned();
            y.index_axis_mut(ndarray::Axis(0), bi)
                .assign(&self.forward(&xb, mode));
        }
        y
    }

    /// Backward over a batch; consumes the per-sample caches in reverse.
    pub fn backward_batch(&mut self, dy: &Array3<T>) -> Array3<T> {
        let (b, n, d) = dy.dim();
        assert_eq!(self.caches.len(), b, "attention cache/batch mismatch");
        let mut dx = Array3::<T>::zeros((b, n, d));
        for bi in (0..b).rev() {
            let dyb = dy.index_axis(ndarray::Axis(0), bi).to_owned();
            dx.index_axis_mut(ndarray::Axis(0), bi)
                .assign(&self.backward(&dyb));
        }
        dx
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.push(&self.qkv_weight);
        out.push(&self.qkv_bias);
        out.push(&self.proj_weight);
        out.push(&self.proj_bias);
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.qkv_weight);
        out.push(&mut self.qkv_bias);
        out.push(&mut self.proj_weight);
        out.push(&mut self.proj_bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_attn(dim: usize, heads: usize, seed: u64) -> MultiHeadAttention<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MultiHeadAttention::new(
            Param::new("qkv.weight", init::fan_in_uniform(&mut rng, &[3 * dim, dim], dim), true),
            Param::new("qkv.bias", init::zeros(&[3 * dim]), true),
            Param::new("proj.weight", init::fan_in_uniform(&mut rng, &[dim, dim], dim), true),
            Param::new("proj.bias", init::zeros(&[dim]), true),
            heads,
        )
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut attn = tiny_attn(8, 2, 3);
        let x = Array2::from_shape_fn((5, 8), |(i, j)| ((i * 8 + j) as f64).sin());
        let _ = attn.forward(&x, Mode::Train);
        let cache = attn.caches.last().unwrap();
        for h in 0..2 {
            for i in 0..5 {
                let sum: f64 = cache.attn.slice(s![h, i, ..]).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_shape_preserved() {
        let mut attn = tiny_attn(8, 2, 4);
        let x = Array2::from_shape_fn((7, 8), |(i, j)| ((i + j) as f64) * 0.1);
        let y = attn.forward(&x, Mode::Eval);
        assert_eq!(y.dim(), (7, 8));
    }
}
