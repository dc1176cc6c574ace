//! Vision transformer: patch embedding, class token, learned position
//! embeddings, pre-norm attention/MLP blocks with per-channel residual
//! scaling, and a final layer norm.
//!
//! The same implementation serves as the frozen feature backbone (weights
//! loaded from a checkpoint) and as the fully trainable baseline.

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::nn::{init, Conv2d, Gelu, LayerNorm, Linear, Mode, MultiHeadAttention, Param};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitConfig {
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub patch_size: usize,
    pub input_side: usize,
    /// Initial value of the per-channel residual scales. Pretrained
    /// checkpoints carry their own values; 1.0 keeps signal flowing when
    /// training from random initialization.
    pub residual_scale_init: f64,
}

impl VitConfig {
    pub fn base() -> Self {
        VitConfig {
            embed_dim: 768,
            depth: 12,
            heads: 12,
            mlp_ratio: 4,
            patch_size: 14,
            input_side: 602,
            residual_scale_init: 1e-5,
        }
    }

    pub fn large() -> Self {
        VitConfig {
            embed_dim: 1024,
            depth: 24,
            heads: 16,
            mlp_ratio: 4,
            patch_size: 14,
            input_side: 602,
            residual_scale_init: 1e-5,
        }
    }

    /// Small trainable transformer for desk-scale runs.
    pub fn desk(embed_dim: usize) -> Self {
        VitConfig {
            embed_dim,
            depth: 1,
            heads: 2,
            mlp_ratio: 4,
            patch_size: 14,
            input_side: 602,
            residual_scale_init: 1.0,
        }
    }

    pub fn grid(&self) -> usize {
        self.input_side / self.patch_size
    }

    pub fn tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.input_side.is_multiple_of(self.patch_size) {
            return Err(CoreError::config(format!(
                "input {} not divisible by patch {}",
                self.input_side, self.patch_size
            )));
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return Err(CoreError::config("embed_dim must divide into heads"));
        }
        Ok(())
    }
}

/// Per-channel residual scaling: `y = x * scale`.
struct ResidualScale<T> {
    scale: Param<T>,
    cache: Option<Array2<T>>,
}

impl<T: Elem> ResidualScale<T> {
    fn new(name: &str, dim: usize, init_val: f64, trainable: bool) -> Self {
        ResidualScale {
            scale: Param::new(name, Array1::from_elem(dim, T::cast(init_val)).into_dyn(), trainable),
            cache: None,
        }
    }

    fn forward(&mut self, x: &Array2<T>, mode: Mode) -> Array2<T> {
        let sv = self.scale.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let y = x * &sv;
        self.cache = if mode == Mode::Train { Some(x.clone()) } else { None };
        y
    }

    fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let x = self.cache.take().expect("residual scale backward without forward");
        if self.scale.trainable {
            let dscale = (dy * &x).sum_axis(Axis(0));
            self.scale.add_grad(dscale.into_dyn().view());
        }
        let sv = self.scale.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        dy * &sv
    }
}

struct Block<T> {
    ln1: LayerNorm<T>,
    attn: MultiHeadAttention<T>,
    scale1: ResidualScale<T>,
    ln2: LayerNorm<T>,
    fc1: Linear<T>,
    act: Gelu<T>,
    fc2: Linear<T>,
    scale2: ResidualScale<T>,
}

impl<T: Elem> Block<T> {
    fn new(prefix: &str, cfg: &VitConfig, rng: &mut ChaCha8Rng, trainable: bool) -> Self {
        let d = cfg.embed_dim;
        let hidden = d * cfg.mlp_ratio;
        Block {
            ln1: LayerNorm::new(&format!("{prefix}.norm1"), d, trainable),
            attn: MultiHeadAttention::new(
                Param::new(
                    format!("{prefix}.attn.qkv.weight"),
                    init::fan_in_uniform(rng, &[3 * d, d], d),
                    trainable,
                ),
                Param::new(format!("{prefix}.attn.qkv.bias"), init::zeros(&[3 * d]), trainable),
                Param::new(
                    format!("{prefix}.attn.proj.weight"),
                    init::fan_in_uniform(rng, &[d, d], d),
                    trainable,
                ),
                Param::new(format!("{prefix}.attn.proj.bias"), init::zeros(&[d]), trainable),
                cfg.heads,
            ),
            scale1: ResidualScale::new(&format!("{prefix}.scale1"), d, cfg.residual_scale_init, trainable),
            ln2: LayerNorm::new(&format!("{prefix}.norm2"), d, trainable),
            fc1: Linear::new(
                &format!("{prefix}.mlp.fc1"),
                Param::new(
                    format!("{prefix}.mlp.fc1.weight"),
                    init::fan_in_uniform(rng, &[hidden, d], d),
                    trainable,
                ),
                Some(Param::new(format!("{prefix}.mlp.fc1.bias"), init::zeros(&[hidden]), trainable)),
            ),
            act: Gelu::new(),
            fc2: Linear::new(
                &format!("{prefix}.mlp.fc2"),
                Param::new(
                    format!("{prefix}.mlp.fc2.weight"),
                    init::fan_in_uniform(rng, &[d, hidden], hidden),
                    trainable,
                ),
                Some(Param::new(format!("{prefix}.mlp.fc2.bias"), init::zeros(&[d]), trainable)),
            ),
            scale2: ResidualScale::new(&format!("{prefix}.scale2"), d, cfg.residual_scale_init, trainable),
        }
    }

    /// x: (B, N, D)
    fn forward(&mut self, x: &Array3<T>, mode: Mode) -> Array3<T> {
        let (b, n, d) = x.dim();
        let flat = |a: &Array3<T>| -> Array2<T> {
            a.to_shape((b * n, d)).unwrap().to_owned()
        };
        let unflat = |a: Array2<T>| -> Array3<T> {
            a.into_shape_with_order((b, n, d)).unwrap()
        };

        let h = self.ln1.forward(&flat(x), mode);
        let a = self.attn.forward_batch(&unflat(h), mode);
        let a = self.scale1.forward(&flat(&a), mode);
        let x_mid = x + &unflat(a);

        let h2 = self.ln2.forward(&flat(&x_mid), mode);
        let z = self.fc1.forward(&h2, mode);
        let z = self.act.forward(z.into_dyn().view(), mode);
        let z = z.into_dimensionality::<ndarray::Ix2>().unwrap();
        let m = self.fc2.forward(&z, mode);
        let m = self.scale2.forward(&m, mode);
        &x_mid + &unflat(m)
    }

    fn backward(&mut self, dy: &Array3<T>) -> Array3<T> {
        let (b, n, d) = dy.dim();
        let flat = |a: &Array3<T>| -> Array2<T> {
            a.to_shape((b * n, d)).unwrap().to_owned()
        };
        let unflat = |a: Array2<T>| -> Array3<T> {
            a.into_shape_with_order((b, n, d)).unwrap()
        };

        // x_out = x_mid + scale2(fc2(gelu(fc1(ln2(x_mid)))))
        let dm = self.scale2.backward(&flat(dy));
        let dz = self.fc2.backward(&dm);
        let dz = self.act.backward(dz.into_dyn().view());
        let dz = dz.into_dimensionality::<ndarray::Ix2>().unwrap();
        let dh2 = self.fc1.backward(&dz);
        let dx_mid_mlp = self.ln2.backward(&dh2);
        let dx_mid = dy + &unflat(dx_mid_mlp);

        // x_mid = x + scale1(attn(ln1(x)))
        let da = self.scale1.backward(&flat(&dx_mid));
        let dh = self.attn.backward_batch(&unflat(da));
        let dx_attn = self.ln1.backward(&flat(&dh));
        &dx_mid + &unflat(dx_attn)
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.ln1.collect(out);
        self.attn.collect(out);
        out.push(&self.scale1.scale);
        self.ln2.collect(out);
        self.fc1.collect(out);
        self.fc2.collect(out);
        out.push(&self.scale2.scale);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.ln1.collect_mut(out);
        self.attn.collect_mut(out);
        out.push(&mut self.scale1.scale);
        self.ln2.collect_mut(out);
        self.fc1.collect_mut(out);
        self.fc2.collect_mut(out);
        out.push(&mut self.scale2.scale);
    }
}

/// Backbone output: spatial patch-token grid plus the global class token.
pub struct TokenOutput<T> {
    /// (B, D, G, G), row-major reshape of the final patch-token sequence.
    pub tokens: Array4<T>,
    /// (B, D).
    pub class_token: Array2<T>,
}

pub struct VisionTransformer<T> {
    pub config: VitConfig,
    patch_embed: Conv2d<T>,
    cls_token: Param<T>, // (1, D)
    pos_embed: Param<T>, // (N+1, D)
    blocks: Vec<Block<T>>,
    norm: LayerNorm<T>,
    trainable: bool,
}

impl<T: Elem> VisionTransformer<T> {
    pub fn new(config: VitConfig, rng: &mut ChaCha8Rng, trainable: bool) -> Result<Self> {
        config.validate()?;
        let d = config.embed_dim;
        let p = config.patch_size;
        let n = config.tokens();
        let patch_embed = Conv2d::new(
            "backbone.patch_embed",
            Param::new(
                "backbone.patch_embed.weight",
                init::fan_in_uniform(rng, &[d, 3, p, p], 3 * p * p),
                trainable,
            ),
            Some(Param::new("backbone.patch_embed.bias", init::zeros(&[d]), trainable)),
            p,
            p,
            0,
        );
        let cls_token = Param::new("backbone.cls_token", init::fan_in_uniform(rng, &[1, d], d), trainable);
        let pos_embed = Param::new(
            "backbone.pos_embed",
            init::fan_in_uniform(rng, &[n + 1, d], d),
            trainable,
        );
        let blocks = (0..config.depth)
            .map(|i| Block::new(&format!("backbone.blocks.{i}"), &config, rng, trainable))
            .collect();
        let norm = LayerNorm::new("backbone.norm", d, trainable);
        Ok(VisionTransformer {
            config,
            patch_embed,
            cls_token,
            pos_embed,
            blocks,
            norm,
            trainable,
        })
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    /// (B, 3, S, S) -> tokens (B, D, G, G) + class token (B, D).
    pub fn forward(&mut self, images: &Array4<T>, mode: Mode) -> Result<TokenOutput<T>> {
        let (b, c, h, w) = images.dim();
        let side = self.config.input_side;
        if c != 3 || h != side || w != side {
            return Err(CoreError::shape(format!(
                "backbone expects (B, 3, {side}, {side}), got ({b}, {c}, {h}, {w})"
            )));
        }
        let d = self.config.embed_dim;
        let g = self.config.grid();
        let n = g * g;

        let grid = self.patch_embed.forward(images, mode); // (B, D, G, G)
        // sequence layout: row 0 = cls, rows 1.. = patches in row-major grid order
        let mut seq = Array3::<T>::zeros((b, n + 1, d));
        for bi in 0..b {
            for di in 0..d {
                for gy in 0..g {
                    for gx in 0..g {
                        seq[[bi, 1 + gy * g + gx, di]] = grid[[bi, di, gy, gx]];
                    }
                }
            }
        }
        let cls = self.cls_token.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let pos = self.pos_embed.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        for bi in 0..b {
            let mut row = seq.slice_mut(s![bi, 0, ..]);
            row.assign(&cls.row(0));
            let mut sb = seq.slice_mut(s![bi, .., ..]);
            sb += &pos;
        }

        let mut x = seq;
        for blk in &mut self.blocks {
            x = blk.forward(&x, mode);
        }
        let flat = x.to_shape((b * (n + 1), d)).unwrap().to_owned();
        let normed = self.norm.forward(&flat, mode);
        let normed = normed.into_shape_with_order((b, n + 1, d)).unwrap();

        let mut tokens = Array4::<T>::zeros((b, d, g, g));
        let mut class_token = Array2::<T>::zeros((b, d));
        for bi in 0..b {
            class_token.row_mut(bi).assign(&normed.slice(s![bi, 0, ..]));
            for di in 0..d {
                for gy in 0..g {
                    for gx in 0..g {
                        tokens[[bi, di, gy, gx]] = normed[[bi, 1 + gy * g + gx, di]];
                    }
                }
            }
        }
        Ok(TokenOutput { tokens, class_token })
    }

    /// Accumulate gradients given upstream gradients for both outputs.
    pub fn backward(&mut self, dtokens: &Array4<T>, dclass: &Array2<T>) {
        let (b, d, g, _) = dtokens.dim();
        let n = g * g;
        let mut dnormed = Array3::<T>::zeros((b, n + 1, d));
        for bi in 0..b {
            dnormed.slice_mut(s![bi, 0, ..]).assign(&dclass.row(bi));
            for di in 0..d {
                for gy in 0..g {
                    for gx in 0..g {
                        dnormed[[bi, 1 + gy * g + gx, di]] = dtokens[[bi, di, gy, gx]];
                    }
                }
            }
        }
        let flat = dnormed.to_shape((b * (n + 1), d)).unwrap().to_owned();
        let dx = self.norm.backward(&flat);
        let mut dx = dx.into_shape_with_order((b, n + 1, d)).unwrap();
        for blk in self.blocks.iter_mut().rev() {
            dx = blk.backward(&dx);
        }
        // position embedding: added to every sample's sequence
        if self.pos_embed.trainable {
            let dpos = dx.sum_axis(Axis(0));
            self.pos_embed.add_grad(dpos.into_dyn().view());
        }
        if self.cls_token.trainable {
            let dcls = dx.slice(s![.., 0, ..]).sum_axis(Axis(0)).insert_axis(Axis(0));
            self.cls_token.add_grad(dcls.into_dyn().view());
        }
        // patch gradient back through the embedding conv
        let mut dgrid = Array4::<T>::zeros((b, d, g, g));
        for bi in 0..b {
            for di in 0..d {
                for gy in 0..g {
                    for gx in 0..g {
                        dgrid[[bi, di, gy, gx]] = dx[[bi, 1 + gy * g + gx, di]];
                    }
                }
            }
        }
        let _ = self.patch_embed.backward(&dgrid);
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.patch_embed.collect(out);
        out.push(&self.cls_token);
        out.push(&self.pos_embed);
        for blk in &self.blocks {
            blk.collect(out);
        }
        self.norm.collect(out);
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.patch_embed.collect_mut(out);
        out.push(&mut self.cls_token);
        out.push(&mut self.pos_embed);
        for blk in &mut self.blocks {
            blk.collect_mut(out);
        }
        self.norm.collect_mut(out);
    }
}

/// Bilinearly resample a position-embedding table from one square token
/// grid to another; the class-token row (row 0) passes through unchanged.
pub fn interpolate_pos_embed<T: Elem>(
    pos: &Array2<T>,
    old_grid: usize,
    new_grid: usize,
) -> Result<Array2<T>> {
    let (rows, d) = pos.dim();
    if rows != old_grid * old_grid + 1 {
        return Err(CoreError::shape(format!(
            "pos table has {rows} rows, expected {}",
            old_grid * old_grid + 1
        )));
    }
    if old_grid == new_grid {
        return Ok(pos.clone());
    }
    let mut out = Array2::<T>::zeros((new_grid * new_grid + 1, d));
    out.row_mut(0).assign(&pos.row(0));
    let scale = if new_grid > 1 {
        (old_grid as f64 - 1.0) / (new_grid as f64 - 1.0)
    } else {
        0.0
    };
    for ny in 0..new_grid {
        for nx in 0..new_grid {
            let fy = ny as f64 * scale;
            let fx = nx as f64 * scale;
            let y0 = fy.floor() as usize;
            let x0 = fx.floor() as usize;
            let y1 = (y0 + 1).min(old_grid - 1);
            let x1 = (x0 + 1).min(old_grid - 1);
            let wy = T::cast(fy - y0 as f64);
            let wx = T::cast(fx - x0 as f64);
            let one = T::one();
            let r00 = pos.row(1 + y0 * old_grid + x0);
            let r01 = pos.row(1 + y0 * old_grid + x1);
            let r10 = pos.row(1 + y1 * old_grid + x0);
            let r11 = pos.row(1 + y1 * old_grid + x1);
            let mut dst = out.row_mut(1 + ny * new_grid + nx);
            for di in 0..d {
                let top = r00[di] * (one - wx) + r01[di] * wx;
                let bot = r10[di] * (one - wx) + r11[di] * wx;
                dst[di] = top * (one - wy) + bot * wy;
            }
        }
    }
    Ok(out)
}
