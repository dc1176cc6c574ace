//! Image decoding, bilinear resizing, and channel normalization.
//!
//! Raw frames are height×width×3 RGB bytes; model inputs are 3×side×side
//! f32 in channel-first order. Resizing uses half-pixel-centre bilinear
//! interpolation so a same-size resize is an exact copy.

use std::path::Path;

use ndarray::{Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::config::INPUT_SIDE;

/// Per-channel statistics of the training split, applied as (x − mean) / std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Normalization {
    /// No-op normalization, for pipelines that compute statistics later.
    pub fn identity() -> Self {
        Normalization { mean: [0.0; 3], std: [1.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        for c in 0..3 {
            if !self.mean[c].is_finite() || !self.std[c].is_finite() || self.std[c] <= 0.0 {
                return Err(CoreError::config(format!(
                    "channel {c} normalization (mean {}, std {}) is unusable",
                    self.mean[c], self.std[c]
                )));
            }
        }
        Ok(())
    }
}

pub fn decode_image(bytes: &[u8], path: &str) -> Result<Array3<u8>> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| CoreError::Decode { path: path.to_string(), reason: e.to_string() })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Array3::from_shape_vec((h as usize, w as usize, 3), img.into_raw())
        .map_err(|e| CoreError::Decode { path: path.to_string(), reason: e.to_string() })
}

pub fn load_image(path: &Path) -> Result<Array3<u8>> {
    let bytes = std::fs::read(path)?;
    decode_image(&bytes, &path.display().to_string())
}

/// Bilinear source coordinate and lerp weight for one output index.
fn lerp_coords(out_len: usize, src_len: usize, o: usize) -> (usize, usize, f32) {
    let scale = src_len as f64 / out_len as f64;
    let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, (s - lo as f64) as f32)
}

/// Resize height×width×3 bytes to a channel-first (3, side, side) array
/// scaled into [0, 1].
pub fn resize_to_unit(src: &ArrayView3<'_, u8>, side: usize) -> Result<Array3<f32>> {
    let (h, w, c) = src.dim();
    if c != 3 || h == 0 || w == 0 {
        return Err(CoreError::shape(format!(
            "expected non-empty RGB image, got {h}x{w}x{c}"
        )));
    }
    if side == 0 {
        return Err(CoreError::invalid("resize target side must be positive"));
    }
    let ys: Vec<_> = (0..side).map(|o| lerp_coords(side, h, o)).collect();
    let xs: Vec<_> = (0..side).map(|o| lerp_coords(side, w, o)).collect();
    let mut out = Array3::<f32>::zeros((3, side, side));
    for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
            for ch in 0..3 {
                let p00 = src[[y0, x0, ch]] as f32;
                let p01 = src[[y0, x1, ch]] as f32;
                let p10 = src[[y1, x0, ch]] as f32;
                let p11 = src[[y1, x1, ch]] as f32;
                let top = p00 + (p01 - p00) * fx;
                let bot = p10 + (p11 - p10) * fx;
                out[[ch, oy, ox]] = (top + (bot - top) * fy) / 255.0;
            }
        }
    }
    Ok(out)
}

pub fn normalize(img: &mut Array3<f32>, norm: &Normalization) {
    for c in 0..3 {
        let mean = norm.mean[c] as f32;
        let inv = (1.0 / norm.std[c]) as f32;
        img.index_axis_mut(ndarray::Axis(0), c)
            .mapv_inplace(|x| (x - mean) * inv);
    }
}

/// Resize to `side`, scale to [0, 1], and normalize with train statistics.
pub fn preprocess_to(
    src: &ArrayView3<'_, u8>,
    side: usize,
    norm: &Normalization,
) -> Result<Array3<f32>> {
    norm.validate()?;
    let mut img = resize_to_unit(src, side)?;
    normalize(&mut img, norm);
    Ok(img)
}

/// Production preprocessing at the network's native input side.
pub fn preprocess(src: &ArrayView3<'_, u8>, norm: &Normalization) -> Result<Array3<f32>> {
    preprocess_to(src, INPUT_SIDE, norm)
}

/// Streaming per-channel mean/std accumulator (population statistics) over
/// channel-first unit-scaled images.
#[derive(Debug, Default, Clone)]
pub struct StatsAccumulator {
    sum: [f64; 3],
    sumsq: [f64; 3],
    count: u64,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, img: &ArrayView3<'_, f32>) {
        let (c, h, w) = img.dim();
        assert_eq!(c, 3, "channel-first RGB expected");
        for ch in 0..3 {
            for &v in img.index_axis(ndarray::Axis(0), ch).iter() {
                self.sum[ch] += v as f64;
                self.sumsq[ch] += (v as f64) * (v as f64);
            }
        }
        self.count += (h * w) as u64;
    }

    /// Fold another accumulator's pixels into this one.
    pub fn merge(&mut self, other: &StatsAccumulator) {
        for c in 0..3 {
            self.sum[c] += other.sum[c];
            self.sumsq[c] += other.sumsq[c];
        }
        self.count += other.count;
    }

    pub fn finish(&self) -> Result<Normalization> {
        if self.count == 0 {
            return Err(CoreError::MissingData("no pixels for normalization statistics".into()));
        }
        let n = self.count as f64;
        let mut norm = Normalization::identity();
        for c in 0..3 {
            let mean = self.sum[c] / n;
            let var = (self.sumsq[c] / n - mean * mean).max(0.0);
            norm.mean[c] = mean;
            // constant channels would otherwise divide by zero
            norm.std[c] = var.sqrt().max(1e-6);
        }
        Ok(norm)
    }
}

pub fn compute_normalization(images: &[Array3<f32>]) -> Result<Normalization> {
    let mut acc = StatsAccumulator::new();
    for img in images {
        acc.add(&img.view());
    }
    acc.finish()
}
