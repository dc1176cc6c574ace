//! Token-feature PCA: project every patch token of one image onto the top
//! three principal directions of that image's own token cloud and render the
//! scores as an RGB grid.

use image::RgbImage;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Array3};

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::model::Backbone;

/// Eigenvalues this many orders below the leading one count as zero when
/// deciding the effective rank.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PcaDecomposition {
    /// Three unit component directions as rows; zero rows when the token
    /// matrix has rank below three.
    pub components: Array2<f64>,
    /// Covariance eigenvalues of the kept components, non-increasing.
    pub eigenvalues: [f64; 3],
    /// Per-observation scores, one column per component.
    pub scores: Array2<f64>,
    /// Number of genuinely available components (≤ 3).
    pub rank: usize,
    pub warning: Option<String>,
}

/// Top-3 PCA of row observations via an eigendecomposition of the column
/// covariance. Components are sign-fixed so their largest-magnitude loading
/// is positive, making repeated runs identical.
pub fn pca_top3(x: &Array2<f64>) -> Result<PcaDecomposition> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(CoreError::invalid(format!(
            "PCA needs at least two observations, got {n}"
        )));
    }
    if d == 0 {
        return Err(CoreError::invalid("PCA needs at least one feature"));
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);

    let sym = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[b].total_cmp(&sym.eigenvalues[a]));

    let lead = sym.eigenvalues[order[0]].max(0.0);
    let tol = lead * RANK_TOL;
    let rank = order
        .iter()
        .take(3)
        .filter(|&&i| sym.eigenvalues[i] > tol && sym.eigenvalues[i] > 0.0)
        .count();

    let mut components = Array2::<f64>::zeros((3, d));
    let mut eigenvalues = [0.0; 3];
    for k in 0..rank {
        let col = sym.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        // sign convention: the largest-magnitude loading points positive
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            for w in &mut v {
                *w = -*w;
            }
        }
        components.row_mut(k).assign(&ndarray::ArrayView1::from(&v));
        eigenvalues[k] = sym.eigenvalues[order[k]];
    }
    let scores = centered.dot(&components.t());
    Ok(PcaDecomposition {
        components,
        eigenvalues,
        scores,
        rank,
        warning: (rank < 3).then(|| {
            format!("token matrix has rank {rank}; missing components zero-padded")
        }),
    })
}

#[derive(Debug, Clone)]
pub struct TokenPca {
    /// (grid, grid, 3) with every channel min-max scaled to [0, 1].
    pub rgb: Array3<f64>,
    pub decomposition: PcaDecomposition,
}

/// Extract one image's patch-token grid and visualize it through [`pca_top3`].
pub fn pca_token_visualization<T: Elem>(
    backbone: &mut Backbone<T>,
    image: &ndarray::Array4<T>,
) -> Result<TokenPca> {
    let (b, _, _, _) = image.dim();
    if b != 1 {
        return Err(CoreError::invalid(format!(
            "token visualization takes a single image, got a batch of {b}"
        )));
    }
    let tokens = backbone.extract(image)?.tokens;
    let (_, c, gh, gw) = tokens.dim();
    if gh != gw {
        return Err(CoreError::shape(format!(
            "token grid must be square, got {gh}x{gw}"
        )));
    }
    let mut x = Array2::<f64>::zeros((gh * gw, c));
    for gy in 0..gh {
        for gx in 0..gw {
            for ch in 0..c {
                x[[gy * gw + gx, ch]] = Elem::to_f64(tokens[[0, ch, gy, gx]]);
            }
        }
    }
    let decomposition = pca_top3(&x)?;
    let mut rgb = Array3::<f64>::zeros((gh, gw, 3));
    for k in 0..3 {
        let col = decomposition.scores.column(k);
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
        for gy in 0..gh {
            for gx in 0..gw {
                let v = decomposition.scores[[gy * gw + gx, k]];
                rgb[[gy, gx, k]] = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            }
        }
    }
    Ok(TokenPca { rgb, decomposition })
}

/// Nearest-neighbor upscale of the [0,1] score grid into an 8-bit image.
pub fn pca_to_image(viz: &TokenPca, scale: usize) -> RgbImage {
    let (gh, gw, _) = viz.rgb.dim();
    let s = scale.max(1) as u32;
    let mut img = RgbImage::new(gw as u32 * s, gh as u32 * s);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let gx = (x / s) as usize;
        let gy = (y / s) as usize;
        for k in 0..3 {
            px.0[k] = (viz.rgb[[gy, gx, k]] * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    img
}
