//! Training-time image augmentation.
//!
//! Stage order: horizontal flip, color jitter (brightness, contrast,
//! saturation), rotation, pad-and-crop. Every stage is skipped outright at
//! its identity parameters, so degenerate parameters reproduce the input
//! bit-for-bit. Rotation and padding fill with the per-channel image mean
//! rather than black, to keep border statistics unbiased.

use ndarray::{s, Array3, ArrayView3, Axis};
use rand::Rng;

use crate::hash::stream_rng;

pub const CROP_PAD: usize = 64;
pub const JITTER_SCALE: f32 = 0.05;
pub const MAX_ROTATION_DEG: f32 = 45.0;

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    pub rotation_deg: f32,
    /// Top-left corner of the crop window inside the padded image; the
    /// centred value `(CROP_PAD, CROP_PAD)` recovers the input.
    pub crop_offset: (usize, usize),
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams {
            flip: false,
            brightness: 1.0,
            contrast: 1.0,
            saturation: 1.0,
            rotation_deg: 0.0,
            crop_offset: (CROP_PAD, CROP_PAD),
        }
    }

    /// Draw order is part of the determinism contract; reordering fields
    /// here would silently change every seeded augmentation.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        AugmentParams {
            flip: rng.random_bool(0.5),
            brightness: rng.random_range(1.0 - JITTER_SCALE..=1.0 + JITTER_SCALE),
            contrast: rng.random_range(1.0 - JITTER_SCALE..=1.0 + JITTER_SCALE),
            saturation: rng.random_range(1.0 - JITTER_SCALE..=1.0 + JITTER_SCALE),
            rotation_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
            crop_offset: (
                rng.random_range(0..=2 * CROP_PAD),
                rng.random_range(0..=2 * CROP_PAD),
            ),
        }
    }
}

/// Seeded augmentation of a channel-first [0, 1] image; output keeps the
/// input's height and width.
pub fn augment(image: &ArrayView3<'_, f32>, seed: u64) -> Array3<f32> {
    let mut rng = stream_rng(seed, "augment");
    augment_with(image, &AugmentParams::sample(&mut rng))
}

pub fn augment_with(image: &ArrayView3<'_, f32>, p: &AugmentParams) -> Array3<f32> {
    let mut img = if p.flip {
        image.slice(s![.., .., ..;-1]).to_owned()
    } else {
        image.to_owned()
    };

    if p.brightness != 1.0 {
        img.mapv_inplace(|x| (x * p.brightness).clamp(0.0, 1.0));
    }
    if p.contrast != 1.0 {
        let gray = mean_luma(&img);
        img.mapv_inplace(|x| (gray + (x - gray) * p.contrast).clamp(0.0, 1.0));
    }
    if p.saturation != 1.0 {
        let (_, h, w) = img.dim();
        for y in 0..h {
            for x in 0..w {
                let l = LUMA[0] * img[[0, y, x]] + LUMA[1] * img[[1, y, x]] + LUMA[2] * img[[2, y, x]];
                for c in 0..3 {
                    img[[c, y, x]] = (l + (img[[c, y, x]] - l) * p.saturation).clamp(0.0, 1.0);
                }
            }
        }
    }
    if p.rotation_deg != 0.0 {
        img = rotate(&img, p.rotation_deg);
    }
    if p.crop_offset != (CROP_PAD, CROP_PAD) {
        img = pad_crop(&img, p.crop_offset);
    }
    img
}

fn mean_luma(img: &Array3<f32>) -> f32 {
    let (_, h, w) = img.dim();
    let mut sum = 0f64;
    for c in 0..3 {
        let channel_sum: f64 = img.index_axis(Axis(0), c).iter().map(|&v| v as f64).sum();
        sum += LUMA[c] as f64 * channel_sum;
    }
    (sum / (h * w) as f64) as f32
}

fn channel_means(img: &Array3<f32>) -> [f32; 3] {
    let (_, h, w) = img.dim();
    let mut means = [0f32; 3];
    for (c, m) in means.iter_mut().enumerate() {
        let sum: f64 = img.index_axis(Axis(0), c).iter().map(|&v| v as f64).sum();
        *m = (sum / (h * w) as f64) as f32;
    }
    means
}

/// Rotate about the image centre by `deg`, bilinear-sampled via the inverse
/// map; out-of-frame samples take the per-channel mean.
fn rotate(img: &Array3<f32>, deg: f32) -> Array3<f32> {
    let (_, h, w) = img.dim();
    let fill = channel_means(img);
    let theta = (deg as f64).to_radians();
    let (sin, cos) = theta.sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;

    let mut out = Array3::<f32>::zeros((3, h, w));
    for y in 0..h {
        for x in 0..w {
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
                for c in 0..3 {
                    out[[c, y, x]] = fill[c];
                }
                continue;
            }
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = (sx - x0 as f64) as f32;
            let fy = (sy - y0 as f64) as f32;
            for c in 0..3 {
                let top = img[[c, y0, x0]] + (img[[c, y0, x1]] - img[[c, y0, x0]]) * fx;
                let bottom = img[[c, y1, x0]] + (img[[c, y1, x1]] - img[[c, y1, x0]]) * fx;
                out[[c, y, x]] = top + (bottom - top) * fy;
            }
        }
    }
    out
}

/// Equivalent of padding `CROP_PAD` on every side with the channel mean and
/// cropping back to the original size at `offset`.
fn pad_crop(img: &Array3<f32>, offset: (usize, usize)) -> Array3<f32> {
    let (_, h, w) = img.dim();
    let fill = channel_means(img);
    let (oy, ox) = offset;
    let mut out = Array3::<f32>::zeros((3, h, w));
    for y in 0..h {
        for x in 0..w {
            let sy = (y + oy) as isize - CROP_PAD as isize;
            let sx = (x + ox) as isize - CROP_PAD as isize;
            let inside = sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w;
            for c in 0..3 {
                out[[c, y, x]] = if inside {
                    img[[c, sy as usize, sx as usize]]
                } else {
                    fill[c]
                };
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(side: usize) -> Array3<f32> {
        Array3::from_shape_fn((3, side, side), |(c, y, x)| {
            ((c * 83 + y * 31 + x * 17) % 251) as f32 / 250.0
        })
    }

    #[test]
    fn identity_parameters_reproduce_the_input_exactly() {
        let img = test_image(40);
        let out = augment_with(&img.view(), &AugmentParams::identity());
        assert_eq!(out, img);
    }

    #[test]
    fn same_seed_gives_identical_output() {
        let img = test_image(48);
        let a = augment(&img.view(), 1234);
        let b = augment(&img.view(), 1234);
        assert_eq!(a, b);
        let c = augment(&img.view(), 1235);
        assert_ne!(a, c, "different seed should perturb differently");
    }

    #[test]
    fn output_shape_and_range_are_preserved() {
        for side in [96, 602] {
            let img = test_image(side);
            let out = augment(&img.view(), 7);
            assert_eq!(out.dim(), (3, side, side));
            assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn flip_only_reverses_columns_exactly() {
        let img = test_image(16);
        let mut p = AugmentParams::identity();
        p.flip = true;
        let out = augment_with(&img.view(), &p);
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..16 {
                    assert_eq!(out[[c, y, x]], img[[c, y, 15 - x]]);
                }
            }
        }
    }

    #[test]
    fn constant_images_are_fixed_points_of_the_geometry_stages() {
        let img = Array3::<f32>::from_elem((3, 32, 32), 0.42);
        let mut p = AugmentParams::identity();
        p.rotation_deg = 30.0;
        p.crop_offset = (3, 97);
        let out = augment_with(&img.view(), &p);
        for &v in out.iter() {
            assert!((v - 0.42).abs() < 1e-6);
        }
    }

    #[test]
    fn pure_translation_shifts_interior_pixels() {
        let img = test_image(32);
        let mut p = AugmentParams::identity();
        p.crop_offset = (CROP_PAD + 5, CROP_PAD); // shift down-sample by 5 rows
        let out = augment_with(&img.view(), &p);
        assert_eq!(out[[1, 0, 8]], img[[1, 5, 8]]);
        assert_eq!(out[[2, 20, 3]], img[[2, 25, 3]]);
        // rows pushed past the border take the mean fill
        let fill = channel_means(&img);
        assert_eq!(out[[0, 30, 4]], fill[0]);
    }

    #[test]
    fn brightness_scales_and_clamps() {
        let img = Array3::<f32>::from_elem((3, 8, 8), 0.5);
        let mut p = AugmentParams::identity();
        p.brightness = 1.05;
        let out = augment_with(&img.view(), &p);
        assert!((out[[0, 0, 0]] - 0.525).abs() < 1e-6);

        let bright = Array3::<f32>::from_elem((3, 8, 8), 0.99);
        let out = augment_with(&bright.view(), &p);
        assert!(out.iter().all(|&v| v <= 1.0));
    }
}
