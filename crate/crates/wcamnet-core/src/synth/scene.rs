//! Deterministic scene renderer.
//!
//! A scene is sky above a horizon line, terrain below it, and a trapezoidal
//! road converging toward the horizon. Every pixel is a pure function of
//! `(seed, x, y)` plus the scalar scene parameters, so an identical spec
//! always produces identical bytes. Friction is read only inside the road
//! region; clutter, sky, and terrain depend on the seed and lighting alone.

use image::RgbImage;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::hash::{splitmix64, stream_rng};

/// Fraction of image height above the horizon (sky).
const HORIZON_FRAC: f64 = 0.42;
/// Road half-width as a fraction of image width at the horizon / bottom edge.
const ROAD_HALF_TOP: f64 = 0.06;
const ROAD_HALF_BOTTOM: f64 = 0.32;
/// Road base brightness at friction 0 (smooth ice) and 1 (coarse asphalt).
const BRIGHT_LOW_FRICTION: f64 = 0.85;
const BRIGHT_HIGH_FRICTION: f64 = 0.22;
/// Road texture amplitude at friction 0 and 1.
const AMP_LOW_FRICTION: f64 = 0.03;
const AMP_HIGH_FRICTION: f64 = 0.25;
/// Global illumination multiplier at lighting 0 and 1.
const LIGHT_MIN: f64 = 0.70;
const LIGHT_MAX: f64 = 1.10;
/// Side of the coarse texture blocks, in pixels at render resolution.
const BLOCK_SIDE: u32 = 8;

// Noise field tags; each tag is an independent white-noise layer.
const TAG_SKY: u64 = 1;
const TAG_TERRAIN_COARSE: u64 = 2;
const TAG_TERRAIN_FINE: u64 = 3;
const TAG_ROAD_FINE: u64 = 4;
const TAG_ROAD_BLOCK: u64 = 5;

/// Full description of one rendered scene. Equal specs render equal bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Target friction factor in [0, 1]; read only by road-region texture.
    pub friction: f64,
    /// Noise seed; controls texture, clutter layout, and nothing else.
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Metadata only; rendering does not depend on it.
    pub station_id: String,
    /// Global illumination in [0, 1]; scales the whole frame.
    pub lighting: f64,
    /// Number of distractor shapes placed outside the road region.
    pub clutter: usize,
    /// When set, road pixels are painted with terrain texture instead, so
    /// no pixel in the frame carries friction information.
    pub mask_road: bool,
}

impl SceneSpec {
    pub fn new(friction: f64, seed: u64) -> Self {
        Self {
            friction,
            seed,
            width: 1280,
            height: 720,
            station_id: "synth-cam-00".to_string(),
            lighting: 0.5,
            clutter: 5,
            mask_road: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.friction.is_finite() || !(0.0..=1.0).contains(&self.friction) {
            return Err(CoreError::invalid(format!(
                "scene friction must lie in [0, 1], got {}",
                self.friction
            )));
        }
        if !self.lighting.is_finite() || !(0.0..=1.0).contains(&self.lighting) {
            return Err(CoreError::invalid(format!(
                "scene lighting must lie in [0, 1], got {}",
                self.lighting
            )));
        }
        if self.width < 32 || self.height < 32 {
            return Err(CoreError::invalid(format!(
                "scene resolution must be at least 32x32, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Whether pixel (x, y) lies on the road trapezoid for a w x h frame.
pub fn is_road(x: u32, y: u32, width: u32, height: u32) -> bool {
    let h = height as f64;
    let horizon = h * HORIZON_FRAC;
    let yf = y as f64;
    if yf < horizon {
        return false;
    }
    let t = (yf - horizon) / (h - horizon);
    let half = (ROAD_HALF_TOP + (ROAD_HALF_BOTTOM - ROAD_HALF_TOP) * t) * width as f64;
    (x as f64 - 0.5 * width as f64).abs() <= half
}

/// White noise in [0, 1), a pure function of (seed, tag, x, y).
fn field(seed: u64, tag: u64, x: u32, y: u32) -> f64 {
    let z = seed
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(((x as u64) << 32) | y as u64);
    (splitmix64(z) >> 11) as f64 / (1u64 << 53) as f64
}

/// Same noise recentered to [-1, 1).
fn signed_field(seed: u64, tag: u64, x: u32, y: u32) -> f64 {
    2.0 * field(seed, tag, x, y) - 1.0
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

struct Shape {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    disc: bool,
    color: [f64; 3],
}

impl Shape {
    fn covers(&self, x: u32, y: u32) -> bool {
        if !self.disc {
            return true;
        }
        let cx = (self.x0 as f64 + self.x1 as f64) / 2.0;
        let cy = (self.y0 as f64 + self.y1 as f64) / 2.0;
        let rx = (self.x1 - self.x0) as f64 / 2.0;
        let ry = (self.y1 - self.y0) as f64 / 2.0;
        if rx <= 0.0 || ry <= 0.0 {
            return false;
        }
        let dx = (x as f64 - cx) / rx;
        let dy = (y as f64 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// Distractor shapes in the sky band and the terrain margins. Their layout
/// and colors derive from the seed alone, never from friction.
fn clutter_shapes(spec: &SceneSpec) -> Vec<Shape> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let horizon = h * HORIZON_FRAC;
    let mut shapes = Vec::with_capacity(spec.clutter);
    for k in 0..spec.clutter {
        let mut rng = stream_rng(spec.seed, &format!("clutter-{k}"));
        let in_sky = rng.random_bool(0.5);
        let (cx, cy) = if in_sky {
            (
                rng.random_range(0.05 * w..0.95 * w),
                rng.random_range(0.04 * h..0.90 * horizon),
            )
        } else {
            let left = rng.random_bool(0.5);
            let cx = if left {
                rng.random_range(0.01 * w..0.10 * w)
            } else {
                rng.random_range(0.90 * w..0.99 * w)
            };
            (cx, rng.random_range(horizon + 0.05 * h..0.96 * h))
        };
        let sx = rng.random_range(0.02 * w..0.07 * w);
        let sy = rng.random_range(0.02 * h..0.08 * h);
        let disc = rng.random_bool(0.5);
        let color = [
            rng.random_range(0.15..0.90),
            rng.random_range(0.15..0.90),
            rng.random_range(0.15..0.90),
        ];
        shapes.push(Shape {
            x0: (cx - sx).max(0.0) as u32,
            y0: (cy - sy).max(0.0) as u32,
            x1: ((cx + sx).min(w - 1.0)) as u32,
            y1: ((cy + sy).min(h - 1.0)) as u32,
            disc,
            color,
        });
    }
    shapes
}

fn sky_color(spec: &SceneSpec, x: u32, y: u32, horizon: f64) -> [f64; 3] {
    let grad = 1.0 - y as f64 / horizon.max(1.0);
    let n = signed_field(spec.seed, TAG_SKY, x, y) * 0.015;
    [
        0.52 + 0.10 * grad + n,
        0.62 + 0.08 * grad + n,
        0.78 + 0.05 * grad + n,
    ]
}

fn terrain_color(spec: &SceneSpec, x: u32, y: u32) -> [f64; 3] {
    let coarse =
        signed_field(spec.seed, TAG_TERRAIN_COARSE, x / BLOCK_SIDE, y / BLOCK_SIDE) * 0.05;
    let fine = signed_field(spec.seed, TAG_TERRAIN_FINE, x, y) * 0.04;
    let n = coarse + fine;
    [0.33 + n, 0.40 + n, 0.26 + n]
}

/// Road texture: base brightness falls with friction while texture
/// amplitude rises, so mean luminance, local contrast, and block-scale
/// spatial energy all encode the label.
fn road_color(spec: &SceneSpec, x: u32, y: u32) -> [f64; 3] {
    let f = spec.friction;
    let base = lerp(BRIGHT_LOW_FRICTION, BRIGHT_HIGH_FRICTION, f);
    let amp = lerp(AMP_LOW_FRICTION, AMP_HIGH_FRICTION, f);
    let fine = signed_field(spec.seed, TAG_ROAD_FINE, x, y);
    let block = signed_field(spec.seed, TAG_ROAD_BLOCK, x / BLOCK_SIDE, y / BLOCK_SIDE);
    let v = base + amp * (0.8 * fine + 0.6 * block);
    [v, v, v]
}

/// Render the scene described by `spec`. Identical specs yield identical
/// pixel buffers.
pub fn generate_scene(spec: &SceneSpec) -> Result<RgbImage> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let horizon = h as f64 * HORIZON_FRAC;
    let shapes = clutter_shapes(spec);
    let light = lerp(LIGHT_MIN, LIGHT_MAX, spec.lighting);

    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let road = is_road(x, y, w, h);
            let mut c = if (y as f64) < horizon {
                sky_color(spec, x, y, horizon)
            } else if road && !spec.mask_road {
                road_color(spec, x, y)
            } else {
                terrain_color(spec, x, y)
            };
            if !road {
                for s in &shapes {
                    if x >= s.x0 && x <= s.x1 && y >= s.y0 && y <= s.y1 && s.covers(x, y) {
                        c = s.color;
                    }
                }
            }
            let px = img.get_pixel_mut(x, y);
            for ch in 0..3 {
                let v = (c[ch] * light).clamp(0.0, 1.0);
                px.0[ch] = (v * 255.0).round() as u8;
            }
        }
    }
    Ok(img)
}

/// Mean luminance over the road region, on the [0, 1] scale.
pub fn road_luminance(img: &RgbImage) -> f64 {
    let (w, h) = img.dimensions();
    let (mut sum, mut count) = (0.0, 0u64);
    for y in 0..h {
        for x in 0..w {
            if is_road(x, y, w, h) {
                let p = img.get_pixel(x, y).0;
                let luma = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                sum += luma / 255.0;
                count += 1;
            }
        }
    }
    sum / count.max(1) as f64
}
