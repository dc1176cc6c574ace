//! Elementwise activations with cached backward passes.
//!
//! Each activation works on any dimensionality; callers keep the
//! activation instance alive between forward and backward.

use ndarray::{ArrayD, ArrayViewD};

use crate::elem::Elem;
use crate::nn::param::Mode;

pub struct Relu<T> {
    mask: Option<ArrayD<T>>,
}

impl<T: Elem> Relu<T> {
    pub fn new() -> Self {
        Relu { mask: None }
    }

    pub fn forward(&mut self, x: ArrayViewD<'_, T>, mode: Mode) -> ArrayD<T> {
        let y = x.mapv(|v| if v > T::zero() { v } else { T::zero() });
        self.mask = if mode == Mode::Train {
            Some(x.mapv(|v| if v > T::zero() { T::one() } else { T::zero() }))
        } else {
            None
        };
        y
    }

    pub fn backward(&mut self, dy: ArrayViewD<'_, T>) -> ArrayD<T> {
        let mask = self.mask.take().expect("relu backward without forward");
        &dy * &mask
    }
}

impl<T: Elem> Default for Relu<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Logistic sigmoid. Output is clamped to the open interval
/// `(SIGMOID_FLOOR, 1 - SIGMOID_FLOOR)` so downstream consumers can rely on
/// strictly interior values even under saturating inputs.
pub struct Sigmoid<T> {
    out: Option<ArrayD<T>>,
}

pub const SIGMOID_FLOOR: f64 = 1e-7;

impl<T: Elem> Sigmoid<T> {
    pub fn new() -> Self {
        Sigmoid { out: None }
    }

    pub fn forward(&mut self, x: ArrayViewD<'_, T>, mode: Mode) -> ArrayD<T> {
        let lo = T::cast(SIGMOID_FLOOR);
        let hi = T::one() - lo;
        let y = x.mapv(|v| {
            let s = T::one() / (T::one() + (-v).exp());
            // Float::max/min drop NaN operands; propagate NaN instead so a
            // diverged network cannot masquerade as a saturated one.
            if s.is_nan() {
                s
            } else {
                s.max(lo).min(hi)
            }
        });
        self.out = if mode == Mode::Train { Some(y.clone()) } else { None };
        y
    }

    pub fn backward(&mut self, dy: ArrayViewD<'_, T>) -> ArrayD<T> {
        let y = self.out.take().expect("sigmoid backward without forward");
        let one = T::one();
        let mut dx = y.clone();
        ndarray::Zip::from(&mut dx).and(&dy).and(&y).for_each(|d, &g, &s| {
            *d = g * s * (one - s);
        });
        dx
    }
}

impl<T: Elem> Default for Sigmoid<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Exact GELU: `x * Phi(x)` with `Phi` the standard normal CDF via `erf`.
pub struct Gelu<T> {
    input: Option<ArrayD<T>>,
}

impl<T: Elem> Gelu<T> {
    pub fn new() -> Self {
        Gelu { input: None }
    }

    fn phi(v: T) -> T {
        let half = T::cast(0.5);
        let inv_sqrt2 = T::cast(std::f64::consts::FRAC_1_SQRT_2);
        half * (T::one() + (v * inv_sqrt2).erf())
    }

    pub fn forward(&mut self, x: ArrayViewD<'_, T>, mode: Mode) -> ArrayD<T> {
        let y = x.mapv(|v| v * Self::phi(v));
        self.input = if mode == Mode::Train {
            Some(x.to_owned())
        } else {
            None
        };
        y
    }

    pub fn backward(&mut self, dy: ArrayViewD<'_, T>) -> ArrayD<T> {
        let x = self.input.take().expect("gelu backward without forward");
        // d/dx [x*Phi(x)] = Phi(x) + x*phi(x)
        let inv_sqrt_2pi = T::cast(1.0 / (2.0 * std::f64::consts::PI).sqrt());
        let half = T::cast(0.5);
        let mut dx = x.clone();
        ndarray::Zip::from(&mut dx).and(&dy).and(&x).for_each(|d, &g, &v| {
            let pdf = inv_sqrt_2pi * (-half * v * v).exp();
            *d = g * (Self::phi(v) + v * pdf);
        });
        dx
    }
}

impl<T: Elem> Default for Gelu<T> {
    fn default() -> Self {
        Self::new()
    }
}
