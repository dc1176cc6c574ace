//! Parameter initialization.
//!
//! All conv/linear weights use fan-in-scaled uniform init `U(-1/sqrt(fan_in),
//! 1/sqrt(fan_in))` with zero biases, drawn from a seeded ChaCha stream so a
//! run is reproducible bit-for-bit.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::elem::Elem;

/// Fill a tensor of the given shape with fan-in-scaled uniform values.
pub fn fan_in_uniform<T: Elem>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> ArrayD<T> {
    assert!(fan_in > 0, "fan_in must be positive");
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut out = ArrayD::zeros(IxDyn(shape));
    for v in out.iter_mut() {
        *v = T::cast(rng.random_range(-bound..bound));
    }
    out
}

pub fn zeros<T: Elem>(shape: &[usize]) -> ArrayD<T> {
    ArrayD::zeros(IxDyn(shape))
}

pub fn ones<T: Elem>(shape: &[usize]) -> ArrayD<T> {
    ArrayD::from_elem(IxDyn(shape), T::one())
}
