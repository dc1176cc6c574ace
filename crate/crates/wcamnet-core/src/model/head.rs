//! Regression head: global average pool → fully connected → sigmoid.

use ndarray::{Array1, Array2, Array4, Axis};
use rand_chacha::ChaCha8Rng;

use crate::elem::Elem;
use crate::nn::{init, GlobalAvgPool, Linear, Mode, Param, Sigmoid};

pub struct RegressionHead<T> {
    pool: GlobalAvgPool,
    fc: Linear<T>,
    sigmoid: Sigmoid<T>,
    channels: usize,
}

impl<T: Elem> RegressionHead<T> {
    pub fn new(channels: usize, rng: &mut ChaCha8Rng, prefix: &str) -> Self {
        RegressionHead {
            pool: GlobalAvgPool::new(),
            fc: Linear::new(
                &format!("{prefix}.fc"),
                Param::new(
                    format!("{prefix}.fc.weight"),
                    init::fan_in_uniform(rng, &[1, channels], channels),
                    true,
                ),
                Some(Param::new(format!("{prefix}.fc.bias"), init::zeros(&[1]), true)),
            ),
            sigmoid: Sigmoid::new(),
            channels,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Exposed for tests: the pooled per-channel means.
    pub fn pooled(&mut self, x: &Array4<T>) -> Array2<T> {
        self.pool.forward(x, Mode::Eval)
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Array1<T> {
        let pooled = self.pool.forward(x, mode);
        let z = self.fc.forward(&pooled, mode);
        let y = self.sigmoid.forward(z.into_dyn().view(), mode);
        y.into_dimensionality::<ndarray::Ix2>()
            .unwrap()
            .index_axis(Axis(1), 0)
            .to_owned()
    }

    pub fn backward(&mut self, dpred: &Array1<T>) -> Array4<T> {
        let dy = dpred.view().insert_axis(Axis(1)).to_owned();
        let dz = self.sigmoid.backward(dy.into_dyn().view());
        let dz = dz.into_dimensionality::<ndarray::Ix2>().unwrap();
        let dpool = self.fc.backward(&dz);
        self.pool.backward(&dpool)
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.fc.collect(out);
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.fc.collect_mut(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn constant_channels_pool_to_their_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut head = RegressionHead::<f64>::new(3, &mut rng, "head");
        let mut x = Array4::<f64>::zeros((1, 3, 4, 4));
        for c in 0..3 {
            x.index_axis_mut(Axis(1), c).fill(c as f64 + 0.5);
        }
        let pooled = head.pooled(&x);
        assert_eq!(pooled[[0, 0]], 0.5);
        assert_eq!(pooled[[0, 1]], 1.5);
        assert_eq!(pooled[[0, 2]], 2.5);
    }

    #[test]
    fn zero_weights_predict_exactly_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut head = RegressionHead::<f64>::new(5, &mut rng, "head");
        head.fc.weight.value.fill(0.0);
        let x = Array4::from_shape_fn((3, 5, 2, 2), |(b, c, i, j)| {
            (b * 20 + c * 4 + i * 2 + j) as f64
        });
        let y = head.forward(&x, Mode::Eval);
        assert!(y.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn batch16_gives_16_scalars_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut head = RegressionHead::<f32>::new(832, &mut rng, "head");
        let x = Array4::from_shape_fn((16, 832, 2, 2), |(b, c, _, _)| {
            ((b * 832 + c) as f32 * 0.001).sin()
        });
        let y = head.forward(&x, Mode::Eval);
        assert_eq!(y.len(), 16);
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
