//! SGD with momentum and decoupled weight decay.

use ndarray::ArrayD;

use crate::elem::Elem;
use crate::nn::Param;

/// Momentum SGD. Weight decay is decoupled from the gradient step: each
/// update shrinks parameters by `(1 - weight_decay)` independently of the
/// learning rate, so decay acts even when the gradient signal vanishes.
pub struct Sgd<T> {
    momentum: f64,
    weight_decay: f64,
    // keyed by position in the model's deterministic parameter order
    velocity: Vec<Option<ArrayD<T>>>,
}

impl<T: Elem> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        assert!(
            (0.0..1.0).contains(&momentum),
            "momentum must lie in [0, 1)"
        );
        assert!(
            (0.0..1.0).contains(&weight_decay),
            "weight decay must lie in [0, 1)"
        );
        Sgd {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// One update over `params`, which must be the model's full parameter
    /// list in its stable order. Frozen tensors and buffers are skipped.
    pub fn step(&mut self, mut params: Vec<&mut Param<T>>, lr: f64) {
        if self.velocity.len() < params.len() {
            self.velocity.resize(params.len(), None);
        }
        let mu = T::cast(self.momentum);
        let lr_t = T::cast(lr);
        let keep = T::cast(1.0 - self.weight_decay);
        for (slot, p) in self.velocity.iter_mut().zip(params.iter_mut()) {
            if !p.trainable || p.buffer {
                continue;
            }
            let v = slot.get_or_insert_with(|| ArrayD::zeros(p.value.raw_dim()));
            assert_eq!(
                v.shape(),
                p.value.shape(),
                "parameter order changed under the optimizer"
            );
            match &p.grad {
                Some(g) => {
                    v.zip_mut_with(g, |vi, gi| *vi = *vi * mu + *gi);
                }
                None => v.mapv_inplace(|vi| vi * mu),
            }
            p.value.zip_mut_with(v, |pi, vi| *pi -= lr_t * *vi);
            if self.weight_decay > 0.0 {
                p.value.mapv_inplace(|pi| pi * keep);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, ArrayD};

    fn param(name: &str, vals: &[f64], trainable: bool) -> Param<f64> {
        Param::new(name, arr1(vals).into_dyn(), trainable)
    }

    #[test]
    fn plain_gradient_step_without_momentum() {
        let mut p = param("w", &[1.0, -2.0], true);
        p.add_grad(arr1(&[0.5, 0.5]).into_dyn().view());
        let mut opt = Sgd::new(0.0, 0.0);
        opt.step(vec![&mut p], 0.1);
        assert_eq!(p.value.as_slice().unwrap(), &[0.95, -2.05]);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        // constant grad g, momentum m: after step k, v_k = sum m^j g
        let mut p = param("w", &[0.0], true);
        let mut opt = Sgd::new(0.5, 0.0);
        let mut expected = 0.0;
        let mut v = 0.0;
        for _ in 0..4 {
            p.zero_grad();
            p.add_grad(arr1(&[1.0]).into_dyn().view());
            opt.step(vec![&mut p], 0.1);
            v = 0.5 * v + 1.0;
            expected -= 0.1 * v;
            assert!((p.value[[0]] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn decay_shrinks_parameters_even_with_zero_lr_and_no_grads() {
        let mut p = param("w", &[3.0, -4.0], true);
        let mut opt = Sgd::new(0.9, 0.01);
        let mut last = 5.0; // initial L2 norm
        for _ in 0..5 {
            p.zero_grad();
            opt.step(vec![&mut p], 0.0);
            let norm = p.value.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < last, "norm must strictly decrease: {norm} vs {last}");
            last = norm;
        }
        assert!((last - 5.0 * 0.99f64.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn frozen_parameters_and_buffers_are_untouched() {
        let mut frozen = param("backbone.w", &[1.0], false);
        let mut buffer = Param::new_buffer("bn.running_mean", arr1(&[0.5]).into_dyn());
        let mut live = param("head.w", &[1.0], true);
        live.add_grad(arr1(&[1.0]).into_dyn().view());
        let mut opt = Sgd::new(0.9, 0.1);
        opt.step(vec![&mut frozen, &mut buffer, &mut live], 0.1);
        assert_eq!(frozen.value[[0]], 1.0);
        assert_eq!(buffer.value[[0]], 0.5);
        assert!(live.value[[0]] < 1.0);
    }

    #[test]
    fn missing_grad_decays_velocity_instead_of_resetting() {
        let mut p = param("w", &[0.0], true);
        let mut opt = Sgd::new(0.5, 0.0);
        p.add_grad(arr1(&[1.0]).into_dyn().view());
        opt.step(vec![&mut p], 1.0); // v = 1, p = -1
        p.zero_grad();
        opt.step(vec![&mut p], 1.0); // v = 0.5, p = -1.5
        assert!((p.value[[0]] + 1.5).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "momentum")]
    fn momentum_out_of_range_panics() {
        let _ = Sgd::<f64>::new(1.0, 0.0);
    }

    #[test]
    fn velocity_slots_track_parameter_identity() {
        let mut a = param("a", &[1.0], true);
        let mut b = param("b", &[1.0, 2.0], true);
        let mut opt = Sgd::new(0.9, 0.0);
        a.add_grad(arr1(&[1.0]).into_dyn().view());
        b.add_grad(arr1(&[1.0, 1.0]).into_dyn().view());
        opt.step(vec![&mut a, &mut b], 0.1);
        let g: ArrayD<f64> = arr1(&[1.0]).into_dyn();
        a.zero_grad();
        a.add_grad(g.view());
        b.zero_grad();
        opt.step(vec![&mut a, &mut b], 0.1);
        // second step reused per-parameter velocities of matching shapes
        assert!((a.value[[0]] - (1.0 - 0.1 - 0.1 * 1.9)).abs() < 1e-15);
    }
}
