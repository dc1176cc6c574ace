//! SGD with momentum and decoupled weight decay.
//!
//! Decay multiplies parameters by `(1 - weight_decay)` after the momentum
//! step rather than being folded into the gradient, so a positive decay
//! shrinks weights even when the gradient and learning rate are zero.

use ndarray::ArrayD;

use crate::elem::Elem;
use crate::nn::param::Param;

pub struct SgdMomentum<T> {
    pub momentum: T,
    pub weight_decay: T,
    /// One velocity per construction-time param; `None` for frozen tensors
    /// and buffers, which the optimizer does not track at all.
    velocity: Vec<Option<ArrayD<T>>>,
    tracked_names: Vec<String>,
}

impl<T: Elem> SgdMomentum<T> {
    pub fn new(momentum: f64, weight_decay: f64, params: &[&Param<T>]) -> Self {
        let mut velocity = Vec::with_capacity(params.len());
        let mut tracked_names = Vec::new();
        for p in params {
            if p.trainable && !p.buffer {
                velocity.push(Some(ArrayD::zeros(p.value.raw_dim())));
                tracked_names.push(p.name().to_string());
            } else {
                velocity.push(None);
            }
        }
        SgdMomentum {
            momentum: T::cast(momentum),
            weight_decay: T::cast(weight_decay),
            velocity,
            tracked_names,
        }
    }

    /// Names of the tensors this optimizer will ever update.
    pub fn tracked_names(&self) -> &[String] {
        &self.tracked_names
    }

    /// One update over all tracked params. `params` must be passed in the
    /// same order as at construction.
    pub fn step(&mut self, params: &mut [&mut Param<T>], lr: T) {
        assert_eq!(params.len(), self.velocity.len(), "optimizer/param list mismatch");
        let one = T::one();
        let decay_keep = one - self.weight_decay;
        for (p, v) in params.iter_mut().zip(self.velocity.iter_mut()) {
            let Some(v) = v else { continue };
            let Some(g) = &p.grad else { continue };
            // v = mu*v + g; p -= lr*v; p *= (1 - wd)
            ndarray::Zip::from(v.view_mut()).and(g).for_each(|vv, &gv| {
                *vv = self.momentum * *vv + gv;
            });
            ndarray::Zip::from(&mut p.value).and(v.view()).for_each(|pv, &vv| {
                *pv = (*pv - lr * vv) * decay_keep;
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn decay_shrinks_weights_with_zero_gradient_and_lr() {
        let mut p = Param::new("w", array![3.0f64, -4.0].into_dyn(), true);
        p.add_grad(array![0.0f64, 0.0].into_dyn().view());
        let mut opt = SgdMomentum::new(0.9, 0.01, &[&p]);
        let before = p.value.mapv(|v| v * v).sum().sqrt();
        opt.step(&mut [&mut p], 0.0);
        let after = p.value.mapv(|v| v * v).sum().sqrt();
        assert!(after < before, "decay must shrink norm: {before} -> {after}");
        assert!((after - before * 0.99).abs() < 1e-12);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let mut p = Param::new("w", array![0.0f64].into_dyn(), true);
        let mut opt = SgdMomentum::new(0.5, 0.0, &[&p]);
        // two steps with constant grad 1, lr 1:
        // v1 = 1, p = -1; v2 = 0.5 + 1 = 1.5, p = -2.5
        p.add_grad(array![1.0f64].into_dyn().view());
        opt.step(&mut [&mut p], 1.0);
        p.zero_grad();
        p.add_grad(array![1.0f64].into_dyn().view());
        opt.step(&mut [&mut p], 1.0);
        assert!((p.value[0] + 2.5).abs() < 1e-12, "got {}", p.value[0]);
    }

    #[test]
    fn frozen_params_are_not_tracked_and_never_move() {
        let mut p = Param::new("frozen.w", array![1.0f64].into_dyn(), false);
        let q = Param::new("head.w", array![2.0f64].into_dyn(), true);
        let mut opt = SgdMomentum::new(0.9, 0.5, &[&p, &q]);
        assert_eq!(opt.tracked_names(), &["head.w".to_string()]);
        p.add_grad(array![10.0f64].into_dyn().view());
        let mut q = q;
        opt.step(&mut [&mut p, &mut q], 1.0);
        assert_eq!(p.value[0], 1.0);
    }
}
