//! Training loss.

use ndarray::Array1;

use crate::elem::Elem;
use crate::error::{CoreError, Result};

/// Mean squared error and its gradient with respect to the predictions.
/// The loss is accumulated in f64 regardless of the element type.
pub fn mse_loss_with_grad<T: Elem>(
    pred: &Array1<T>,
    target: &Array1<T>,
) -> Result<(f64, Array1<T>)> {
    if pred.is_empty() {
        return Err(CoreError::MissingData("loss over an empty batch".into()));
    }
    if pred.len() != target.len() {
        return Err(CoreError::shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array1::zeros(pred.len());
    for i in 0..pred.len() {
        let d = pred[i].to_f64() - target[i].to_f64();
        loss += d * d;
        grad[i] = T::cast(2.0 * d / n);
    }
    Ok((loss / n, grad))
}

/// Loss value alone.
pub fn mse_loss<T: Elem>(pred: &Array1<T>, target: &Array1<T>) -> Result<f64> {
    mse_loss_with_grad(pred, target).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use rand::Rng;

    #[test]
    fn identical_vectors_have_zero_loss() {
        let v = arr1(&[0.5f64, 0.5]);
        assert_eq!(mse_loss(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_example() {
        let p = arr1(&[1.0f64, 0.0]);
        let t = arr1(&[0.0f64, 1.0]);
        assert_eq!(mse_loss(&p, &t).unwrap(), 1.0);
    }

    #[test]
    fn matches_loop_oracle_on_random_vectors() {
        let mut rng = crate::hash::stream_rng(5, "loss-oracle");
        for _ in 0..20 {
            let n = rng.random_range(1..100usize);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut oracle = 0.0;
            for i in 0..n {
                oracle += (p[i] - t[i]) * (p[i] - t[i]);
            }
            oracle /= n as f64;
            let got = mse_loss(&Array1::from(p), &Array1::from(t)).unwrap();
            assert!((got - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = arr1(&[0.3f64, 0.8, 0.1]);
        let t = arr1(&[0.5f64, 0.2, 0.4]);
        let (_, grad) = mse_loss_with_grad(&p, &t).unwrap();
        let h = 1e-7;
        for i in 0..p.len() {
            let mut pp = p.clone();
            pp[i] += h;
            let lp = mse_loss(&pp, &t).unwrap();
            pp[i] -= 2.0 * h;
            let lm = mse_loss(&pp, &t).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((grad[i] - fd).abs() < 1e-6, "component {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn mismatched_or_empty_inputs_are_rejected() {
        let a = arr1(&[0.1f32]);
        let b = arr1(&[0.1f32, 0.2]);
        assert!(mse_loss(&a, &b).is_err());
        let e: Array1<f32> = arr1(&[]);
        assert!(mse_loss(&e, &e).is_err());
    }
}
