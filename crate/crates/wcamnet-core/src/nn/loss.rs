//! Regression losses.

use ndarray::Array1;

use crate::elem::Elem;

/// Mean squared error over a batch of scalar predictions.
/// Returns `(loss, dloss/dpred)`.
pub fn mse<T: Elem>(pred: &Array1<T>, target: &Array1<T>) -> (T, Array1<T>) {
    assert_eq!(pred.len(), target.len(), "mse: length mismatch");
    let n = T::cast(pred.len() as f64);
    let diff = pred - target;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let two = T::cast(2.0);
    let grad = diff.mapv(|d| two * d / n);
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mse_matches_hand_computation() {
        let pred = array![0.5f64, 0.0, 1.0];
        let target = array![0.0f64, 0.0, 0.5];
        let (loss, grad) = mse(&pred, &target);
        // (0.25 + 0 + 0.25) / 3
        assert!((loss - 0.5 / 3.0).abs() < 1e-15);
        assert!((grad[0] - 2.0 * 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(grad[1], 0.0);
    }

    #[test]
    fn zero_error_zero_loss() {
        let p = array![0.3f64, 0.7];
        let (loss, grad) = mse(&p, &p);
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}
