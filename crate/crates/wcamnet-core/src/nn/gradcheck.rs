//! Finite-difference gradient verification.
//!
//! Central differences against analytic gradients, compared with the
//! symmetric relative error `|a - n| / max(|a| + |n|, eps)`.

use crate::elem::Elem;

pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compare analytic gradient `grad` of a scalar function `f` with central
/// differences at `theta`. `f` must be pure in `theta`.
pub fn check_gradient<T, F>(
    theta: &mut [T],
    grad: &[T],
    mut f: F,
    step: f64,
) -> GradCheckReport
where
    T: Elem,
    F: FnMut(&[T]) -> T,
{
    assert_eq!(theta.len(), grad.len());
    let h = T::cast(step);
    let two_h = T::cast(2.0 * step);
    let mut worst = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: theta.len(),
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let fp = f(theta);
        theta[i] = orig - h;
        let fm = f(theta);
        theta[i] = orig;
        let numeric = ((fp - fm) / two_h).to_f64();
        let analytic = grad[i].to_f64();
        let denom = (analytic.abs() + numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        if rel > worst.max_rel_err {
            worst.max_rel_err = rel;
            worst.worst_index = i;
            worst.analytic = analytic;
            worst.numeric = numeric;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_verifies() {
        // f(x) = sum(x_i^2), grad = 2x
        let mut theta = vec![0.5f64, -1.2, 3.0];
        let grad: Vec<f64> = theta.iter().map(|&x| 2.0 * x).collect();
        let report = check_gradient(&mut theta, &grad, |t| t.iter().map(|&x| x * x).sum(), 1e-5);
        assert!(report.max_rel_err < 1e-9, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut theta = vec![1.0f64, 2.0];
        let grad = vec![1.0f64, 1.0]; // wrong: true grad is 2x
        let report = check_gradient(&mut theta, &grad, |t| t.iter().map(|&x| x * x).sum(), 1e-5);
        assert!(report.max_rel_err > 0.1);
    }
}
