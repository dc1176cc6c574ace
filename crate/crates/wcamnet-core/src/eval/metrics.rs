//! Regression error metrics.

use crate::error::{CoreError, Result};

fn check_lengths(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.is_empty() {
        return Err(CoreError::MissingData(
            "metrics need at least one prediction".into(),
        ));
    }
    if preds.len() != targets.len() {
        return Err(CoreError::shape(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    let sum: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Root-mean-square error.
pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    let sum: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sum / preds.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn hand_computed_examples() {
        assert!((mae(&[0.5, 0.5], &[0.4, 0.6]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mae(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn constant_offset_rmse_equals_offset() {
        let targets: Vec<f64> = (0..50).map(|i| i as f64 / 100.0).collect();
        let preds: Vec<f64> = targets.iter().map(|t| t + 0.07).collect();
        assert!((rmse(&preds, &targets).unwrap() - 0.07).abs() < 1e-12);
        assert!((mae(&preds, &targets).unwrap() - 0.07).abs() < 1e-12);
    }

    #[test]
    fn matches_independent_loop_oracle_on_random_vectors() {
        let mut rng = crate::hash::stream_rng(17, "metrics-oracle");
        for _ in 0..100 {
            let n = rng.random_range(1..50usize);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            // oracle written as an explicit index loop
            let mut abs_sum = 0.0;
            let mut sq_sum = 0.0;
            for i in 0..n {
                let d = p[i] - t[i];
                abs_sum += d.abs();
                sq_sum += d * d;
            }
            let mae_oracle = abs_sum / n as f64;
            let rmse_oracle = (sq_sum / n as f64).sqrt();
            assert!((mae(&p, &t).unwrap() - mae_oracle).abs() < 1e-12);
            assert!((rmse(&p, &t).unwrap() - rmse_oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_squared_equals_mse_loss() {
        let mut rng = crate::hash::stream_rng(3, "metrics-mse");
        let p: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let r = rmse(&p, &t).unwrap();
        let (loss, _) = crate::train::mse_loss_with_grad(
            &ndarray::Array1::from(p.clone()),
            &ndarray::Array1::from(t.clone()),
        )
        .unwrap();
        assert!((r * r - loss).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[], &[]).is_err());
        assert!(mae(&[0.1], &[0.1, 0.2]).is_err());
        assert!(rmse(&[0.1, 0.2], &[0.1]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(
            pairs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..60)
        ) {
            let p: Vec<f64> = pairs.iter().map(|(a, _)| *a).collect();
            let t: Vec<f64> = pairs.iter().map(|(_, b)| *b).collect();
            let m = mae(&p, &t).unwrap();
            let r = rmse(&p, &t).unwrap();
            prop_assert!(r >= m - 1e-12, "rmse {r} < mae {m}");
        }
    }
}
