//! Label-balancing resampler.
//!
//! Inverse-bin-frequency weighting gives every occupied friction bin the
//! same expected mass, so the draw is implemented directly as equal per-bin
//! quotas (with remainder and availability handling) plus a uniform
//! without-replacement draw inside each bin. This keeps per-bin counts at
//! their expectation for every seed instead of only on average.

use crate::error::{CoreError, Result};
use crate::hash::stream_rng;

use super::LabeledSample;

/// Equal-width bin over [0, 1]; friction 1.0 folds into the top bin.
pub(crate) fn bin_of(friction: f64, n_bins: usize) -> usize {
    ((friction * n_bins as f64) as usize).min(n_bins - 1)
}

/// Per-bin sample counts over `n_bins` equal-width bins on [0, 1].
pub fn friction_histogram(samples: &[LabeledSample], n_bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_bins];
    for s in samples {
        counts[bin_of(s.friction_factor, n_bins)] += 1;
    }
    counts
}

/// Draw `target_size` samples without replacement, weighting each sample by
/// the inverse occupancy of its friction bin. Capped at availability; the
/// result preserves input order.
pub fn weighted_resample(
    samples: &[LabeledSample],
    n_bins: usize,
    target_size: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if samples.is_empty() {
        return Err(CoreError::MissingData("no samples to resample".into()));
    }
    if n_bins < 2 {
        return Err(CoreError::invalid("resampling needs at least two bins"));
    }
    if target_size == 0 {
        return Err(CoreError::invalid("resample target size must be positive"));
    }

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, s) in samples.iter().enumerate() {
        if !s.friction_factor.is_finite() || !(0.0..=1.0).contains(&s.friction_factor) {
            return Err(CoreError::invalid(format!(
                "friction factor {} outside [0, 1]",
                s.friction_factor
            )));
        }
        buckets[bin_of(s.friction_factor, n_bins)].push(i);
    }
    let occupied: Vec<usize> = (0..n_bins).filter(|&b| !buckets[b].is_empty()).collect();
    let want = target_size.min(samples.len());
    let quota = flat_quotas(&occupied.iter().map(|&b| buckets[b].len()).collect::<Vec<_>>(), want);

    let mut rng = stream_rng(seed, "resample");
    let mut chosen: Vec<usize> = Vec::with_capacity(want);
    for (slot, &b) in occupied.iter().enumerate() {
        let picks = rand::seq::index::sample(&mut rng, buckets[b].len(), quota[slot]);
        chosen.extend(picks.iter().map(|k| buckets[b][k]));
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| samples[i].clone()).collect())
}

/// Flattest integer allocation of `want` draws over bins with the given
/// availabilities: equal base quotas, remainder to the fullest bins, then
/// capped quotas redistributed one draw at a time to the most spare bin.
fn flat_quotas(avail: &[usize], want: usize) -> Vec<usize> {
    let m = avail.len();
    let base = want / m;
    let rem = want % m;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(avail[i]));

    let mut quota = vec![base; m];
    for &i in order.iter().take(rem) {
        quota[i] += 1;
    }
    for i in 0..m {
        quota[i] = quota[i].min(avail[i]);
    }
    let mut shortfall = want - quota.iter().sum::<usize>();
    while shortfall > 0 {
        // most spare capacity first; ties to the lowest bin
        let i = (0..m)
            .max_by_key(|&i| (avail[i] - quota[i], std::cmp::Reverse(i)))
            .expect("bins exist");
        debug_assert!(quota[i] < avail[i], "want exceeds total availability");
        quota[i] += 1;
        shortfall -= 1;
    }
    quota
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::sample;
    use proptest::prelude::*;

    /// `counts[b]` samples placed in the middle of bin `b` of 10.
    fn dataset(counts: &[usize]) -> Vec<LabeledSample> {
        let mut out = Vec::new();
        for (b, &n) in counts.iter().enumerate() {
            for k in 0..n {
                let mut s = sample(&format!("st-{b}"), (b as f64 + 0.5) / 10.0);
                s.image_ref = format!("img/{b}-{k}.png");
                out.push(s);
            }
        }
        out
    }

    fn occupied_ratio(counts: &[usize]) -> f64 {
        let occ: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
        let max = *occ.iter().max().unwrap() as f64;
        let min = *occ.iter().min().unwrap() as f64;
        max / min
    }

    #[test]
    fn two_bin_example_balances_exactly_for_every_seed() {
        let data = dataset(&[90, 10]);
        let mut totals = [0usize; 2];
        for seed in 0..1000 {
            let out = weighted_resample(&data, 10, 20, seed).unwrap();
            let hist = friction_histogram(&out, 10);
            totals[0] += hist[0];
            totals[1] += hist[1];
            assert_eq!(out.len(), 20);
        }
        let mean0 = totals[0] as f64 / 1000.0;
        let mean1 = totals[1] as f64 / 1000.0;
        assert!((mean0 - 10.0).abs() <= 1.0, "bin 0 mean draw {mean0}");
        assert!((mean1 - 10.0).abs() <= 1.0, "bin 1 mean draw {mean1}");
    }

    #[test]
    fn uniform_input_stays_uniform() {
        let data = dataset(&[8, 8, 8, 8]);
        let out = weighted_resample(&data, 10, 16, 3).unwrap();
        assert_eq!(
            friction_histogram(&out, 10)[..4],
            [4, 4, 4, 4],
            "equal quotas on a uniform histogram"
        );
    }

    #[test]
    fn draw_is_without_replacement_and_order_preserving() {
        let data = dataset(&[30, 3]);
        let out = weighted_resample(&data, 10, 20, 11).unwrap();
        let mut refs: Vec<&str> = out.iter().map(|s| s.image_ref.as_str()).collect();
        let positions: Vec<usize> = refs
            .iter()
            .map(|r| data.iter().position(|s| s.image_ref == *r).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "input order kept");
        refs.dedup();
        assert_eq!(refs.len(), out.len(), "no duplicates");
    }

    #[test]
    fn same_seed_reproduces_and_target_caps_at_availability() {
        let data = dataset(&[5, 2, 1]);
        let a = weighted_resample(&data, 10, 100, 9).unwrap();
        let b = weighted_resample(&data, 10, 100, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8, "capped at the 8 available samples");
    }

    #[test]
    fn degenerate_arguments_are_rejected() {
        let data = dataset(&[4]);
        assert!(weighted_resample(&[], 10, 4, 0).is_err());
        assert!(weighted_resample(&data, 1, 4, 0).is_err());
        assert!(weighted_resample(&data, 10, 0, 0).is_err());
    }

    proptest! {
        /// Exact flattening whenever the target divides evenly over the
        /// occupied bins (integer granularity permits it).
        #[test]
        fn flattens_when_quota_is_integral(
            counts in proptest::collection::vec(0usize..40, 3..10),
            per_bin in 1usize..12,
            seed in 0u64..1000,
        ) {
            let occupied: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
            prop_assume!(occupied.len() >= 2);
            let want = per_bin * occupied.len();
            let total: usize = occupied.iter().sum();
            prop_assume!(want <= total);

            let data = dataset(&counts);
            let out = weighted_resample(&data, 10, want, seed).unwrap();
            prop_assert_eq!(out.len(), want);
            let after = friction_histogram(&out, 10);
            prop_assert!(occupied_ratio(&after) <= occupied_ratio(&counts) + 1e-12);
        }

        /// For any target: never exceeds a bin's input occupancy, never
        /// empties an occupied bin, and draws exactly min(target, total).
        #[test]
        fn occupancy_bounds_hold_for_any_target(
            counts in proptest::collection::vec(0usize..40, 2..10),
            target in 1usize..200,
            seed in 0u64..1000,
        ) {
            let total: usize = counts.iter().sum();
            prop_assume!(counts.iter().filter(|&&c| c > 0).count() >= 2);
            let data = dataset(&counts);
            let out = weighted_resample(&data, 10, target, seed).unwrap();
            prop_assert_eq!(out.len(), target.min(total));
            let after = friction_histogram(&out, 10);
            let occupied = counts.iter().filter(|&&c| c > 0).count();
            for b in 0..10 {
                let c = counts.get(b).copied().unwrap_or(0);
                prop_assert!(after[b] <= c, "bin {b} drew more than available");
                if c > 0 && target >= occupied {
                    prop_assert!(after[b] >= 1, "occupied bin {b} starved despite capacity");
                }
            }
        }

        /// Skewed inputs (ratio ≥ 2) flatten for any target size.
        #[test]
        fn skewed_inputs_always_flatten(
            small in 1usize..6,
            big in 12usize..60,
            extra in proptest::collection::vec(1usize..60, 0..6),
            target in 2usize..120,
            seed in 0u64..1000,
        ) {
            let mut counts = vec![big, small];
            counts.extend(extra);
            let data = dataset(&counts);
            let out = weighted_resample(&data, 10, target, seed).unwrap();
            let before = occupied_ratio(&counts);
            prop_assume!(before >= 2.0);
            let after = friction_histogram(&out, 10);
            prop_assert!(
                occupied_ratio(&after) <= before + 1e-12,
                "ratio grew: {:?} -> {:?}", counts, after
            );
        }
    }
}
