//! Station-grouped train/val/test partitioning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{CoreError, Result};
use crate::hash::stream_rng;

use super::{LabeledSample, Split};

/// Target train/val/test sample-mass fractions.
pub const SPLIT_FRACTIONS: (f64, f64, f64) = (0.50, 0.15, 0.35);

/// Assign every camera station wholly to one split so realized sample
/// fractions approximate the targets: stations are taken largest first and
/// placed into the split with the largest remaining sample deficit. The seed
/// only reorders equal-sized stations.
pub fn split_by_station(
    samples: &[LabeledSample],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<BTreeMap<String, Split>> {
    let parts = [fractions.0, fractions.1, fractions.2];
    if parts.iter().any(|&f| !(f > 0.0)) {
        return Err(CoreError::config("split fractions must all be positive"));
    }
    if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(CoreError::config(format!(
            "split fractions {parts:?} must sum to 1"
        )));
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.camera_station_id.as_str()).or_default() += 1;
    }
    if counts.len() < Split::ALL.len() {
        return Err(CoreError::invalid(format!(
            "{} distinct stations cannot fill {} splits",
            counts.len(),
            Split::ALL.len()
        )));
    }

    let mut stations: Vec<(&str, usize)> = counts.into_iter().collect();
    stations.shuffle(&mut stream_rng(seed, "station-split"));
    stations.sort_by_key(|&(_, count)| std::cmp::Reverse(count)); // stable: ties keep shuffled order

    let total: usize = samples.len();
    let targets = parts.map(|f| f * total as f64);
    let mut mass = [0f64; 3];
    let mut assignment = BTreeMap::new();
    for (station, count) in stations {
        let mut pick = 0;
        for i in 1..3 {
            if targets[i] - mass[i] > targets[pick] - mass[pick] {
                pick = i;
            }
        }
        mass[pick] += count as f64;
        assignment.insert(station.to_string(), Split::ALL[pick]);
    }
    Ok(assignment)
}

/// Exhaustive leakage check: every sample's station must be assigned, and no
/// station may contribute samples to two splits (immediate from a single
/// assignment per station, re-verified over the concrete sample list).
pub fn check_split_leakage(
    samples: &[LabeledSample],
    assignment: &BTreeMap<String, Split>,
) -> Result<()> {
    let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
    for s in samples {
        let split = assignment.get(&s.camera_station_id).ok_or_else(|| {
            CoreError::Manifest(format!(
                "station {} has no split assignment",
                s.camera_station_id
            ))
        })?;
        match seen.insert(s.camera_station_id.as_str(), *split) {
            Some(prev) if prev != *split => {
                return Err(CoreError::Manifest(format!(
                    "station {} appears in both {} and {}",
                    s.camera_station_id, prev, split
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::sample;
    use proptest::prelude::*;

    fn station_samples(counts: &[(&str, usize)]) -> Vec<LabeledSample> {
        let mut out = Vec::new();
        for &(station, n) in counts {
            for k in 0..n {
                let mut s = sample(station, 0.5);
                s.image_ref = format!("img/{station}-{k}.png");
                out.push(s);
            }
        }
        out
    }

    #[test]
    fn greedy_assignment_on_three_stations() {
        let data = station_samples(&[("a", 100), ("b", 60), ("c", 40)]);
        let out = split_by_station(&data, SPLIT_FRACTIONS, 0).unwrap();
        assert_eq!(out["a"], Split::Train);
        assert_eq!(out["b"], Split::Test);
        assert_eq!(out["c"], Split::Val);
    }

    #[test]
    fn too_few_stations_is_an_error() {
        let data = station_samples(&[("a", 10), ("b", 10)]);
        assert!(split_by_station(&data, SPLIT_FRACTIONS, 0).is_err());
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let data = station_samples(&[("a", 4), ("b", 4), ("c", 4)]);
        assert!(split_by_station(&data, (0.5, 0.5, 0.5), 0).is_err());
        assert!(split_by_station(&data, (1.0, 0.0, 0.0), 0).is_err());
    }

    #[test]
    fn same_seed_reproduces_assignment() {
        let data = station_samples(&[("a", 9), ("b", 9), ("c", 9), ("d", 9), ("e", 9)]);
        let x = split_by_station(&data, SPLIT_FRACTIONS, 5).unwrap();
        let y = split_by_station(&data, SPLIT_FRACTIONS, 5).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn leakage_check_catches_conflicting_samples() {
        let data = station_samples(&[("a", 2), ("b", 2), ("c", 2)]);
        let mut assignment = split_by_station(&data, SPLIT_FRACTIONS, 0).unwrap();
        check_split_leakage(&data, &assignment).unwrap();

        assignment.remove("b");
        assert!(check_split_leakage(&data, &assignment).is_err());
    }

    proptest! {
        /// Partition property over random station configurations: every
        /// station assigned exactly once, splits disjoint by construction.
        /// When no single station outweighs the smallest split target, every
        /// split is populated (a station starving the 15% split would imply
        /// two splits overfilled past targets that sum to less than 1).
        #[test]
        fn random_configurations_partition_cleanly(
            counts in proptest::collection::vec(1usize..80, 3..24),
            seed in 0u64..1_000,
        ) {
            let named: Vec<(String, usize)> = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("st-{i:02}"), c))
                .collect();
            let borrowed: Vec<(&str, usize)> =
                named.iter().map(|(n, c)| (n.as_str(), *c)).collect();
            let data = station_samples(&borrowed);
            let assignment = split_by_station(&data, SPLIT_FRACTIONS, seed).unwrap();

            prop_assert_eq!(assignment.len(), named.len());
            check_split_leakage(&data, &assignment).unwrap();

            let total: usize = counts.iter().sum();
            let biggest = *counts.iter().max().unwrap();
            if (biggest as f64) <= 0.15 * total as f64 {
                for split in Split::ALL {
                    prop_assert!(
                        assignment.values().any(|&s| s == split),
                        "{split} left empty across {} stations", named.len()
                    );
                }
            }
        }

        /// Realized sample mass tracks the targets to within the largest
        /// single station's mass.
        #[test]
        fn realized_fractions_track_targets(
            counts in proptest::collection::vec(1usize..40, 6..30),
            seed in 0u64..1_000,
        ) {
            let named: Vec<(String, usize)> = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("st-{i:02}"), c))
                .collect();
            let borrowed: Vec<(&str, usize)> =
                named.iter().map(|(n, c)| (n.as_str(), *c)).collect();
            let data = station_samples(&borrowed);
            let assignment = split_by_station(&data, SPLIT_FRACTIONS, seed).unwrap();

            let total: usize = counts.iter().sum();
            let biggest = *counts.iter().max().unwrap() as f64;
            let targets = [0.50, 0.15, 0.35];
            for (i, split) in Split::ALL.iter().enumerate() {
                let mass: usize = named
                    .iter()
                    .filter(|(n, _)| assignment[n.as_str()] == *split)
                    .map(|(_, c)| *c)
                    .sum();
                let err = (mass as f64 - targets[i] * total as f64).abs();
                prop_assert!(
                    err <= biggest + 1e-9,
                    "{split} off target by {err} with biggest station {biggest}"
                );
            }
        }
    }
}
