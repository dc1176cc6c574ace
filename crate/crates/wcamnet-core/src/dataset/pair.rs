//! Image-to-reading temporal alignment and labeling.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeDelta, Utc};

use crate::error::{CoreError, Result};

use super::grip::{aggregate_readings, grip_to_friction, GRIP_MAX, GRIP_MIN};
use super::{GripReading, LabeledSample};

/// Half the nominal 20-minute collection interval, so an image can match at
/// most one reading cycle.
pub const DEFAULT_TOLERANCE_MINUTES: i64 = 10;

/// A camera frame before labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub path: String,
    pub camera_station_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingOutcome {
    pub samples: Vec<LabeledSample>,
    /// Images with no aggregated reading inside the tolerance window.
    pub dropped: usize,
    /// Raw grip values outside the sensor range, clamped before averaging.
    pub clamped: usize,
}

/// Label every image with the nearest-in-time aggregated reading of its
/// paired weather station. `pairing` maps camera station → weather station;
/// a camera station absent from it is a configuration error. Unmatched
/// images are dropped and counted, never silently lost.
pub fn pair_and_label(
    images: &[ImageRecord],
    readings: &[GripReading],
    pairing: &BTreeMap<String, String>,
    tolerance: TimeDelta,
) -> Result<PairingOutcome> {
    if tolerance < TimeDelta::zero() {
        return Err(CoreError::invalid("alignment tolerance must be non-negative"));
    }

    // (station, timestamp) → sensor readings, clamped into range with a count.
    let mut clamped = 0usize;
    let mut grouped: BTreeMap<(&str, DateTime<Utc>), Vec<GripReading>> = BTreeMap::new();
    for r in readings {
        if !r.grip.is_finite() {
            return Err(CoreError::invalid(format!(
                "non-finite grip from station {} at {}",
                r.station_id, r.timestamp
            )));
        }
        let mut clean = r.clone();
        if r.grip < GRIP_MIN || r.grip > GRIP_MAX {
            clamped += 1;
            clean.grip = r.grip.clamp(GRIP_MIN, GRIP_MAX);
        }
        grouped
            .entry((r.station_id.as_str(), r.timestamp))
            .or_default()
            .push(clean);
    }

    // Per-station timeline of aggregated grips, sorted by BTreeMap order.
    let mut timelines: BTreeMap<&str, Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for ((station, at), group) in &grouped {
        let mean = aggregate_readings(group)?;
        timelines.entry(station).or_default().push((*at, mean));
    }

    let mut samples = Vec::new();
    let mut dropped = 0usize;
    for image in images {
        let weather = pairing.get(&image.camera_station_id).ok_or_else(|| {
            CoreError::config(format!(
                "camera station {} missing from the station pairing table",
                image.camera_station_id
            ))
        })?;
        let Some(timeline) = timelines.get(weather.as_str()) else {
            dropped += 1;
            continue;
        };
        match nearest(timeline, image.timestamp, tolerance) {
            Some(grip) => samples.push(LabeledSample {
                image_ref: image.path.clone(),
                camera_station_id: image.camera_station_id.clone(),
                weather_station_id: weather.clone(),
                timestamp: image.timestamp,
                friction_factor: grip_to_friction(grip)?,
            }),
            None => dropped += 1,
        }
    }

    Ok(PairingOutcome { samples, dropped, clamped })
}

/// Nearest timeline entry within tolerance; equidistant neighbours resolve
/// to the earlier one.
fn nearest(
    timeline: &[(DateTime<Utc>, f64)],
    at: DateTime<Utc>,
    tolerance: TimeDelta,
) -> Option<f64> {
    let idx = timeline.partition_point(|(t, _)| *t < at);
    let mut best: Option<(TimeDelta, f64)> = None;
    for candidate in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
        if let Some((t, grip)) = timeline.get(candidate) {
            let dist = (at - *t).abs();
            if dist <= tolerance && best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, *grip));
            }
        }
    }
    best.map(|(_, grip)| grip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::ts;

    fn image(minute: i64) -> ImageRecord {
        ImageRecord {
            path: format!("cam-1/{minute}.png"),
            camera_station_id: "cam-1".into(),
            timestamp: ts(minute),
        }
    }

    fn reading(minute: i64, grip: f64, sensor_index: u8) -> GripReading {
        GripReading {
            station_id: "w-1".into(),
            timestamp: ts(minute),
            grip,
            sensor_index,
        }
    }

    fn table() -> BTreeMap<String, String> {
        [("cam-1".to_string(), "w-1".to_string())].into_iter().collect()
    }

    fn tol() -> TimeDelta {
        TimeDelta::minutes(DEFAULT_TOLERANCE_MINUTES)
    }

    #[test]
    fn matches_nearest_reading_within_tolerance() {
        let out = pair_and_label(
            &[image(0)],
            &[reading(-2, 0.30, 1), reading(19, 0.70, 1)],
            &table(),
            tol(),
        )
        .unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.dropped, 0);
        let expected = grip_to_friction(0.30).unwrap();
        assert_eq!(out.samples[0].friction_factor, expected);
    }

    #[test]
    fn drops_images_outside_tolerance() {
        let out = pair_and_label(&[image(0)], &[reading(30, 0.5, 1)], &table(), tol()).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn labels_compose_aggregation_and_rescale() {
        // Two sensors (0.20, 0.40) → mean 0.30 → (0.30 − 0.09) / 0.73.
        let images = [image(0), image(20), image(40)];
        let readings = [
            reading(0, 0.20, 1),
            reading(0, 0.40, 2),
            reading(20, 0.30, 1),
            reading(40, 0.82, 1),
        ];
        let out = pair_and_label(&images, &readings, &table(), tol()).unwrap();
        assert_eq!(out.samples.len(), 3);
        assert!((out.samples[0].friction_factor - 0.287671232876712).abs() < 1e-12);
        assert!((out.samples[1].friction_factor - 0.287671232876712).abs() < 1e-12);
        assert_eq!(out.samples[2].friction_factor, 1.0);
        assert_eq!(out.samples[0].weather_station_id, "w-1");
    }

    #[test]
    fn unknown_camera_station_is_a_config_error() {
        let mut img = image(0);
        img.camera_station_id = "cam-9".into();
        let err = pair_and_label(&[img], &[reading(0, 0.5, 1)], &table(), tol());
        assert!(matches!(err, Err(CoreError::Config(_))));
    }

    #[test]
    fn station_without_readings_drops_quietly() {
        let out = pair_and_label(&[image(0)], &[], &table(), tol()).unwrap();
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn out_of_range_grips_clamp_and_count() {
        let out = pair_and_label(
            &[image(0)],
            &[reading(0, 0.05, 1), reading(0, 0.09, 2)],
            &table(),
            tol(),
        )
        .unwrap();
        assert_eq!(out.clamped, 1);
        // both readings clamp/sit at the range floor → label 0
        assert_eq!(out.samples[0].friction_factor, 0.0);
    }

    #[test]
    fn equidistant_neighbours_resolve_to_the_earlier() {
        let out = pair_and_label(
            &[image(0)],
            &[reading(-5, 0.20, 1), reading(5, 0.60, 1)],
            &table(),
            tol(),
        )
        .unwrap();
        assert_eq!(
            out.samples[0].friction_factor,
            grip_to_friction(0.20).unwrap()
        );
    }
}
