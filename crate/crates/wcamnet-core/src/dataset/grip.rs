//! Sensor grip values and the friction-factor label scale.

use crate::error::{CoreError, Result};

use super::GripReading;

/// Optical sensor measurement range.
pub const GRIP_MIN: f64 = 0.09;
pub const GRIP_MAX: f64 = 0.82;

/// Rescale a grip reading onto the [0, 1] friction-factor scale. Inputs are
/// clamped to the sensor range first, so the endpoints map exactly to 0 and 1.
pub fn grip_to_friction(grip: f64) -> Result<f64> {
    if !grip.is_finite() {
        return Err(CoreError::invalid(format!("non-finite grip value {grip}")));
    }
    let g = grip.clamp(GRIP_MIN, GRIP_MAX);
    Ok((g - GRIP_MIN) / (GRIP_MAX - GRIP_MIN))
}

/// Inverse of [`grip_to_friction`] on [0, 1]; exists so the mapping can be
/// verified to round-trip.
pub fn friction_to_grip(friction: f64) -> Result<f64> {
    if !friction.is_finite() {
        return Err(CoreError::invalid(format!(
            "non-finite friction value {friction}"
        )));
    }
    let f = friction.clamp(0.0, 1.0);
    Ok(GRIP_MIN + f * (GRIP_MAX - GRIP_MIN))
}

/// Mean grip over the 1–2 sensors of one station at one timestamp.
pub fn aggregate_readings(readings: &[GripReading]) -> Result<f64> {
    let first = readings
        .first()
        .ok_or_else(|| CoreError::MissingData("no readings to aggregate".into()))?;
    if readings.len() > 2 {
        return Err(CoreError::invalid(format!(
            "{} readings for station {} at {}; stations carry at most two sensors",
            readings.len(),
            first.station_id,
            first.timestamp
        )));
    }
    for r in &readings[1..] {
        if r.station_id != first.station_id || r.timestamp != first.timestamp {
            return Err(CoreError::invalid(format!(
                "readings from ({}, {}) and ({}, {}) cannot be aggregated together",
                first.station_id, first.timestamp, r.station_id, r.timestamp
            )));
        }
    }
    Ok(readings.iter().map(|r| r.grip).sum::<f64>() / readings.len() as f64)
}
