//! Dataset construction: pairing camera frames with sensor readings,
//! rebalancing skewed labels, station-grouped splitting, preprocessing,
//! and training-time augmentation.

pub mod augment;
pub mod grip;
pub mod loader;
pub mod manifest;
pub mod pair;
pub mod preprocess;
pub mod resample;
pub mod split;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub use augment::{augment, augment_with, AugmentParams, CROP_PAD, JITTER_SCALE, MAX_ROTATION_DEG};
pub use grip::{aggregate_readings, friction_to_grip, grip_to_friction, GRIP_MAX, GRIP_MIN};
pub use loader::{load_split, BatchStream, SplitData};
pub use manifest::{load_manifest, read_manifest, save_manifest, write_manifest, MANIFEST_VERSION};
pub use pair::{pair_and_label, ImageRecord, PairingOutcome, DEFAULT_TOLERANCE_MINUTES};
pub use preprocess::{
    compute_normalization, decode_image, load_image, normalize, preprocess, preprocess_to,
    resize_to_unit, Normalization, StatsAccumulator,
};
pub use resample::{friction_histogram, weighted_resample};
pub use split::{check_split_leakage, split_by_station, SPLIT_FRACTIONS};

/// One optical friction-sensor measurement. `grip` is the raw sensor value;
/// values outside the measurement range are clamped (and counted) during
/// labeling, not rejected here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripReading {
    pub station_id: String,
    pub timestamp: DateTime<Utc>,
    pub grip: f64,
    pub sensor_index: u8,
}

/// A camera frame with its regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub image_ref: String,
    pub camera_station_id: String,
    pub weather_station_id: String,
    pub timestamp: DateTime<Utc>,
    pub friction_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|s| s.tag() == tag)
            .copied()
            .ok_or_else(|| CoreError::Manifest(format!("unknown split tag {tag:?}")))
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// The full description of a prepared dataset: ordered samples, the
/// station-to-split partition, and train-split image statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub samples: Vec<LabeledSample>,
    pub split_assignment: BTreeMap<String, Split>,
    pub normalization: Normalization,
    pub seed: u64,
}

impl DatasetManifest {
    /// Every sample's camera station must be assigned to exactly one split
    /// and the split station sets must be pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        for sample in &self.samples {
            if !self.split_assignment.contains_key(&sample.camera_station_id) {
                return Err(CoreError::Manifest(format!(
                    "sample {} references station {} with no split assignment",
                    sample.image_ref, sample.camera_station_id
                )));
            }
            if !sample.friction_factor.is_finite()
                || !(0.0..=1.0).contains(&sample.friction_factor)
            {
                return Err(CoreError::Manifest(format!(
                    "sample {} has friction factor {} outside [0, 1]",
                    sample.image_ref, sample.friction_factor
                )));
            }
        }
        check_split_leakage(&self.samples, &self.split_assignment)
    }

    pub fn split_of(&self, sample: &LabeledSample) -> Result<Split> {
        self.split_assignment
            .get(&sample.camera_station_id)
            .copied()
            .ok_or_else(|| {
                CoreError::Manifest(format!(
                    "station {} has no split assignment",
                    sample.camera_station_id
                ))
            })
    }

    pub fn split_samples(&self, split: Split) -> Vec<&LabeledSample> {
        self.samples
            .iter()
            .filter(|s| self.split_assignment.get(&s.camera_station_id) == Some(&split))
            .collect()
    }

    pub fn split_stations(&self, split: Split) -> BTreeSet<&str> {
        self.samples
            .iter()
            .filter(|s| self.split_assignment.get(&s.camera_station_id) == Some(&split))
            .map(|s| s.camera_station_id.as_str())
            .collect()
    }
}
