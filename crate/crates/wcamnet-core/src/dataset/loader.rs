//! Split materialization and deterministic batch iteration.
//!
//! Images are cached as resized raw bytes; batches are assembled on demand
//! (scale → optional augmentation → normalization). Epoch order and
//! per-sample augmentation draw from (seed, epoch, sample index) only, so
//! the multiset of augmented samples per epoch is independent of batch size
//! and iteration interleaving.

use std::path::Path;

use ndarray::{s, Array1, Array3, Array4};
use rand::seq::SliceRandom;

use crate::error::{CoreError, Result};
use crate::hash::{sample_rng, stream_rng};

use super::augment::{augment_with, AugmentParams};
use super::preprocess::{load_image, normalize, resize_to_unit, Normalization, StatsAccumulator};
use super::{DatasetManifest, Split};

pub struct SplitData {
    pub images: Vec<Array3<u8>>,
    pub labels: Vec<f32>,
    pub paths: Vec<String>,
    pub side: usize,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn unit_image(&self, i: usize) -> Array3<f32> {
        self.images[i].mapv(|v| v as f32 / 255.0)
    }

    /// Per-channel statistics over this split's cached pixels.
    pub fn normalization(&self) -> Result<Normalization> {
        let mut acc = StatsAccumulator::new();
        for i in 0..self.len() {
            acc.add(&self.unit_image(i).view());
        }
        acc.finish()
    }
}

/// Decode, resize, and cache every sample of `split`. Image paths resolve
/// relative to `image_root`.
pub fn load_split(
    manifest: &DatasetManifest,
    image_root: &Path,
    split: Split,
    side: usize,
) -> Result<SplitData> {
    manifest.validate()?;
    let mut data = SplitData {
        images: Vec::new(),
        labels: Vec::new(),
        paths: Vec::new(),
        side,
    };
    for sample in manifest.split_samples(split) {
        let img = load_image(&image_root.join(&sample.image_ref))?;
        let unit = resize_to_unit(&img.view(), side)?;
        data.images
            .push(unit.mapv(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        data.labels.push(sample.friction_factor as f32);
        data.paths.push(sample.image_ref.clone());
    }
    Ok(data)
}

/// Deterministic batch producer over one split.
pub struct BatchStream<'a> {
    data: &'a SplitData,
    norm: Normalization,
    batch_size: usize,
    seed: u64,
    augment: bool,
    shuffle: bool,
}

impl<'a> BatchStream<'a> {
    pub fn new(
        data: &'a SplitData,
        norm: Normalization,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(CoreError::config("split contains no samples"));
        }
        if batch_size == 0 {
            return Err(CoreError::invalid("batch size must be at least 1"));
        }
        norm.validate()?;
        Ok(BatchStream { data, norm, batch_size, seed, augment: false, shuffle: false })
    }

    pub fn with_augment(mut self, on: bool) -> Self {
        self.augment = on;
        self
    }

    pub fn with_shuffle(mut self, on: bool) -> Self {
        self.shuffle = on;
        self
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.data.len().div_ceil(self.batch_size)
    }

    pub fn epoch(&self, epoch: u64) -> EpochBatches<'_> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        if self.shuffle {
            order.shuffle(&mut stream_rng(self.seed, &format!("shuffle-{epoch}")));
        }
        EpochBatches { stream: self, order, epoch, cursor: 0 }
    }

    /// One fully prepared sample: unit scale, per-sample seeded augmentation
    /// when enabled, then normalization.
    fn prepared(&self, epoch: u64, index: usize) -> Array3<f32> {
        let mut img = self.data.unit_image(index);
        if self.augment {
            let mut rng = sample_rng(self.seed, epoch, index as u64);
            img = augment_with(&img.view(), &AugmentParams::sample(&mut rng));
        }
        normalize(&mut img, &self.norm);
        img
    }
}

pub struct EpochBatches<'a> {
    stream: &'a BatchStream<'a>,
    order: Vec<usize>,
    epoch: u64,
    cursor: usize,
}

impl Iterator for EpochBatches<'_> {
    /// (images, labels, dataset indices) for one batch.
    type Item = (Array4<f32>, Array1<f32>, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.stream.batch_size).min(self.order.len());
        let indices: Vec<usize> = self.order[self.cursor..end].to_vec();
        self.cursor = end;

        let side = self.stream.data.side;
        let mut images = Array4::<f32>::zeros((indices.len(), 3, side, side));
        let mut labels = Array1::<f32>::zeros(indices.len());
        for (b, &i) in indices.iter().enumerate() {
            images
                .slice_mut(s![b, .., .., ..])
                .assign(&self.stream.prepared(self.epoch, i));
            labels[b] = self.stream.data.labels[i];
        }
        Some((images, labels, indices))
    }
}
