//! Road-surface friction estimation from webcam imagery.
//!
//! This crate holds the full modeling stack: dataset construction from
//! paired weather-station readings and camera frames, the fusion regression
//! network and its baselines, deterministic training, and evaluation
//! utilities. Everything is seeded explicitly; repeated runs with the same
//! seed produce bit-identical results.

pub mod dataset;
pub mod elem;
pub mod error;
pub mod eval;
pub mod hash;
pub mod model;
pub mod nn;
pub mod synth;
pub mod train;

pub use elem::Elem;
pub use error::{CoreError, Result};
