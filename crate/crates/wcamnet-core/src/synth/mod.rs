//! Procedural road scenes with a controllable friction signal, plus a
//! generator that packages them as a labeled, split dataset.
//!
//! The renderer encodes friction redundantly in the road region — mean
//! luminance (high friction is dark), local contrast, and fine spatial
//! texture energy all vary monotonically with the label — while every
//! pixel outside the road is friction-independent by construction, so a
//! model can only solve the task by reading the road surface.

mod dataset;
mod scene;

pub use dataset::{generate_dataset, sample_frictions, SynthConfig};
pub use scene::{generate_scene, is_road, road_luminance, SceneSpec};
