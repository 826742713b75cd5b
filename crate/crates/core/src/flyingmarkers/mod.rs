//! Synthetic marker/reference pairs with exact dense ground truth.
//!
//! A marker is warped by a random affine, homography or thin-plate-spline
//! transform, hard-pasted into a background, and the transform is evaluated
//! at every marker pixel to produce the ground-truth flow.

mod config;
mod dataset;
mod sampler;
mod synth;

pub use config::SamplerConfig;
pub use dataset::{
    build_sample, derive_seed, generate_dataset, list_images, sample_id, splitmix64, DatasetManifest,
    DatasetSample, SampleRecord, FORMAT_VERSION, SAMPLE_ATTEMPTS,
};
pub use sampler::{
    min_jacobian_det, quad_angles, sample_affine, sample_homography, sample_kind, sample_tps, sample_transform,
    sample_transform_of_kind, FOLD_GRID, PLACEMENT_RETRIES, QUAD_DRAWS, TPS_RETRIES,
};
pub use synth::{synthesize_sample, transform_flow, Synthesis};
