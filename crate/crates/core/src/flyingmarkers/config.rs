use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator settings. Every field has a default, so partial JSON configs work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Rotation angle range in radians.
    pub rotation_range: [f64; 2],
    /// Shear angle range in radians.
    pub shear_range: [f64; 2],
    /// Uniform scale factor range.
    pub scale_range: [f64; 2],
    /// Additive perturbation range for each spline parameter (normalized units).
    pub tps_perturbation: [f64; 2],
    /// Relative weights of affine, homography and spline draws.
    pub kind_weights: [f64; 3],
    /// Reference canvas `[width, height]`.
    pub canvas_size: [u32; 2],
    /// Markers are resized to `[width, height]` before warping.
    pub marker_size: [u32; 2],
    /// Fraction of the free placement slack used for random affine
    /// translation; 0 centers the marker.
    pub placement_jitter: f64,
    /// Smallest allowed interior angle of a sampled homography quad, degrees.
    pub min_quad_angle_deg: f64,
    /// Number of samples to generate.
    pub count: usize,
    pub seed: u64,
    pub name: String,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            rotation_range: [-FRAC_PI_3, FRAC_PI_3],
            shear_range: [-FRAC_PI_2, FRAC_PI_2],
            scale_range: [0.75, 1.25],
            tps_perturbation: [-0.5, 0.5],
            kind_weights: [1.0, 1.0, 1.0],
            canvas_size: [640, 480],
            marker_size: [320, 240],
            placement_jitter: 1.0,
            min_quad_angle_deg: 20.0,
            count: 100,
            seed: 0,
            name: "flyingmarkers".into(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("rotation_range", self.rotation_range),
            ("shear_range", self.shear_range),
            ("scale_range", self.scale_range),
            ("tps_perturbation", self.tps_perturbation),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::InvalidInput(format!("{name} must be a finite [lo, hi] with lo <= hi")));
            }
        }
        if self.scale_range[0] <= 0.0 {
            return Err(Error::InvalidInput("scale_range must be positive".into()));
        }
        if self.kind_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.kind_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidInput(
                "kind_weights must be nonnegative and not all zero".into(),
            ));
        }
        if self.canvas_size.iter().chain(&self.marker_size).any(|&v| v < 2) {
            return Err(Error::InvalidInput("canvas and marker sizes must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.placement_jitter) {
            return Err(Error::InvalidInput("placement_jitter must lie in [0, 1]".into()));
        }
        if !(0.0..90.0).contains(&self.min_quad_angle_deg) {
            return Err(Error::InvalidInput("min_quad_angle_deg must lie in [0, 90)".into()));
        }
        Ok(())
    }

    pub fn canvas(&self) -> (u32, u32) {
        (self.canvas_size[0], self.canvas_size[1])
    }

    pub fn marker(&self) -> (u32, u32) {
        (self.marker_size[0], self.marker_size[1])
    }
}
