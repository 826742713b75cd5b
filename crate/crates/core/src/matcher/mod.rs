//! Reference correspondence estimators.
//!
//! Two pipelines produce [`FlowField`]s for the benchmark:
//!
//! - a sparse baseline: Harris corners, ZNCC patch descriptors with mutual
//!   nearest-neighbour matching, RANSAC homography, then the homography
//!   rasterized over the marker grid;
//! - a dense coarse-to-fine ZNCC matcher over Gaussian pyramids.
//!
//! External estimators plug in by writing `.flo` files.

mod dense;
mod descriptor;
pub(crate) mod harris;
mod ransac;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::imaging::FlowField;

pub use dense::{dense_match, dense_match_scored, DenseConfig, DenseMatch};
pub use descriptor::{match_descriptors, patch_descriptor, DESCRIPTOR_RADIUS, RATIO_TEST};
pub use harris::{detect_corners, harris_response, HarrisConfig};
pub use ransac::{flow_from_homography, ransac_fit, ransac_homography, RansacConfig, RansacFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub location: Point2,
    pub response: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub marker: Keypoint,
    pub reference: Keypoint,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub matches: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Builds a set from raw point pairs (unit response, zero distance).
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Point2, Point2)>) -> Self {
        let kp = |p| Keypoint {
            location: p,
            response: 1.0,
        };
        Self {
            matches: pairs
                .into_iter()
                .map(|(a, b)| Match {
                    marker: kp(a),
                    reference: kp(b),
                    distance: 0.0,
                })
                .collect(),
        }
    }
}

/// Why an estimator produced no flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum FailureReason {
    InsufficientMatches { found: usize },
    InsufficientInliers { found: usize },
    DegenerateModel { detail: String },
    NoEstimate { detail: String },
}

impl FailureReason {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InsufficientMatches { .. } => "insufficient_matches",
            Self::InsufficientInliers { .. } => "insufficient_inliers",
            Self::DegenerateModel { .. } => "degenerate_model",
            Self::NoEstimate { .. } => "no_estimate",
        }
    }
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::InsufficientMatches { found } => write!(f, "insufficient matches ({found} < 4)"),
            Self::InsufficientInliers { found } => write!(f, "insufficient inliers ({found} < 4)"),
            Self::DegenerateModel { detail } => write!(f, "degenerate model: {detail}"),
            Self::NoEstimate { detail } => write!(f, "no estimate: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchOutcome {
    Flow(FlowField),
    Failed(FailureReason),
}

impl MatchOutcome {
    pub fn flow(&self) -> Option<&FlowField> {
        match self {
            Self::Flow(f) => Some(f),
            Self::Failed(_) => None,
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, Self::Failed(_))
    }
}
