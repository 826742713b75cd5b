use std::path::PathBuf;

use crate::imaging::FlowField;
use crate::matcher::{
    dense_match, detect_corners, match_descriptors, ransac_homography, DenseConfig, FailureReason, MatchOutcome,
    RansacConfig,
};

use super::BenchmarkSample;

/// Anything that maps a marker into a reference image.
///
/// Estimators see the marker and the (possibly poorly lit) reference only;
/// twins and ground truth are for scoring, except in the oracle.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &str;
    fn estimate(&self, sample: &BenchmarkSample) -> MatchOutcome;
}

/// Returns the ground-truth flow.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleEstimator;

impl Estimator for OracleEstimator {
    fn name(&self) -> &str {
        "oracle"
    }

    fn estimate(&self, sample: &BenchmarkSample) -> MatchOutcome {
        match &sample.gt_flow {
            Some(f) => MatchOutcome::Flow(f.clone()),
            None => MatchOutcome::Failed(FailureReason::NoEstimate {
                detail: "sample has no ground truth".into(),
            }),
        }
    }
}

/// Always fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailingEstimator;

impl Estimator for FailingEstimator {
    fn name(&self) -> &str {
        "failing"
    }

    fn estimate(&self, _: &BenchmarkSample) -> MatchOutcome {
        MatchOutcome::Failed(FailureReason::NoEstimate {
            detail: "estimator never answers".into(),
        })
    }
}

/// Harris + ZNCC descriptors + RANSAC homography.
#[derive(Debug, Clone, Copy)]
pub struct HomographyEstimator {
    pub max_corners: usize,
    pub ransac: RansacConfig,
}

impl Default for HomographyEstimator {
    fn default() -> Self {
        Self {
            max_corners: 1000,
            ransac: RansacConfig::default(),
        }
    }
}

impl Estimator for HomographyEstimator {
    fn name(&self) -> &str {
        "homography"
    }

    fn estimate(&self, sample: &BenchmarkSample) -> MatchOutcome {
        let ka = detect_corners(&sample.marker, self.max_corners);
        let kb = detect_corners(&sample.reference, self.max_corners);
        let matches = match_descriptors(&sample.marker, &ka, &sample.reference, &kb);
        log::debug!("{}: {} / {} corners, {} matches", sample.id, ka.len(), kb.len(), matches.len());
        ransac_homography(&matches, &self.ransac, sample.marker.size())
    }
}

/// Coarse-to-fine ZNCC matcher.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseEstimator {
    pub config: DenseConfig,
}

impl Estimator for DenseEstimator {
    fn name(&self) -> &str {
        "dense"
    }

    fn estimate(&self, sample: &BenchmarkSample) -> MatchOutcome {
        let flow = dense_match(&sample.marker, &sample.reference, &self.config);
        if flow.valid_count() == 0 {
            return MatchOutcome::Failed(FailureReason::NoEstimate {
                detail: "no pixel passed the correlation test".into(),
            });
        }
        MatchOutcome::Flow(flow)
    }
}

/// Reads precomputed predictions from `<dir>/<id>.flo`; a missing file is a failure.
#[derive(Debug, Clone)]
pub struct FlowDirEstimator {
    pub dir: PathBuf,
    pub label: String,
}

impl FlowDirEstimator {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            label: "flowdir".into(),
        }
    }
}

impl Estimator for FlowDirEstimator {
    fn name(&self) -> &str {
        &self.label
    }

    fn estimate(&self, sample: &BenchmarkSample) -> MatchOutcome {
        let path = self.dir.join(format!("{}.flo", sample.id.replace('/', "_")));
        match FlowField::read_flo(&path) {
            Ok(f) => MatchOutcome::Flow(f),
            Err(e) => MatchOutcome::Failed(FailureReason::NoEstimate {
                detail: format!("{}: {e}", path.display()),
            }),
        }
    }
}
