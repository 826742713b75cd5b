use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{homography_dlt, homography_from_four_points, Homography, Point2};
use crate::imaging::FlowField;

use super::{FailureReason, MatchOutcome, MatchSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Symmetric transfer error bound in pixels.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            inlier_threshold: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub homography: Homography,
    /// Indices into the match set, ascending.
    pub inliers: Vec<usize>,
    /// Best inlier count among the raw 4-point hypotheses.
    pub hypothesis_inliers: usize,
}

/// `sqrt(|H a - b|^2 + |H^-1 b - a|^2)`, infinite if either side fails.
fn symmetric_transfer(h: &Homography, hinv: &Homography, a: Point2, b: Point2) -> f64 {
    match (h.apply(a), hinv.apply(b)) {
        (Ok(fa), Ok(bb)) => {
            let (d1, d2) = (fa.distance(&b), bb.distance(&a));
            (d1 * d1 + d2 * d2).sqrt()
        }
        _ => f64::INFINITY,
    }
}

fn inliers_of(h: &Homography, pairs: &[(Point2, Point2)], thr: f64) -> Option<Vec<usize>> {
    let hinv = h.inverse().ok()?;
    Some(
        pairs
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| symmetric_transfer(h, &hinv, *a, *b) < thr)
            .map(|(i, _)| i)
            .collect(),
    )
}

fn sample_four(rng: &mut ChaCha8Rng, n: usize) -> [usize; 4] {
    let mut idx = [0usize; 4];
    let mut k = 0;
    while k < 4 {
        let c = rng.random_range(0..n);
        if !idx[..k].contains(&c) {
            idx[k] = c;
            k += 1;
        }
    }
    idx
}

/// Robust homography from matches: random 4-point hypotheses scored by
/// symmetric transfer error, then DLT refits on the consensus set.
pub fn ransac_fit(matches: &MatchSet, cfg: &RansacConfig) -> Result<RansacFit, FailureReason> {
    let pairs: Vec<(Point2, Point2)> = matches
        .matches
        .iter()
        .map(|m| (m.marker.location, m.reference.location))
        .collect();
    if pairs.len() < 4 {
        return Err(FailureReason::InsufficientMatches { found: pairs.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Homography, Vec<usize>)> = None;
    for _ in 0..cfg.iterations {
        let idx = sample_four(&mut rng, pairs.len());
        let src = idx.map(|i| pairs[i].0);
        let dst = idx.map(|i| pairs[i].1);
        let Ok(h) = homography_from_four_points(&src, &dst) else { continue };
        let Some(inl) = inliers_of(&h, &pairs, cfg.inlier_threshold) else { continue };
        if best.as_ref().is_none_or(|(_, b)| inl.len() > b.len()) {
            best = Some((h, inl));
        }
    }
    let Some((mut h, mut inliers)) = best else {
        return Err(FailureReason::DegenerateModel {
            detail: "every hypothesis was degenerate".into(),
        });
    };
    let hypothesis_inliers = inliers.len();
    if inliers.len() < 4 {
        return Err(FailureReason::InsufficientInliers { found: inliers.len() });
    }
    for _ in 0..10 {
        let src: Vec<_> = inliers.iter().map(|&i| pairs[i].0).collect();
        let dst: Vec<_> = inliers.iter().map(|&i| pairs[i].1).collect();
        let Ok(refit) = homography_dlt(&src, &dst) else { break };
        h = refit;
        // grow the consensus set while the refit keeps gaining support
        let Some(next) = inliers_of(&h, &pairs, cfg.inlier_threshold) else { break };
        if next.len() <= inliers.len() {
            break;
        }
        inliers = next;
    }
    Ok(RansacFit {
        homography: h,
        inliers,
        hypothesis_inliers,
    })
}

/// Rasterizes `h` over a `width x height` marker grid. Pixels whose
/// homogeneous scale is not positive are invalid.
pub fn flow_from_homography(h: &Homography, width: usize, height: usize) -> FlowField {
    let m = h.matrix();
    FlowField::from_fn(width, height, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        if w <= 0.0 {
            return None;
        }
        h.apply(Point2::new(x, y)).ok()
    })
}

/// Fits a homography to `matches` and rasterizes it over the marker grid.
pub fn ransac_homography(matches: &MatchSet, cfg: &RansacConfig, marker_size: (usize, usize)) -> MatchOutcome {
    match ransac_fit(matches, cfg) {
        Ok(fit) => MatchOutcome::Flow(flow_from_homography(&fit.homography, marker_size.0, marker_size.1)),
        Err(e) => MatchOutcome::Failed(e),
    }
}
