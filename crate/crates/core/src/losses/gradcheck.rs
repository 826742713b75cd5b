//! Central finite-difference checks of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{epipolar_distance, sed, FundamentalMatrix, GeometricTransform, Point2};
use crate::imaging::FlowField;

use super::{grad_l_sed, grad_l_syn, pixel};

/// Pixels closer than this (px) to a non-differentiable point are not checked.
pub const KINK_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped_near_kink: usize,
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    /// Pixels exceeding the tolerance.
    pub failures: usize,
}

impl GradCheckReport {
    fn record(&mut self, analytic: [f64; 2], numeric: [f64; 2], abs_tol: f64, rel_tol: f64) {
        let d = (analytic[0] - numeric[0]).hypot(analytic[1] - numeric[1]);
        let scale = numeric[0].hypot(numeric[1]).max(f64::MIN_POSITIVE);
        let abs = (analytic[0] - numeric[0]).abs().max((analytic[1] - numeric[1]).abs());
        let rel = d / scale;
        self.checked += 1;
        self.max_abs_deviation = self.max_abs_deviation.max(abs);
        self.max_rel_deviation = self.max_rel_deviation.max(rel);
        if abs > abs_tol && rel > rel_tol {
            self.failures += 1;
        }
    }
}

fn central_difference(f: impl Fn(Point2) -> f64, p: Point2, h: f64) -> [f64; 2] {
    [
        (f(Point2::new(p.x + h, p.y)) - f(Point2::new(p.x - h, p.y))) / (2.0 * h),
        (f(Point2::new(p.x, p.y + h)) - f(Point2::new(p.x, p.y - h))) / (2.0 * h),
    ]
}

/// Compares [`grad_l_syn`] with central differences of each pixel's L1 term.
///
/// A pixel fails when it exceeds `abs_tol` (componentwise) and `rel_tol`.
pub fn gradcheck_syn(
    flow: &FlowField,
    t: &GeometricTransform,
    h: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<GradCheckReport> {
    let grad = grad_l_syn(flow, t)?;
    let mut report = GradCheckReport::default();
    for (x, y, p) in flow.iter_valid() {
        let q = t.apply(pixel(x, y))?;
        if (p.x - q.x).abs() < KINK_MARGIN.max(2.0 * h) || (p.y - q.y).abs() < KINK_MARGIN.max(2.0 * h) {
            report.skipped_near_kink += 1;
            continue;
        }
        let numeric = central_difference(|v| (v.x - q.x).abs() + (v.y - q.y).abs(), p, h);
        report.record(grad.get(x, y), numeric, abs_tol, rel_tol);
    }
    Ok(report)
}

/// Compares [`grad_l_sed`] with central differences of each pixel's SED term.
pub fn gradcheck_sed(
    flow: &FlowField,
    f: &FundamentalMatrix,
    h: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<GradCheckReport> {
    let grad = grad_l_sed(flow, f)?;
    let mut report = GradCheckReport::default();
    for (x, y, p) in flow.iter_valid() {
        let xa = pixel(x, y);
        let near_kink = epipolar_distance(xa, p, f).map(|d| d < KINK_MARGIN).unwrap_or(true);
        if near_kink {
            report.skipped_near_kink += 1;
            continue;
        }
        let numeric = central_difference(|v| sed(xa, v, f).unwrap_or(f64::NAN), p, h);
        if numeric.iter().any(|v| !v.is_finite()) {
            report.skipped_near_kink += 1;
            continue;
        }
        report.record(grad.get(x, y), numeric, abs_tol, rel_tol);
    }
    Ok(report)
}

/// Keeps `count` randomly chosen valid pixels of `flow` (all if fewer),
/// each displaced by a uniform offset in `[-amplitude, amplitude]^2`.
/// Everything else is invalid. Useful for checking gradients away from the
/// zero-residual kinks of an exact flow.
pub fn random_probe_flow(flow: &FlowField, count: usize, amplitude: f64, seed: u64) -> FlowField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut valid: Vec<(usize, usize, Point2)> = flow.iter_valid().collect();
    let keep = count.min(valid.len());
    // partial Fisher-Yates
    for i in 0..keep {
        let j = rng.random_range(i..valid.len());
        valid.swap(i, j);
    }
    let (w, h) = flow.size();
    let mut out = FlowField::invalid(w, h);
    for &(x, y, p) in &valid[..keep] {
        let d = Point2::new(
            rng.random_range(-amplitude..=amplitude),
            rng.random_range(-amplitude..=amplitude),
        );
        out.set(x, y, Some(p + d));
    }
    out
}
