//! Training objectives over flow fields and their analytic gradients.
//!
//! - supervised L1 against a known transform ([`l_syn`]),
//! - summed symmetric epipolar distance against a fundamental matrix ([`l_sed`]),
//! - their sum ([`l_all`]).
//!
//! Totals are accumulated in row-major pixel order, so results are
//! reproducible bit for bit regardless of how per-pixel terms are computed.

mod gradcheck;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{epipolar_line, sed, FundamentalMatrix, GeometricTransform, Point2};
use crate::imaging::FlowField;

pub use gradcheck::{gradcheck_sed, gradcheck_syn, random_probe_flow, GradCheckReport, KINK_MARGIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Sum over contributing pixels.
    pub total: f64,
    /// `total / pixel_count`.
    pub mean: f64,
    pub pixel_count: usize,
    /// Pixels left out because their epipolar line was degenerate.
    pub skipped: usize,
    /// Row-major per-pixel values (zero where a pixel did not contribute).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_pixel: Option<Vec<f64>>,
}

impl LossReport {
    fn from_terms(terms: &[Option<f64>], skipped: usize, keep_map: bool) -> Result<Self> {
        let mut total = 0.0;
        let mut count = 0;
        for v in terms.iter().flatten() {
            total += v;
            count += 1;
        }
        if count == 0 {
            return Err(Error::NoValidPixels);
        }
        Ok(Self {
            total,
            mean: total / count as f64,
            pixel_count: count,
            skipped,
            per_pixel: keep_map.then(|| terms.iter().map(|v| v.unwrap_or(0.0)).collect()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    /// Keep the dense per-pixel map in the report.
    pub keep_map: bool,
    /// Truncate each SED term at this value. Off by default.
    pub sed_clip: Option<f64>,
    /// Weight on the epipolar term in [`l_all`].
    pub sed_weight: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            keep_map: false,
            sed_clip: None,
            sed_weight: 1.0,
        }
    }
}

/// Per-pixel gradient of a loss with respect to the predicted targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGradient {
    width: usize,
    height: usize,
    grad: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl FlowGradient {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Zero at pixels that are invalid in the input flow.
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.grad[y * self.width + x]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }
}

fn per_pixel<T: Send>(flow: &FlowField, f: impl Fn(usize, usize, Point2) -> T + Sync) -> Vec<Option<T>> {
    let w = flow.width();
    (0..w * flow.height())
        .into_par_iter()
        .map(|i| flow.get_index(i).map(|p| f(i % w, i / w, p)))
        .collect()
}

fn pixel(x: usize, y: usize) -> Point2 {
    Point2::new(x as f64, y as f64)
}

fn check_marker_grid(flow: &FlowField, t: &GeometricTransform) -> Result<()> {
    let (mw, mh) = t.marker_size();
    if flow.size() != (mw as usize, mh as usize) {
        return Err(Error::mismatch(format!("flow of {mw}x{mh}"), format!("{:?}", flow.size())));
    }
    Ok(())
}

/// `sum_x |f(x) - T(x)|_1` over valid pixels of `flow_pred`.
pub fn l_syn(flow_pred: &FlowField, t: &GeometricTransform) -> Result<LossReport> {
    l_syn_with(flow_pred, t, &LossOptions::default())
}

pub fn l_syn_with(flow_pred: &FlowField, t: &GeometricTransform, opts: &LossOptions) -> Result<LossReport> {
    check_marker_grid(flow_pred, t)?;
    let terms = per_pixel(flow_pred, |x, y, p| {
        t.apply(pixel(x, y)).map(|q| (p.x - q.x).abs() + (p.y - q.y).abs())
    });
    let terms = terms.into_iter().map(|v| v.transpose()).collect::<Result<Vec<_>>>()?;
    LossReport::from_terms(&terms, 0, opts.keep_map)
}

/// `sum_x SED(x, f(x), F)` over valid pixels; pixels at the epipole are skipped.
pub fn l_sed(flow_pred: &FlowField, f: &FundamentalMatrix) -> Result<LossReport> {
    l_sed_with(flow_pred, f, &LossOptions::default())
}

pub fn l_sed_with(flow_pred: &FlowField, f: &FundamentalMatrix, opts: &LossOptions) -> Result<LossReport> {
    let terms = per_pixel(flow_pred, |x, y, p| sed(pixel(x, y), p, f));
    let mut skipped = 0;
    let terms: Vec<Option<f64>> = terms
        .into_iter()
        .map(|v| match v {
            Some(Ok(d)) => Some(match opts.sed_clip {
                Some(c) => d.min(c),
                None => d,
            }),
            Some(Err(_)) => {
                skipped += 1;
                None
            }
            None => None,
        })
        .collect();
    LossReport::from_terms(&terms, skipped, opts.keep_map)
}

/// Weighted sum of two component reports (`sed_weight` on the second).
pub fn combine(syn: &LossReport, sed: &LossReport, sed_weight: f64) -> LossReport {
    LossReport {
        total: syn.total + sed_weight * sed.total,
        mean: syn.mean + sed_weight * sed.mean,
        pixel_count: syn.pixel_count + sed.pixel_count,
        skipped: syn.skipped + sed.skipped,
        per_pixel: None,
    }
}

/// `L_syn(flow_syn, t) + L_sed(flow_real, f)`.
pub fn l_all(
    flow_syn: &FlowField,
    t: &GeometricTransform,
    flow_real: &FlowField,
    f: &FundamentalMatrix,
) -> Result<LossReport> {
    l_all_with(flow_syn, t, flow_real, f, &LossOptions::default())
}

pub fn l_all_with(
    flow_syn: &FlowField,
    t: &GeometricTransform,
    flow_real: &FlowField,
    f: &FundamentalMatrix,
    opts: &LossOptions,
) -> Result<LossReport> {
    let syn = l_syn_with(flow_syn, t, opts)?;
    let sed = l_sed_with(flow_real, f, opts)?;
    Ok(combine(&syn, &sed, opts.sed_weight))
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Componentwise `sign(f(x) - T(x))`, with subgradient 0 at exact ties.
pub fn grad_l_syn(flow_pred: &FlowField, t: &GeometricTransform) -> Result<FlowGradient> {
    check_marker_grid(flow_pred, t)?;
    if flow_pred.valid_count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let terms = per_pixel(flow_pred, |x, y, p| {
        t.apply(pixel(x, y)).map(|q| [signum0(p.x - q.x), signum0(p.y - q.y)])
    });
    let grad = terms
        .into_iter()
        .map(|v| v.transpose().map(|g| g.unwrap_or([0.0; 2])))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowGradient {
        width: flow_pred.width(),
        height: flow_pred.height(),
        grad,
        valid: flow_pred.valid_mask().to_vec(),
    })
}

/// Gradient of `SED(x, x', F)` with respect to `x'`.
///
/// With `r = x'^T F x`, `(a, b) = (F x)_{1,2}` and `(a', b') = (F^T x')_{1,2}`:
///
/// ```text
/// SED = |r| / n1 + |r| / n2,   n1 = |(a, b)|,   n2 = |(a', b')|
/// dr/dx'  = (a, b)
/// dn2/dx' = (a' F11 + b' F12, a' F21 + b' F22) / n2
/// dSED/dx' = sign(r) (a, b) (1/n1 + 1/n2) - |r| / n2^2 * dn2/dx'
/// ```
///
/// `n1` does not depend on `x'`. At `r = 0` the subgradient is zero.
pub fn sed_gradient(x: Point2, x_prime: Point2, f: &FundamentalMatrix) -> Result<[f64; 2]> {
    let l = epipolar_line(f, x)?;
    let lt = epipolar_line(&f.transpose(), x_prime)?;
    let m = f.matrix();
    let r = l.residual(x_prime);
    let (n1, n2) = (l.normal_norm(), lt.normal_norm());
    let s = signum0(r);
    let dn2 = [
        (lt.a * m[(0, 0)] + lt.b * m[(0, 1)]) / n2,
        (lt.a * m[(1, 0)] + lt.b * m[(1, 1)]) / n2,
    ];
    let k = s * (1.0 / n1 + 1.0 / n2);
    let c = r.abs() / (n2 * n2);
    Ok([k * l.a - c * dn2[0], k * l.b - c * dn2[1]])
}

/// Per-pixel [`sed_gradient`]; degenerate pixels get zero.
pub fn grad_l_sed(flow_pred: &FlowField, f: &FundamentalMatrix) -> Result<FlowGradient> {
    grad_l_sed_with(flow_pred, f, &LossOptions::default())
}

pub fn grad_l_sed_with(flow_pred: &FlowField, f: &FundamentalMatrix, opts: &LossOptions) -> Result<FlowGradient> {
    if flow_pred.valid_count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let terms = per_pixel(flow_pred, |x, y, p| {
        let xa = pixel(x, y);
        if let Some(c) = opts.sed_clip {
            if sed(xa, p, f).map(|d| d > c).unwrap_or(false) {
                return [0.0; 2];
            }
        }
        sed_gradient(xa, p, f).unwrap_or([0.0; 2])
    });
    Ok(FlowGradient {
        width: flow_pred.width(),
        height: flow_pred.height(),
        grad: terms.into_iter().map(|g| g.unwrap_or([0.0; 2])).collect(),
        valid: flow_pred.valid_mask().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::{Matrix3, Vector3};

    use super::*;
    use crate::geometry::{fundamental_from_pose, AffineTransform, CameraIntrinsics, RelativePose, Warp};

    fn shift_transform() -> GeometricTransform {
        let a = AffineTransform::new(0.1, 0.05, 1.1, Point2::new(4.0, -2.0)).unwrap();
        GeometricTransform::new(Warp::Affine(a), (8, 6), (40, 30)).unwrap()
    }

    fn gt_flow(t: &GeometricTransform) -> FlowField {
        FlowField::from_fn(8, 6, |x, y| t.apply(pixel(x, y)).ok())
    }

    fn horizontal_f() -> FundamentalMatrix {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::x()).unwrap();
        let k = CameraIntrinsics::identity();
        fundamental_from_pose(&k, &k, &pose)
    }

    #[test]
    fn syn_zero_at_ground_truth_and_two_for_unit_offset() {
        let t = shift_transform();
        let gt = gt_flow(&t);
        assert_eq!(l_syn(&gt, &t).unwrap().total, 0.0);
        let r = l_syn(&gt.offset(Point2::new(1.0, 1.0)), &t).unwrap();
        assert!((r.mean - 2.0).abs() < 1e-12);
        assert_eq!(r.pixel_count, 48);
    }

    #[test]
    fn syn_requires_valid_pixels() {
        let t = shift_transform();
        assert!(matches!(l_syn(&FlowField::invalid(8, 6), &t), Err(Error::NoValidPixels)));
    }

    #[test]
    fn syn_gradient_signs() {
        let t = shift_transform();
        let gt = gt_flow(&t);
        let g = grad_l_syn(&gt.offset(Point2::new(0.5, 0.5)), &t).unwrap();
        assert_eq!(g.get(3, 2), [1.0, 1.0]);
        let g = grad_l_syn(&gt, &t).unwrap();
        assert_eq!(g.get(3, 2), [0.0, 0.0]);
    }

    #[test]
    fn sed_counts_offsets() {
        let f = horizontal_f();
        // pixel rows stay on their epipolar line except k = 3 shifted rows
        let delta = 0.75;
        let flow = FlowField::from_fn(5, 4, |x, y| {
            let dy = if y == 2 && x < 3 { delta } else { 0.0 };
            Some(Point2::new(x as f64 + 10.0, y as f64 + dy))
        });
        let r = l_sed(&flow, &f).unwrap();
        assert!((r.total - 2.0 * 3.0 * delta).abs() < 1e-12);
    }

    #[test]
    fn sed_gradient_points_away_from_line() {
        let f = horizontal_f();
        let g = sed_gradient(Point2::new(0.0, 5.0), Point2::new(9.0, 8.0), &f).unwrap();
        // both distances are vertical offsets of 3: d/dy' = 1 + 1
        assert!((g[0]).abs() < 1e-12);
        assert!((g[1] - 2.0).abs() < 1e-12);
        let g = sed_gradient(Point2::new(0.0, 5.0), Point2::new(9.0, 5.0), &f).unwrap();
        assert_eq!(g, [0.0, 0.0]);
    }

    #[test]
    fn l_all_adds_components() {
        let a = LossReport { total: 3.5, mean: 3.5, pixel_count: 1, skipped: 0, per_pixel: None };
        let b = LossReport { total: 2.5, mean: 2.5, pixel_count: 1, skipped: 0, per_pixel: None };
        assert_eq!(combine(&a, &b, 1.0).total, 6.0);
    }

    #[test]
    fn clip_truncates_terms() {
        let f = horizontal_f();
        let flow = FlowField::from_fn(3, 3, |x, y| Some(Point2::new(x as f64, y as f64 + 10.0)));
        let opts = LossOptions { sed_clip: Some(1.0), keep_map: true, ..LossOptions::default() };
        let r = l_sed_with(&flow, &f, &opts).unwrap();
        assert_eq!(r.total, 9.0);
        assert_eq!(r.per_pixel.as_ref().unwrap().len(), 9);
        let g = grad_l_sed_with(&flow, &f, &opts).unwrap();
        assert_eq!(g.get(1, 1), [0.0, 0.0]);
    }
}
