use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    homography_from_four_points, AffineTransform, GeometricTransform, Homography, Point2, ThinPlateSpline,
    TransformKind, Warp, TPS_IDENTITY, TPS_PARAM_COUNT,
};

use super::SamplerConfig;

pub const PLACEMENT_RETRIES: usize = 100;
pub const QUAD_DRAWS: usize = 1000;
pub const TPS_RETRIES: usize = 100;
/// Side of the grid on which spline samples are checked for folds.
pub const FOLD_GRID: usize = 17;

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn corners((w, h): (u32, u32)) -> [Point2; 4] {
    let (xm, ym) = (w as f64 - 1.0, h as f64 - 1.0);
    [
        Point2::new(0.0, 0.0),
        Point2::new(xm, 0.0),
        Point2::new(xm, ym),
        Point2::new(0.0, ym),
    ]
}

/// Draws rotation, shear and scale, then a translation that keeps the
/// marker's warped bounding box on the canvas.
pub fn sample_affine<R: Rng + ?Sized>(rng: &mut R, config: &SamplerConfig) -> Result<AffineTransform> {
    let (cw, ch) = config.canvas();
    let (xmax, ymax) = (cw as f64 - 1.0, ch as f64 - 1.0);
    let mut last_err = String::new();
    for _ in 0..PLACEMENT_RETRIES {
        let rotation = uniform(rng, config.rotation_range);
        let shear = uniform(rng, config.shear_range);
        let scale = uniform(rng, config.scale_range);
        let linear = match AffineTransform::new(rotation, shear, scale, Point2::default()) {
            Ok(a) => a,
            Err(e) => {
                last_err = e.to_string();
                continue;
            }
        };
        let warped = corners(config.marker()).map(|p| linear.apply(p));
        let min_x = warped.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = warped.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = warped.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = warped.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let slack_x = xmax - (max_x - min_x);
        let slack_y = ymax - (max_y - min_y);
        if slack_x < 0.0 || slack_y < 0.0 {
            last_err = format!("warped marker spans {:.1}x{:.1} px", max_x - min_x, max_y - min_y);
            continue;
        }
        let j = config.placement_jitter;
        let tx = -min_x + slack_x / 2.0 + uniform(rng, [-j * slack_x / 2.0, j * slack_x / 2.0]);
        let ty = -min_y + slack_y / 2.0 + uniform(rng, [-j * slack_y / 2.0, j * slack_y / 2.0]);
        return Ok(linear.with_translation(Point2::new(tx, ty)));
    }
    Err(Error::Placement(format!(
        "no placement after {PLACEMENT_RETRIES} draws ({last_err})"
    )))
}

/// Interior angle (degrees) at each vertex, or `None` unless the quad is
/// strictly convex with positive (image-space clockwise) winding.
pub fn quad_angles(q: &[Point2; 4]) -> Option<[f64; 4]> {
    let mut angles = [0.0; 4];
    for i in 0..4 {
        let prev = q[(i + 3) % 4];
        let cur = q[i];
        let next = q[(i + 1) % 4];
        if Point2::cross(prev, cur, next) <= 0.0 {
            return None;
        }
        let (a, b) = (prev - cur, next - cur);
        let cos = (a.x * b.x + a.y * b.y) / ((a.x.hypot(a.y)) * (b.x.hypot(b.y)));
        angles[i] = cos.clamp(-1.0, 1.0).acos().to_degrees();
    }
    Some(angles)
}

/// Draws destination corners uniformly on the canvas until they form an
/// acceptable quad, then solves for the homography from the marker corners.
pub fn sample_homography<R: Rng + ?Sized>(
    rng: &mut R,
    marker_size: (u32, u32),
    canvas_size: (u32, u32),
    min_angle_deg: f64,
) -> Result<Homography> {
    if marker_size.0 < 2 || marker_size.1 < 2 || canvas_size.0 < 2 || canvas_size.1 < 2 {
        return Err(Error::InvalidInput("marker and canvas sizes must be positive".into()));
    }
    let src = corners(marker_size);
    let (xmax, ymax) = (canvas_size.0 as f64 - 1.0, canvas_size.1 as f64 - 1.0);
    for _ in 0..QUAD_DRAWS {
        let dst: [Point2; 4] =
            std::array::from_fn(|_| Point2::new(rng.random_range(0.0..=xmax), rng.random_range(0.0..=ymax)));
        if let Some(h) = accept_quad(&src, &dst, min_angle_deg) {
            return Ok(h);
        }
    }
    Err(Error::Sampling(format!("no acceptable quad in {QUAD_DRAWS} draws")))
}

pub(crate) fn accept_quad(src: &[Point2; 4], dst: &[Point2; 4], min_angle_deg: f64) -> Option<Homography> {
    let angles = quad_angles(dst)?;
    let max_angle = 180.0 - min_angle_deg;
    if angles.iter().any(|&a| a < min_angle_deg || a > max_angle) {
        return None;
    }
    homography_from_four_points(src, dst).ok()
}

/// Smallest Jacobian determinant over a `FOLD_GRID` x `FOLD_GRID` grid on `[-1, 1]^2`.
pub fn min_jacobian_det(tps: &ThinPlateSpline) -> f64 {
    let n = FOLD_GRID;
    let mut min = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            let p = Point2::new(
                -1.0 + 2.0 * i as f64 / (n - 1) as f64,
                -1.0 + 2.0 * j as f64 / (n - 1) as f64,
            );
            let jac = tps.jacobian(p);
            min = min.min(jac[0] * jac[3] - jac[1] * jac[2]);
        }
    }
    min
}

/// Perturbs each identity parameter by a uniform draw, rejecting folded maps.
pub fn sample_tps<R: Rng + ?Sized>(rng: &mut R, config: &SamplerConfig) -> Result<ThinPlateSpline> {
    for _ in 0..TPS_RETRIES {
        let mut params = [0.0; TPS_PARAM_COUNT];
        for (p, id) in params.iter_mut().zip(TPS_IDENTITY) {
            *p = id + uniform(rng, config.tps_perturbation);
        }
        let tps = ThinPlateSpline::from_params(&params)?;
        if min_jacobian_det(&tps) > 0.0 {
            return Ok(tps);
        }
    }
    Err(Error::Sampling(format!(
        "every spline in {TPS_RETRIES} draws folded"
    )))
}

pub fn sample_kind<R: Rng + ?Sized>(rng: &mut R, config: &SamplerConfig) -> Result<TransformKind> {
    let dist = WeightedIndex::new(config.kind_weights)
        .map_err(|e| Error::InvalidInput(format!("kind_weights: {e}")))?;
    Ok(TransformKind::ALL[dist.sample(rng)])
}

/// Picks a kind by weight and samples a transform of that kind.
pub fn sample_transform<R: Rng + ?Sized>(rng: &mut R, config: &SamplerConfig) -> Result<GeometricTransform> {
    let kind = sample_kind(rng, config)?;
    sample_transform_of_kind(rng, config, kind)
}

pub fn sample_transform_of_kind<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SamplerConfig,
    kind: TransformKind,
) -> Result<GeometricTransform> {
    let warp = match kind {
        TransformKind::Affine => Warp::Affine(sample_affine(rng, config)?),
        TransformKind::Homography => Warp::Homography(sample_homography(
            rng,
            config.marker(),
            config.canvas(),
            config.min_quad_angle_deg,
        )?),
        TransformKind::Tps => Warp::Tps(sample_tps(rng, config)?),
    };
    GeometricTransform::new(warp, config.marker(), config.canvas())
}
