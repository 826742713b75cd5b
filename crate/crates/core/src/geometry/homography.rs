use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};

use super::Point2;

/// Homographies whose matrix condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// A projective map of the plane, stored as a row-major 3x3 matrix.
///
/// The matrix is normalized so that `h33 = 1`; when `h33` is (numerically)
/// zero it is scaled to unit Frobenius norm instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateTransform("non-finite homography".into()));
        }
        let norm = m.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateTransform("zero homography".into()));
        }
        let m = if m[(2, 2)].abs() > 1e-12 * norm {
            m / m[(2, 2)]
        } else {
            m / norm
        };
        let sv = m.singular_values();
        let (max, min) = (sv.max(), sv.min());
        if min <= 0.0 || max / min > MAX_CONDITION {
            return Err(Error::IllConditioned(if min > 0.0 { max / min } else { f64::INFINITY }));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::InvalidInput(format!(
                "homography expects 9 entries, got {}",
                v.len()
            )));
        }
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.m[(r, c)];
            }
        }
        out
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        project(&self.m, p)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| Error::DegenerateTransform("homography is singular".into()))?;
        Homography::new(inv)
    }
}

pub(crate) fn project(m: &Matrix3<f64>, p: Point2) -> Result<Point2> {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    let out = Point2::new(v.x / v.z, v.y / v.z);
    if v.z.abs() < 1e-300 || !out.is_finite() {
        return Err(Error::DegenerateTransform(format!(
            "point ({}, {}) maps to infinity",
            p.x, p.y
        )));
    }
    Ok(out)
}

/// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
fn normalizing_transform(pts: &[Point2]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn apply_affine_norm(t: &Matrix3<f64>, p: Point2) -> Point2 {
    Point2::new(
        t[(0, 0)] * p.x + t[(0, 2)],
        t[(1, 1)] * p.y + t[(1, 2)],
    )
}

fn check_no_three_collinear(pts: &[Point2; 4], which: &str) -> Result<()> {
    let extent = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| a.distance(b)))
        .fold(0.0, f64::max);
    if extent == 0.0 {
        return Err(Error::DegenerateConfiguration(format!(
            "{which} points coincide"
        )));
    }
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if Point2::cross(pts[i], pts[j], pts[k]).abs() <= 1e-9 * extent * extent {
            return Err(Error::DegenerateConfiguration(format!(
                "{which} points {i}, {j}, {k} are collinear"
            )));
        }
    }
    Ok(())
}

/// Exact homography taking each `src[i]` to `dst[i]`.
///
/// Both quads are Hartley-normalized and the 8x8 system with `h33 = 1` is
/// solved by LU decomposition.
pub fn homography_from_four_points(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Homography> {
    check_no_three_collinear(src, "source")?;
    check_no_three_collinear(dst, "destination")?;

    let ts = normalizing_transform(src);
    let td = normalizing_transform(dst);
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let p = apply_affine_norm(&ts, src[i]);
        let q = apply_affine_norm(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[p.x, p.y, 1.0, 0.0, 0.0, 0.0, -p.x * q.x, -p.y * q.x]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, p.x, p.y, 1.0, -p.x * q.y, -p.y * q.y]);
        b[r] = q.x;
        b[r + 1] = q.y;
    }
    let sv = a.singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e10 {
        return Err(Error::IllConditioned(cond));
    }
    let h = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::DegenerateConfiguration("singular 4-point system".into()))?;
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfiguration("degenerate normalization".into()))?;
    Homography::new(td_inv * hn * ts)
}

/// Least-squares homography from `n >= 4` correspondences (normalized DLT).
pub fn homography_dlt(src: &[Point2], dst: &[Point2]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(Error::mismatch(src.len(), dst.len()));
    }
    if src.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {}",
            src.len()
        )));
    }
    let ts = normalizing_transform(src);
    let td = normalizing_transform(dst);
    let n = src.len();
    let mut a = DMatrix::<f64>::zeros(2 * n.max(5), 9);
    for i in 0..n {
        let p = apply_affine_norm(&ts, src[i]);
        let q = apply_affine_norm(&td, dst[i]);
        let r = 2 * i;
        let rows: [[f64; 9]; 2] = [
            [-p.x, -p.y, -1.0, 0.0, 0.0, 0.0, p.x * q.x, p.y * q.x, q.x],
            [0.0, 0.0, 0.0, -p.x, -p.y, -1.0, p.x * q.y, p.y * q.y, q.y],
        ];
        for (k, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a[(r + k, c)] = *v;
            }
        }
    }
    // Zero padding rows keep the SVD full when n == 4; they do not change the solution.
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateConfiguration("SVD failed".into()))?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let h = v_t.row(min_idx);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfiguration("degenerate normalization".into()))?;
    Homography::new(td_inv * hn * ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> [Point2; 4] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(side, 0.0),
            Point2::new(side, side),
            Point2::new(0.0, side),
        ]
    }

    #[test]
    fn identical_quads_give_identity() {
        let h = homography_from_four_points(&square(100.0), &square(100.0)).unwrap();
        assert!((h.matrix() - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn unit_square_fixed_points() {
        let h = homography_from_four_points(&square(1.0), &square(1.0)).unwrap();
        let p = h.apply(Point2::new(0.5, 0.5)).unwrap();
        assert!(p.distance(&Point2::new(0.5, 0.5)) < 1e-12);
    }

    #[test]
    fn pure_translation() {
        let src = square(100.0);
        let dst = src.map(|p| Point2::new(p.x + 5.0, p.y));
        let h = homography_from_four_points(&src, &dst).unwrap();
        let p = h.apply(Point2::new(50.0, 50.0)).unwrap();
        assert!(p.distance(&Point2::new(55.0, 50.0)) < 1e-9);
    }

    #[test]
    fn collinear_source_is_rejected() {
        let src = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 5.0),
        ];
        let err = homography_from_four_points(&src, &square(10.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateConfiguration(_)));
    }

    #[test]
    fn collinear_destination_is_rejected() {
        let dst = [
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(20.0, 0.0),
            Point2::new(0.0, 5.0),
        ];
        assert!(homography_from_four_points(&square(10.0), &dst).is_err());
    }

    #[test]
    fn normalization_falls_back_to_frobenius() {
        let g = Matrix3::new(0.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0);
        let h = Homography::new(g).unwrap();
        assert!((h.matrix().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(Homography::new(m).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let src = square(100.0);
        let dst = [
            Point2::new(10.0, 20.0),
            Point2::new(130.0, 5.0),
            Point2::new(120.0, 140.0),
            Point2::new(-5.0, 110.0),
        ];
        let h = homography_from_four_points(&src, &dst).unwrap();
        let inv = h.inverse().unwrap();
        for p in src {
            let q = inv.apply(h.apply(p).unwrap()).unwrap();
            assert!(q.distance(&p) < 1e-9);
        }
    }

    #[test]
    fn dlt_matches_four_point_solve() {
        let src = square(100.0);
        let dst = [
            Point2::new(10.0, 20.0),
            Point2::new(130.0, 5.0),
            Point2::new(120.0, 140.0),
            Point2::new(-5.0, 110.0),
        ];
        let a = homography_from_four_points(&src, &dst).unwrap();
        let b = homography_dlt(&src, &dst).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-9);
    }
}
