//! Two-view epipolar geometry.
//!
//! Relative poses map camera-A coordinates into camera B: `X_b = R X_a + t`.
//! With that convention the fundamental matrix satisfies `x_b^T F x_a = 0`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive and finite (fx = {fx}, fy = {fy})"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn identity() -> Self {
        Self {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Projects a camera-frame point; `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Point2> {
        if p.z <= 0.0 {
            return None;
        }
        Some(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Back-projects a pixel to the camera-frame point at depth `z`.
    pub fn unproject(&self, p: Point2, z: f64) -> Vector3<f64> {
        Vector3::new((p.x - self.cx) / self.fx * z, (p.y - self.cy) / self.fy * z, z)
    }
}

const POSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RelativePose {
    /// Validates orthonormality, `det R = +1` and `|t| = 1` to 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !(ortho <= POSE_TOL) {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthonormal (max |R^T R - I| = {ortho:e})"
            )));
        }
        let det = rotation.determinant();
        if !((det - 1.0).abs() < POSE_TOL) {
            return Err(Error::InvalidInput(format!("rotation has det {det}")));
        }
        let norm = translation.norm();
        if !((norm - 1.0).abs() <= POSE_TOL) {
            return Err(Error::InvalidInput(format!(
                "translation must have unit norm, got {norm}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Like [`RelativePose::new`] but rescales a nonzero translation to unit length.
    pub fn with_unit_translation(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let n = translation.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("translation must be nonzero".into()));
        }
        Self::new(rotation, translation / n)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// The pose taking camera-B coordinates to camera A.
    pub fn inverse(&self) -> RelativePose {
        let rt = self.rotation.transpose();
        RelativePose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rank-2 epipolar constraint between two views.
///
/// Constructed matrices have unit Frobenius norm; [`FundamentalMatrix::scaled`]
/// yields deliberately rescaled copies (all distances are scale invariant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
}

impl FundamentalMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite fundamental matrix".into()));
        }
        let norm = m.norm();
        if norm == 0.0 {
            return Err(Error::InvalidInput("zero fundamental matrix".into()));
        }
        let m = m / norm;
        let sv = m.singular_values();
        if !(sv.min() < 1e-6 * sv.max()) {
            return Err(Error::InvalidInput(format!(
                "fundamental matrix must have rank 2 (singular values {:?})",
                sv.as_slice()
            )));
        }
        Ok(Self { m })
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::InvalidInput(format!(
                "fundamental matrix expects 9 entries, got {}",
                v.len()
            )));
        }
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn transpose(&self) -> FundamentalMatrix {
        FundamentalMatrix {
            m: self.m.transpose(),
        }
    }

    pub fn scaled(&self, k: f64) -> FundamentalMatrix {
        FundamentalMatrix { m: self.m * k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EpipolarLine {
    /// Signed `a x + b y + c`.
    pub fn residual(&self, p: Point2) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    pub fn normal_norm(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

pub fn fundamental_from_pose(
    k_a: &CameraIntrinsics,
    k_b: &CameraIntrinsics,
    pose: &RelativePose,
) -> FundamentalMatrix {
    let m = k_b.inverse_matrix().transpose() * skew(&pose.translation) * pose.rotation * k_a.inverse_matrix();
    FundamentalMatrix::new(m).expect("pose invariants guarantee a rank-2 matrix")
}

/// `l' = F x~`, the line in the second view on which `x`'s match must lie.
pub fn epipolar_line(f: &FundamentalMatrix, x: Point2) -> Result<EpipolarLine> {
    let m = f.matrix();
    let v = m * Vector3::new(x.x, x.y, 1.0);
    let line = EpipolarLine {
        a: v.x,
        b: v.y,
        c: v.z,
    };
    let scale = m.norm() * (x.x * x.x + x.y * x.y + 1.0).sqrt();
    if !(line.normal_norm() > 1e-14 * scale) {
        return Err(Error::EpipoleDegenerate);
    }
    Ok(line)
}

/// Perpendicular distance from `x_prime` to the epipolar line of `x`.
pub fn epipolar_distance(x: Point2, x_prime: Point2, f: &FundamentalMatrix) -> Result<f64> {
    let line = epipolar_line(f, x)?;
    Ok(line.residual(x_prime).abs() / line.normal_norm())
}

/// Symmetric epipolar distance: `ED(x, x', F) + ED(x', x, F^T)`.
pub fn sed(x: Point2, x_prime: Point2, f: &FundamentalMatrix) -> Result<f64> {
    Ok(epipolar_distance(x, x_prime, f)? + epipolar_distance(x_prime, x, &f.transpose())?)
}

/// Interchange format for a calibrated two-view rig:
/// `{"K_a": [fx, fy, cx, cy], "K_b": [...], "R": [9 row-major], "t": [3]}`
/// with `X_b = R X_a + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoViewRig {
    #[serde(rename = "K_a")]
    pub k_a: [f64; 4],
    #[serde(rename = "K_b")]
    pub k_b: [f64; 4],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl TwoViewRig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(format!("pose file: {e}")))
    }

    pub fn intrinsics(&self) -> Result<(CameraIntrinsics, CameraIntrinsics)> {
        let [fx, fy, cx, cy] = self.k_a;
        let a = CameraIntrinsics::new(fx, fy, cx, cy)?;
        let [fx, fy, cx, cy] = self.k_b;
        Ok((a, CameraIntrinsics::new(fx, fy, cx, cy)?))
    }

    pub fn pose(&self) -> Result<RelativePose> {
        RelativePose::new(Matrix3::from_row_slice(&self.r), Vector3::from_row_slice(&self.t))
    }

    pub fn fundamental(&self) -> Result<FundamentalMatrix> {
        let (a, b) = self.intrinsics()?;
        Ok(fundamental_from_pose(&a, &b, &self.pose()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_shift() -> FundamentalMatrix {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let k = CameraIntrinsics::identity();
        fundamental_from_pose(&k, &k, &pose)
    }

    #[test]
    fn pure_x_translation_is_skew() {
        let f = x_shift();
        let want = skew(&Vector3::new(1.0, 0.0, 0.0)) / 2f64.sqrt();
        assert!((f.matrix() - want).norm() < 1e-15);
        let line = epipolar_line(&f, Point2::new(3.0, 7.0)).unwrap();
        assert_eq!(line.a, 0.0);
        // horizontal line through the same row
        assert!((-line.c / line.b - 7.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_distances() {
        let f = x_shift();
        let (x, xp) = (Point2::new(0.0, 5.0), Point2::new(9.0, 8.0));
        assert!((epipolar_distance(x, xp, &f).unwrap() - 3.0).abs() < 1e-12);
        assert!((epipolar_distance(xp, x, &f.transpose()).unwrap() - 3.0).abs() < 1e-12);
        assert!((sed(x, xp, &f).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn line_matches_manual_product() {
        let f = FundamentalMatrix::from_row_major(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
        let n = (285f64).sqrt();
        let l = epipolar_line(&f, Point2::new(1.0, -1.0)).unwrap();
        assert!((l.a - (1.0 - 2.0 + 3.0) / n).abs() < 1e-15);
        assert!((l.b - (4.0 - 5.0 + 6.0) / n).abs() < 1e-15);
        assert!((l.c - (7.0 - 8.0 + 9.0) / n).abs() < 1e-15);
    }

    #[test]
    fn epipole_is_degenerate() {
        // e = (0,0,1) is the right null vector of skew([0,0,1])
        let f = FundamentalMatrix::new(skew(&Vector3::new(0.0, 0.0, 1.0))).unwrap();
        assert!(matches!(
            epipolar_line(&f, Point2::new(0.0, 0.0)),
            Err(Error::EpipoleDegenerate)
        ));
        assert!(sed(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), &f).is_err());
    }

    #[test]
    fn rank_three_is_rejected() {
        assert!(FundamentalMatrix::new(Matrix3::identity()).is_err());
    }

    #[test]
    fn bad_pose_is_rejected() {
        assert!(RelativePose::new(Matrix3::identity() * 2.0, Vector3::x()).is_err());
        assert!(RelativePose::new(Matrix3::identity(), Vector3::new(2.0, 0.0, 0.0)).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RelativePose::new(reflect, Vector3::x()).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
    }
}
