use crate::error::{Error, Result};

use super::Point2;

/// Rotation, shear and scale about the origin followed by a translation.
///
/// The linear part is composed as `R(rotation) * Shear(shear) * scale`, where
/// the shear keeps the x axis and tilts the y axis by `shear` radians, i.e.
/// `Shear(phi) = [[1, sin phi], [0, cos phi]]`. Its determinant is
/// `scale^2 * cos(shear)`, so every shear in the open interval
/// `(-pi/2, pi/2)` stays invertible and bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    rotation: f64,
    shear: f64,
    scale: f64,
    translation: Point2,
    matrix: [f64; 6],
}

impl AffineTransform {
    pub fn new(rotation: f64, shear: f64, scale: f64, translation: Point2) -> Result<Self> {
        let params = [rotation, shear, scale, translation.x, translation.y];
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateTransform(
                "non-finite affine parameter".into(),
            ));
        }
        let [a, b, c, d] = Self::linear_part(rotation, shear, scale);
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateTransform(format!(
                "affine linear part is singular (det = {det:e})"
            )));
        }
        Ok(Self {
            rotation,
            shear,
            scale,
            translation,
            matrix: [a, b, translation.x, c, d, translation.y],
        })
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 1.0, Point2::default()).expect("identity is valid")
    }

    /// Row-major `[a, b, c, d]` of the 2x2 linear part.
    pub fn linear_part(rotation: f64, shear: f64, scale: f64) -> [f64; 4] {
        let (sr, cr) = rotation.sin_cos();
        let (sd, cd) = (rotation - shear).sin_cos();
        [scale * cr, -scale * sd, scale * sr, scale * cd]
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn shear(&self) -> f64 {
        self.shear
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn translation(&self) -> Point2 {
        self.translation
    }

    /// Row-major 2x3 matrix.
    pub fn matrix(&self) -> &[f64; 6] {
        &self.matrix
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0] * m[4] - m[1] * m[3]
    }

    pub fn with_translation(&self, translation: Point2) -> Self {
        let mut out = *self;
        out.translation = translation;
        out.matrix[2] = translation.x;
        out.matrix[5] = translation.y;
        out
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let m = &self.matrix;
        Point2::new(
            m[0] * p.x + m[1] * p.y + m[2],
            m[3] * p.x + m[4] * p.y + m[5],
        )
    }

    pub fn apply_inverse(&self, p: Point2) -> Point2 {
        let m = &self.matrix;
        let det = self.determinant();
        let (dx, dy) = (p.x - m[2], p.y - m[5]);
        Point2::new(
            (m[4] * dx - m[1] * dy) / det,
            (-m[3] * dx + m[0] * dy) / det,
        )
    }

    /// `[rotation, shear, scale, tx, ty]`.
    pub fn params(&self) -> [f64; 5] {
        [
            self.rotation,
            self.shear,
            self.scale,
            self.translation.x,
            self.translation.y,
        ]
    }

    pub fn from_params(p: &[f64]) -> Result<Self> {
        match p {
            [r, s, k, tx, ty] => Self::new(*r, *s, *k, Point2::new(*tx, *ty)),
            _ => Err(Error::InvalidInput(format!(
                "affine expects 5 parameters, got {}",
                p.len()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_maps_points_to_themselves() {
        let t = AffineTransform::identity();
        assert_eq!(t.apply(Point2::new(10.0, 20.0)), Point2::new(10.0, 20.0));
    }

    #[test]
    fn determinant_is_scale_squared_cos_shear() {
        let t = AffineTransform::new(0.4, 0.9, 1.2, Point2::new(3.0, -1.0)).unwrap();
        assert!((t.determinant() - 1.44 * 0.9f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn round_trip_through_inverse() {
        let t = AffineTransform::new(-0.8, 1.2, 0.8, Point2::new(100.0, 50.0)).unwrap();
        for &(x, y) in &[(0.0, 0.0), (319.0, 239.0), (12.5, -7.25)] {
            let p = Point2::new(x, y);
            let back = t.apply_inverse(t.apply(p));
            assert!(back.distance(&p) < 1e-9);
        }
    }

    #[test]
    fn right_angle_shear_is_rejected() {
        assert!(AffineTransform::new(0.0, std::f64::consts::FRAC_PI_2, 1.0, Point2::default()).is_err());
    }
}
