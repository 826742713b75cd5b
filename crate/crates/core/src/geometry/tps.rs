use crate::error::{Error, Result};

use super::Point2;

/// Fixed kernel sites in normalized `[-1, 1]^2` coordinates: a 3x2 grid,
/// ordered row by row (y = -0.5 first).
pub const TPS_CONTROL_POINTS: [Point2; 6] = [
    Point2::new(-0.6, -0.5),
    Point2::new(0.0, -0.5),
    Point2::new(0.6, -0.5),
    Point2::new(-0.6, 0.5),
    Point2::new(0.0, 0.5),
    Point2::new(0.6, 0.5),
];

/// Number of free parameters: 6 affine plus 2 per control point.
pub const TPS_PARAM_COUNT: usize = 18;

/// Identity parameter vector.
pub const TPS_IDENTITY: [f64; TPS_PARAM_COUNT] = [
    1.0, 0.0, 0.0, 0.0, 1.0, 0.0, // affine
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
];

/// Radial basis `U(r) = r^2 log(r^2)` written in terms of `r2 = r^2`.
#[inline]
pub fn tps_kernel(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

/// Thin-plate spline on normalized coordinates.
///
/// `f(p) = A [x, y, 1]^T + sum_k w_k U(|p - c_k|)` with `A` row-major 2x3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinPlateSpline {
    affine: [f64; 6],
    coefficients: [[f64; 2]; 6],
}

impl ThinPlateSpline {
    pub fn identity() -> Self {
        Self::from_params(&TPS_IDENTITY).expect("identity is valid")
    }

    /// Six affine entries followed by `(w_x, w_y)` per control point.
    pub fn from_params(p: &[f64]) -> Result<Self> {
        if p.len() != TPS_PARAM_COUNT {
            return Err(Error::InvalidInput(format!(
                "thin-plate spline expects {TPS_PARAM_COUNT} parameters, got {}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateTransform(
                "non-finite spline parameter".into(),
            ));
        }
        let mut affine = [0.0; 6];
        affine.copy_from_slice(&p[..6]);
        let mut coefficients = [[0.0; 2]; 6];
        for (k, w) in coefficients.iter_mut().enumerate() {
            *w = [p[6 + 2 * k], p[7 + 2 * k]];
        }
        Ok(Self {
            affine,
            coefficients,
        })
    }

    pub fn params(&self) -> [f64; TPS_PARAM_COUNT] {
        let mut out = [0.0; TPS_PARAM_COUNT];
        out[..6].copy_from_slice(&self.affine);
        for (k, w) in self.coefficients.iter().enumerate() {
            out[6 + 2 * k] = w[0];
            out[7 + 2 * k] = w[1];
        }
        out
    }

    pub fn affine_part(&self) -> &[f64; 6] {
        &self.affine
    }

    pub fn coefficients(&self) -> &[[f64; 2]; 6] {
        &self.coefficients
    }

    pub fn evaluate(&self, p: Point2) -> Point2 {
        let a = &self.affine;
        let mut x = a[0] * p.x + a[1] * p.y + a[2];
        let mut y = a[3] * p.x + a[4] * p.y + a[5];
        for (c, w) in TPS_CONTROL_POINTS.iter().zip(&self.coefficients) {
            let (dx, dy) = (p.x - c.x, p.y - c.y);
            let u = tps_kernel(dx * dx + dy * dy);
            x += w[0] * u;
            y += w[1] * u;
        }
        Point2::new(x, y)
    }

    /// Row-major Jacobian `[dfx/dx, dfx/dy, dfy/dx, dfy/dy]` at `p`.
    pub fn jacobian(&self, p: Point2) -> [f64; 4] {
        let a = &self.affine;
        let mut j = [a[0], a[1], a[3], a[4]];
        for (c, w) in TPS_CONTROL_POINTS.iter().zip(&self.coefficients) {
            let (dx, dy) = (p.x - c.x, p.y - c.y);
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                continue;
            }
            // dU/dx = 2 dx (ln r2 + 1)
            let g = 2.0 * (r2.ln() + 1.0);
            j[0] += w[0] * g * dx;
            j[1] += w[0] * g * dy;
            j[2] += w[1] * g * dx;
            j[3] += w[1] * g * dy;
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_exact() {
        let t = ThinPlateSpline::identity();
        for i in 0..=10 {
            for j in 0..=10 {
                let p = Point2::new(-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64);
                assert_eq!(t.evaluate(p), p);
            }
        }
    }

    #[test]
    fn kernel_vanishes_at_own_site() {
        let mut params = TPS_IDENTITY;
        for (i, v) in params.iter_mut().enumerate().skip(6) {
            *v = 0.05 * (i as f64 - 11.0);
        }
        let t = ThinPlateSpline::from_params(&params).unwrap();
        for (k, c) in TPS_CONTROL_POINTS.iter().enumerate() {
            let mut want = *c;
            for (j, s) in TPS_CONTROL_POINTS.iter().enumerate() {
                if j == k {
                    continue;
                }
                let r2 = (c.x - s.x).powi(2) + (c.y - s.y).powi(2);
                want.x += params[6 + 2 * j] * r2 * r2.ln();
                want.y += params[7 + 2 * j] * r2 * r2.ln();
            }
            assert!(t.evaluate(*c).distance(&want) < 1e-14);
        }
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        assert!(ThinPlateSpline::from_params(&[0.0; 17]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let p: Vec<f64> = (0..18).map(|i| i as f64 * 0.01).collect();
        let t = ThinPlateSpline::from_params(&p).unwrap();
        assert_eq!(t.params().to_vec(), p);
    }
}
