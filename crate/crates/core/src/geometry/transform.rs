use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AffineTransform, Homography, Point2, ThinPlateSpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Affine,
    Homography,
    Tps,
}

impl TransformKind {
    pub const ALL: [TransformKind; 3] = [Self::Affine, Self::Homography, Self::Tps];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Affine => "affine",
            Self::Homography => "homography",
            Self::Tps => "tps",
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warp {
    Affine(AffineTransform),
    Homography(Homography),
    Tps(ThinPlateSpline),
}

/// A map from marker pixels to reference-image pixels.
///
/// Affine and homography maps act on pixel coordinates directly. The spline
/// acts on normalized coordinates: a marker pixel `(x, y)` is sent to
/// `2x/(w-1) - 1` (likewise for y), evaluated, and the result is expanded to
/// reference pixels with the reference size. Pixel centers sit on integer
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformJson", into = "TransformJson")]
pub struct GeometricTransform {
    warp: Warp,
    marker_size: (u32, u32),
    reference_size: (u32, u32),
}

impl GeometricTransform {
    pub fn new(warp: Warp, marker_size: (u32, u32), reference_size: (u32, u32)) -> Result<Self> {
        for (name, (w, h)) in [("marker", marker_size), ("reference", reference_size)] {
            if w < 2 || h < 2 {
                return Err(Error::InvalidInput(format!(
                    "{name} size must be at least 2x2, got {w}x{h}"
                )));
            }
        }
        Ok(Self {
            warp,
            marker_size,
            reference_size,
        })
    }

    pub fn warp(&self) -> &Warp {
        &self.warp
    }

    pub fn kind(&self) -> TransformKind {
        match self.warp {
            Warp::Affine(_) => TransformKind::Affine,
            Warp::Homography(_) => TransformKind::Homography,
            Warp::Tps(_) => TransformKind::Tps,
        }
    }

    pub fn marker_size(&self) -> (u32, u32) {
        self.marker_size
    }

    pub fn reference_size(&self) -> (u32, u32) {
        self.reference_size
    }

    /// Marker pixel to normalized `[-1, 1]^2`.
    pub fn normalize_marker(&self, p: Point2) -> Point2 {
        normalize(p, self.marker_size)
    }

    /// Normalized `[-1, 1]^2` to reference pixel.
    pub fn denormalize_reference(&self, p: Point2) -> Point2 {
        denormalize(p, self.reference_size)
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let out = match &self.warp {
            Warp::Affine(a) => a.apply(p),
            Warp::Homography(h) => h.apply(p)?,
            Warp::Tps(t) => self.denormalize_reference(t.evaluate(self.normalize_marker(p))),
        };
        if !out.is_finite() {
            return Err(Error::DegenerateTransform(format!(
                "non-finite image of ({}, {})",
                p.x, p.y
            )));
        }
        Ok(out)
    }

    /// Reference pixel back to marker pixel. Splines have no closed-form inverse.
    pub fn apply_inverse(&self, p: Point2) -> Result<Point2> {
        match &self.warp {
            Warp::Affine(a) => Ok(a.apply_inverse(p)),
            Warp::Homography(h) => h.inverse()?.apply(p),
            Warp::Tps(_) => Err(Error::InvalidInput(
                "thin-plate spline has no closed-form inverse".into(),
            )),
        }
    }

    pub fn is_invertible(&self) -> bool {
        !matches!(self.warp, Warp::Tps(_))
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.warp {
            Warp::Affine(a) => a.params().to_vec(),
            Warp::Homography(h) => h.to_row_major().to_vec(),
            Warp::Tps(t) => t.params().to_vec(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transform serializes")
    }
}

/// Free-function form of [`GeometricTransform::apply`].
pub fn apply_transform(t: &GeometricTransform, p: Point2) -> Result<Point2> {
    t.apply(p)
}

pub(crate) fn normalize(p: Point2, (w, h): (u32, u32)) -> Point2 {
    Point2::new(
        2.0 * p.x / (w as f64 - 1.0) - 1.0,
        2.0 * p.y / (h as f64 - 1.0) - 1.0,
    )
}

pub(crate) fn denormalize(p: Point2, (w, h): (u32, u32)) -> Point2 {
    Point2::new(
        (p.x + 1.0) * 0.5 * (w as f64 - 1.0),
        (p.y + 1.0) * 0.5 * (h as f64 - 1.0),
    )
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformJson {
    kind: TransformKind,
    params: Vec<f64>,
    marker_size: [u32; 2],
    reference_size: [u32; 2],
}

impl From<GeometricTransform> for TransformJson {
    fn from(t: GeometricTransform) -> Self {
        TransformJson {
            kind: t.kind(),
            params: t.params(),
            marker_size: [t.marker_size.0, t.marker_size.1],
            reference_size: [t.reference_size.0, t.reference_size.1],
        }
    }
}

impl TryFrom<TransformJson> for GeometricTransform {
    type Error = Error;

    fn try_from(j: TransformJson) -> Result<Self> {
        let warp = match j.kind {
            TransformKind::Affine => Warp::Affine(AffineTransform::from_params(&j.params)?),
            TransformKind::Homography => Warp::Homography(Homography::from_row_major(&j.params)?),
            TransformKind::Tps => Warp::Tps(ThinPlateSpline::from_params(&j.params)?),
        };
        GeometricTransform::new(
            warp,
            (j.marker_size[0], j.marker_size[1]),
            (j.reference_size[0], j.reference_size[1]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TPS_IDENTITY;

    #[test]
    fn identity_spline_maps_pixels_between_equal_canvases() {
        let t = GeometricTransform::new(
            Warp::Tps(ThinPlateSpline::identity()),
            (64, 48),
            (64, 48),
        )
        .unwrap();
        for &(x, y) in &[(0.0, 0.0), (63.0, 47.0), (10.0, 20.0)] {
            let q = t.apply(Point2::new(x, y)).unwrap();
            assert!(q.distance(&Point2::new(x, y)) < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut p = TPS_IDENTITY;
        p[7] = 0.123456789012345;
        p[0] = 1.1 / 3.0;
        let t = GeometricTransform::new(
            Warp::Tps(ThinPlateSpline::from_params(&p).unwrap()),
            (32, 24),
            (640, 480),
        )
        .unwrap();
        let s = t.to_json();
        assert!(s.starts_with("{\"kind\":\"tps\",\"params\":["));
        assert_eq!(GeometricTransform::from_json(&s).unwrap(), t);
    }

    #[test]
    fn json_layout_for_affine() {
        let a = AffineTransform::new(0.5, -0.25, 1.0, Point2::new(3.0, 4.0)).unwrap();
        let t = GeometricTransform::new(Warp::Affine(a), (10, 10), (20, 20)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["kind"], "affine");
        assert_eq!(v["params"], serde_json::json!([0.5, -0.25, 1.0, 3.0, 4.0]));
        assert_eq!(v["marker_size"], serde_json::json!([10, 10]));
    }

    #[test]
    fn unknown_keys_and_bad_arity_are_rejected() {
        let bad = r#"{"kind":"affine","params":[0,0,1,0],"marker_size":[4,4],"reference_size":[4,4]}"#;
        assert!(GeometricTransform::from_json(bad).is_err());
        let extra = r#"{"kind":"affine","params":[0,0,1,0,0],"marker_size":[4,4],"reference_size":[4,4],"x":1}"#;
        assert!(GeometricTransform::from_json(extra).is_err());
    }

    #[test]
    fn spline_has_no_inverse() {
        let t = GeometricTransform::new(Warp::Tps(ThinPlateSpline::identity()), (4, 4), (4, 4)).unwrap();
        assert!(t.apply_inverse(Point2::new(1.0, 1.0)).is_err());
    }
}
