use crate::error::{Error, Result};
use crate::geometry::{GeometricTransform, Point2, Warp};

use super::{bilinear_sample, FlowField, Image};

/// Reference-canvas pixels covered by a warped marker.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidRegion {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    count: usize,
}

impl ValidRegion {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::mismatch(width * height, mask.len()));
        }
        let count = mask.iter().filter(|&&m| m).count();
        Ok(Self {
            width,
            height,
            mask,
            count,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![true; width * height]).expect("sizes agree")
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height]).expect("sizes agree")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn intersect(&self, other: &ValidRegion) -> Result<ValidRegion> {
        if self.size() != other.size() {
            return Err(Error::mismatch(
                format!("{:?}", self.size()),
                format!("{:?}", other.size()),
            ));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        ValidRegion::new(self.width, self.height, mask)
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)`, or `None` when empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.mask.iter().enumerate().filter(|(_, &m)| m) {
            let (x, y) = (i % self.width, i / self.width);
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bb
    }

    pub fn to_image(&self) -> Image {
        Image::new(
            self.width,
            self.height,
            1,
            self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dimensions")
    }
}

const BARY_EPS: f64 = 1e-9;
const BOUNDS_EPS: f64 = 1e-7;

/// Samples the marker at `p`, tolerating round-off just outside its domain.
fn sample_clamped(marker: &Image, p: Point2) -> Option<[f64; 3]> {
    let (xm, ym) = ((marker.width() - 1) as f64, (marker.height() - 1) as f64);
    if p.x < -BOUNDS_EPS || p.y < -BOUNDS_EPS || p.x > xm + BOUNDS_EPS || p.y > ym + BOUNDS_EPS {
        return None;
    }
    bilinear_sample(marker, Point2::new(p.x.clamp(0.0, xm), p.y.clamp(0.0, ym)))
}

/// Forward-warps `marker` onto a `reference_size` canvas along `flow`.
///
/// Every 2x2 cell of marker pixel centers whose four corners are valid is
/// split into two triangles and rasterized on the canvas. Each covered
/// canvas pixel takes the marker color at the barycentric preimage of its
/// center, so the result has no splatting holes. Uncovered pixels stay
/// black and are excluded from the returned region, which is defined by
/// coverage rather than by color.
pub fn warp_by_flow(
    marker: &Image,
    flow: &FlowField,
    reference_size: (usize, usize),
) -> Result<(Image, ValidRegion)> {
    if flow.size() != marker.size() {
        return Err(Error::mismatch(
            format!("flow of {:?}", marker.size()),
            format!("{:?}", flow.size()),
        ));
    }
    let (rw, rh) = reference_size;
    let mut out = Image::filled(rw, rh, marker.channels(), 0.0);
    let mut mask = vec![false; rw * rh];
    let (mw, mh) = marker.size();
    if mw < 2 || mh < 2 || rw == 0 || rh == 0 {
        return Ok((out, ValidRegion::new(rw, rh, mask)?));
    }
    for y in 0..mh - 1 {
        for x in 0..mw - 1 {
            let corners = [
                flow.get(x, y),
                flow.get(x + 1, y),
                flow.get(x + 1, y + 1),
                flow.get(x, y + 1),
            ];
            let [Some(q00), Some(q10), Some(q11), Some(q01)] = corners else {
                continue;
            };
            let (fx, fy) = (x as f64, y as f64);
            let s00 = Point2::new(fx, fy);
            let s10 = Point2::new(fx + 1.0, fy);
            let s11 = Point2::new(fx + 1.0, fy + 1.0);
            let s01 = Point2::new(fx, fy + 1.0);
            for (dst, src) in [
                ([q00, q10, q11], [s00, s10, s11]),
                ([q00, q11, q01], [s00, s11, s01]),
            ] {
                raster_triangle(marker, &dst, &src, &mut out, &mut mask);
            }
        }
    }
    let region = ValidRegion::new(rw, rh, mask)?;
    Ok((out, region))
}

fn raster_triangle(marker: &Image, dst: &[Point2; 3], src: &[Point2; 3], out: &mut Image, mask: &mut [bool]) {
    let (rw, rh) = out.size();
    let e1 = dst[1] - dst[0];
    let e2 = dst[2] - dst[0];
    let det = e1.x * e2.y - e1.y * e2.x;
    if det.abs() < 1e-12 {
        return;
    }
    let min_x = dst.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = dst.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = dst.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = dst.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    if max_x < 0.0 || max_y < 0.0 || min_x > (rw - 1) as f64 || min_y > (rh - 1) as f64 {
        return;
    }
    let x0 = min_x.ceil().max(0.0) as usize;
    let x1 = (max_x.floor() as usize).min(rw - 1);
    let y0 = min_y.ceil().max(0.0) as usize;
    let y1 = (max_y.floor() as usize).min(rh - 1);
    let f1 = src[1] - src[0];
    let f2 = src[2] - src[0];
    for py in y0..=y1 {
        for px in x0..=x1 {
            let d = Point2::new(px as f64 - dst[0].x, py as f64 - dst[0].y);
            let u = (d.x * e2.y - d.y * e2.x) / det;
            let v = (e1.x * d.y - e1.y * d.x) / det;
            if u < -BARY_EPS || v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
                continue;
            }
            let s = Point2::new(src[0].x + u * f1.x + v * f2.x, src[0].y + u * f1.y + v * f2.y);
            if let Some(c) = sample_clamped(marker, s) {
                out.pixel_mut(px, py).copy_from_slice(&c[..marker.channels()]);
                mask[py * rw + px] = true;
            }
        }
    }
}

/// Warps `marker` by resampling through the inverse of an invertible transform.
///
/// Covered pixels are those whose preimage lands inside the marker.
pub fn warp_by_transform(
    marker: &Image,
    t: &GeometricTransform,
    reference_size: (usize, usize),
) -> Result<(Image, ValidRegion)> {
    let (rw, rh) = reference_size;
    let inverse: Box<dyn Fn(Point2) -> Option<Point2>> = match t.warp() {
        Warp::Affine(a) => {
            let a = *a;
            Box::new(move |p| Some(a.apply_inverse(p)))
        }
        Warp::Homography(h) => {
            let inv = h.inverse()?;
            Box::new(move |p| inv.apply(p).ok())
        }
        Warp::Tps(_) => {
            return Err(Error::InvalidInput(
                "inverse-map warping needs an invertible transform".into(),
            ))
        }
    };
    let mut out = Image::filled(rw, rh, marker.channels(), 0.0);
    let mut mask = vec![false; rw * rh];
    for py in 0..rh {
        for px in 0..rw {
            let Some(s) = inverse(Point2::new(px as f64, py as f64)) else {
                continue;
            };
            if let Some(c) = sample_clamped(marker, s) {
                out.pixel_mut(px, py).copy_from_slice(&c[..marker.channels()]);
                mask[py * rw + px] = true;
            }
        }
    }
    Ok((out, ValidRegion::new(rw, rh, mask)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| ((x * 13 + y * 7 + c * 5) % 17) as f64 / 16.0).unwrap()
    }

    #[test]
    fn identity_flow_is_exact() {
        let m = ramp(12, 9);
        let (w, r) = warp_by_flow(&m, &FlowField::identity(12, 9), (12, 9)).unwrap();
        assert_eq!(w, m);
        assert_eq!(r.count(), 12 * 9);
    }

    #[test]
    fn translation_shifts_content() {
        let m = ramp(12, 9);
        let flow = FlowField::identity(12, 9).offset(Point2::new(5.0, 0.0));
        let (w, r) = warp_by_flow(&m, &flow, (12, 9)).unwrap();
        for y in 0..9 {
            for x in 0..12 {
                assert_eq!(r.contains(x, y), x >= 5);
                if x >= 5 {
                    assert_eq!(w.pixel(x, y), m.pixel(x - 5, y));
                } else {
                    assert!(w.pixel(x, y).iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn black_marker_pixels_stay_in_region() {
        let m = Image::filled(5, 5, 3, 0.0);
        let (_, r) = warp_by_flow(&m, &FlowField::identity(5, 5), (5, 5)).unwrap();
        assert_eq!(r.count(), 25);
    }

    #[test]
    fn dimension_mismatch() {
        let m = ramp(4, 4);
        assert!(warp_by_flow(&m, &FlowField::identity(3, 4), (4, 4)).is_err());
    }

    #[test]
    fn invalid_flow_pixels_drop_their_cells() {
        let m = ramp(4, 4);
        let mut f = FlowField::identity(4, 4);
        f.set(0, 0, None);
        let (_, r) = warp_by_flow(&m, &f, (4, 4)).unwrap();
        assert!(!r.contains(0, 0));
        assert!(r.contains(1, 1));
    }
}
