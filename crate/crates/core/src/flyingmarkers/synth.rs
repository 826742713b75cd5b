use crate::error::{Error, Result};
use crate::geometry::{GeometricTransform, Point2};
use crate::imaging::{warp_by_flow, warp_by_transform, FlowField, Image, ValidRegion};

/// A marker composited into a background along a known transform.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub reference: Image,
    /// Ground truth; valid where the target lands on the canvas.
    pub flow: FlowField,
    /// Canvas pixels overwritten by the marker.
    pub footprint: ValidRegion,
}

/// Dense `apply_transform` over the marker grid. With `clip`, targets off the
/// `[0, W-1] x [0, H-1]` canvas are marked invalid.
pub fn transform_flow(t: &GeometricTransform, clip: bool) -> Result<FlowField> {
    let (mw, mh) = t.marker_size();
    let (rw, rh) = t.reference_size();
    let (xmax, ymax) = (rw as f64 - 1.0, rh as f64 - 1.0);
    let mut flow = FlowField::invalid(mw as usize, mh as usize);
    for y in 0..mh as usize {
        for x in 0..mw as usize {
            let q = match t.apply(Point2::new(x as f64, y as f64)) {
                Ok(q) => q,
                Err(e) if clip => {
                    log::trace!("pixel ({x}, {y}) dropped: {e}");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let inside = (0.0..=xmax).contains(&q.x) && (0.0..=ymax).contains(&q.y);
            if inside || !clip {
                flow.set(x, y, Some(q));
            }
        }
    }
    Ok(flow)
}

/// Warps the marker by `t` and hard-pastes it over `background`.
///
/// Invertible transforms resample through their exact inverse; splines
/// rasterize the marker mesh along the unclipped forward map.
pub fn synthesize_sample(marker: &Image, background: &Image, t: &GeometricTransform) -> Result<Synthesis> {
    let (mw, mh) = t.marker_size();
    let (rw, rh) = t.reference_size();
    if marker.size() != (mw as usize, mh as usize) {
        return Err(Error::mismatch(format!("marker {mw}x{mh}"), format!("{:?}", marker.size())));
    }
    if background.size() != (rw as usize, rh as usize) {
        return Err(Error::mismatch(format!("background {rw}x{rh}"), format!("{:?}", background.size())));
    }
    let marker = marker.to_rgb();
    let background = background.to_rgb();
    let (warped, footprint) = if t.is_invertible() {
        warp_by_transform(&marker, t, (rw as usize, rh as usize))?
    } else {
        warp_by_flow(&marker, &transform_flow(t, false)?, (rw as usize, rh as usize))?
    };
    let flow = transform_flow(t, true)?;
    if flow.valid_count() == 0 || footprint.is_empty() {
        return Err(Error::DegenerateTransform("marker lands entirely off the canvas".into()));
    }
    let mut reference = background;
    for (i, _) in footprint.mask().iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = (i % rw as usize, i / rw as usize);
        reference.pixel_mut(x, y).copy_from_slice(warped.pixel(x, y));
    }
    Ok(Synthesis {
        reference,
        flow,
        footprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AffineTransform, Warp};
    use crate::imaging::procedural_texture;

    #[test]
    fn identity_on_equal_canvas_reproduces_marker() {
        let marker = procedural_texture(40, 30, 1);
        let background = procedural_texture(40, 30, 2);
        let t = GeometricTransform::new(Warp::Affine(AffineTransform::identity()), (40, 30), (40, 30)).unwrap();
        let s = synthesize_sample(&marker, &background, &t).unwrap();
        assert_eq!(s.reference, marker);
        assert_eq!(s.flow, FlowField::identity(40, 30));
        assert_eq!(s.footprint.count(), 1200);
    }

    #[test]
    fn translation_gives_constant_offset() {
        let marker = procedural_texture(20, 10, 1);
        let background = procedural_texture(60, 40, 2);
        let a = AffineTransform::new(0.0, 0.0, 1.0, Point2::new(7.0, 3.0)).unwrap();
        let t = GeometricTransform::new(Warp::Affine(a), (20, 10), (60, 40)).unwrap();
        let s = synthesize_sample(&marker, &background, &t).unwrap();
        for (x, y, q) in s.flow.iter_valid() {
            assert_eq!(q, Point2::new(x as f64 + 7.0, y as f64 + 3.0));
            assert_eq!(s.reference.pixel(x + 7, y + 3), marker.pixel(x, y));
        }
        assert_eq!(s.flow.valid_count(), 200);
        assert_eq!(s.reference.pixel(0, 0), background.pixel(0, 0));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let marker = procedural_texture(20, 10, 1);
        let background = procedural_texture(60, 40, 2);
        let t = GeometricTransform::new(Warp::Affine(AffineTransform::identity()), (20, 12), (60, 40)).unwrap();
        assert!(synthesize_sample(&marker, &background, &t).is_err());
    }
}
