use crate::geometry::Point2;

use super::Image;

/// Bilinear interpolation at `p`; `None` when the 2x2 footprint leaves the image.
///
/// Pixel centers are at integer coordinates, so the valid domain is
/// `[0, w-1] x [0, h-1]`. Only the first `img.channels()` entries of the
/// result are meaningful.
#[inline]
pub fn bilinear_sample(img: &Image, p: Point2) -> Option<[f64; 3]> {
    let (w, h) = img.size();
    if w == 0 || h == 0 {
        return None;
    }
    let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);
    if !(p.x >= 0.0 && p.x <= xmax && p.y >= 0.0 && p.y <= ymax) {
        return None;
    }
    let x0 = (p.x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (p.y.floor() as usize).min(h.saturating_sub(2));
    let fx = p.x - x0 as f64;
    let fy = p.y - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let mut out = [0.0; 3];
    let (p00, p10, p01, p11) = (
        img.pixel(x0, y0),
        img.pixel(x1, y0),
        img.pixel(x0, y1),
        img.pixel(x1, y1),
    );
    for c in 0..img.channels() {
        let top = (1.0 - fx) * p00[c] + fx * p10[c];
        let bottom = (1.0 - fx) * p01[c] + fx * p11[c];
        out[c] = (1.0 - fy) * top + fy * bottom;
    }
    Some(out)
}
