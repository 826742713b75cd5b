use std::cmp::Ordering;

use crate::geometry::Point2;
use crate::imaging::{bilinear_sample, Image};

use super::{Keypoint, Match, MatchSet};

/// Descriptor patches are `(2r+1) x (2r+1)` = 11x11 grayscale windows.
pub const DESCRIPTOR_RADIUS: usize = 5;
/// Best match must be this much closer than the second best.
pub const RATIO_TEST: f64 = 0.9;

/// Radius of the disc used to estimate keypoint orientation.
const ORIENTATION_RADIUS: isize = 7;

/// Intensity-centroid orientation of the disc around `(cx, cy)`, radians.
fn orientation(gray: &Image, cx: isize, cy: isize) -> f64 {
    let r = ORIENTATION_RADIUS;
    let (mut mx, mut my) = (0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let v = gray.get((cx + dx) as usize, (cy + dy) as usize, 0);
            mx += dx as f64 * v;
            my += dy as f64 * v;
        }
    }
    my.atan2(mx)
}

/// Zero-mean, unit-norm 11x11 grayscale patch around `kp`, sampled in the
/// keypoint's intensity-centroid frame. `None` near the border or on flat
/// patches.
pub fn patch_descriptor(gray: &Image, kp: &Keypoint) -> Option<Vec<f64>> {
    let r = DESCRIPTOR_RADIUS as isize;
    let margin = ORIENTATION_RADIUS.max(r * 3 / 2 + 1);
    let (cx, cy) = (kp.location.x.round() as isize, kp.location.y.round() as isize);
    let (w, h) = gray.size();
    if cx - margin < 0 || cy - margin < 0 || cx + margin >= w as isize || cy + margin >= h as isize {
        return None;
    }
    let (sin, cos) = orientation(gray, cx, cy).sin_cos();
    let mut v = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for y in -r..=r {
        for x in -r..=r {
            let (x, y) = (x as f64, y as f64);
            let p = Point2::new(cx as f64 + cos * x - sin * y, cy as f64 + sin * x + cos * y);
            v.push(bilinear_sample(gray, p)?[0]);
        }
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|a| *a -= mean);
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-6 {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    Some(v)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest and second-nearest index of `d` among `others`.
fn two_nearest(d: &[f64], others: &[Option<Vec<f64>>]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut second = f64::INFINITY;
    for (j, o) in others.iter().enumerate() {
        let Some(o) = o else { continue };
        let dist = distance(d, o);
        match best {
            Some((_, b)) if dist >= b => second = second.min(dist),
            Some((_, b)) => {
                second = b;
                best = Some((j, dist));
            }
            None => best = Some((j, dist)),
        }
    }
    best.map(|(j, b)| (j, b, second))
}

/// Mutual nearest-neighbour matches between two keypoint sets, filtered by
/// the ratio test in both directions.
pub fn match_descriptors(a: &Image, kps_a: &[Keypoint], b: &Image, kps_b: &[Keypoint]) -> MatchSet {
    let (ga, gb) = (a.to_gray(), b.to_gray());
    let da: Vec<_> = kps_a.iter().map(|k| patch_descriptor(&ga, k)).collect();
    let db: Vec<_> = kps_b.iter().map(|k| patch_descriptor(&gb, k)).collect();
    let mut matches = Vec::new();
    for (i, d) in da.iter().enumerate() {
        let Some(d) = d else { continue };
        let Some((j, d1, d2)) = two_nearest(d, &db) else { continue };
        if d1 >= RATIO_TEST * d2 {
            continue;
        }
        let Some((back, e1, e2)) = two_nearest(db[j].as_ref().unwrap(), &da) else { continue };
        if back != i || e1 >= RATIO_TEST * e2 {
            continue;
        }
        matches.push(Match {
            marker: kps_a[i],
            reference: kps_b[j],
            distance: d1,
        });
    }
    matches.sort_by(|x, y| x.distance.partial_cmp(&y.distance).unwrap_or(Ordering::Equal));
    MatchSet { matches }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::procedural_texture;
    use crate::matcher::detect_corners;

    #[test]
    fn self_matching_is_identity() {
        let img = procedural_texture(120, 90, 7);
        let kps = detect_corners(&img, 200);
        let m = match_descriptors(&img, &kps, &img, &kps);
        assert!(m.len() as f64 >= 0.9 * kps.len() as f64);
        for x in &m.matches {
            assert_eq!(x.marker.location, x.reference.location);
            assert!(x.distance < 1e-12);
        }
    }

    #[test]
    fn flat_patch_has_no_descriptor() {
        let img = Image::filled(20, 20, 1, 0.5);
        let kp = Keypoint {
            location: Point2::new(10.0, 10.0),
            response: 1.0,
        };
        assert!(patch_descriptor(&img, &kp).is_none());
    }
}
