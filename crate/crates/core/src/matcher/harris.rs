use std::cmp::Ordering;

use crate::geometry::Point2;
use crate::imaging::Image;

use super::Keypoint;

/// Detections closer than this to the border cannot be described.
const DESCRIPTOR_BORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisConfig {
    pub k: f64,
    /// Gaussian integration scale of the structure tensor.
    pub sigma: f64,
    /// Responses below `relative_threshold * max_response` are dropped.
    pub relative_threshold: f64,
    pub nms_radius: usize,
    /// Detections closer than this to the border are dropped.
    pub border: usize,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        Self {
            k: 0.04,
            sigma: 1.5,
            relative_threshold: 0.001,
            nms_radius: 5,
            border: DESCRIPTOR_BORDER,
        }
    }
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable blur with replicated borders.
pub(crate) fn blur(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * data[y * w + clamp(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * tmp[clamp(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Harris response `det(M) - k tr(M)^2` of the grayscale image.
pub fn harris_response(img: &Image, cfg: &HarrisConfig) -> Vec<f64> {
    let g = img.to_gray();
    let (w, h) = g.size();
    let px = |x: isize, y: isize| g.get(x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize, 0);
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            // Sobel
            let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let taps = gaussian_taps(cfg.sigma);
    let (sxx, syy, sxy) = (blur(&ixx, w, h, &taps), blur(&iyy, w, h, &taps), blur(&ixy, w, h, &taps));
    (0..w * h)
        .map(|i| {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let tr = sxx[i] + syy[i];
            det - cfg.k * tr * tr
        })
        .collect()
}

/// Up to `max_count` Harris corners, strongest first.
pub fn detect_corners(img: &Image, max_count: usize) -> Vec<Keypoint> {
    detect_corners_with(img, max_count, &HarrisConfig::default())
}

pub fn detect_corners_with(img: &Image, max_count: usize, cfg: &HarrisConfig) -> Vec<Keypoint> {
    let (w, h) = img.size();
    if w <= 2 * cfg.border || h <= 2 * cfg.border {
        return Vec::new();
    }
    let resp = harris_response(img, cfg);
    let max = resp.iter().cloned().fold(0.0, f64::max);
    if max <= 1e-12 {
        return Vec::new();
    }
    let threshold = cfg.relative_threshold * max;
    let r = cfg.nms_radius as isize;
    let mut out = Vec::new();
    for y in cfg.border..h - cfg.border {
        for x in cfg.border..w - cfg.border {
            let v = resp[y * w + x];
            if v <= threshold {
                continue;
            }
            // strict maximum; ties resolved toward the earlier pixel in row-major order
            let mut is_max = true;
            'nms: for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = resp[ny as usize * w + nx as usize];
                    let earlier = (dy, dx) < (0, 0);
                    if n > v || (n == v && earlier) {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if is_max {
                out.push(Keypoint {
                    location: Point2::new(x as f64, y as f64),
                    response: v,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.response
            .partial_cmp(&a.response)
            .unwrap_or(Ordering::Equal)
            .then(a.location.y.total_cmp(&b.location.y))
            .then(a.location.x.total_cmp(&b.location.x))
    });
    out.truncate(max_count);
    out
}
