use rayon::prelude::*;

use crate::geometry::Point2;
use crate::imaging::{FlowField, Image};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseConfig {
    /// Pyramid depth including full resolution; reduced when images get small.
    pub levels: usize,
    pub patch_radius: usize,
    /// Local search half-width at refinement levels.
    pub search_radius: usize,
    /// Final peak ZNCC below this marks the pixel invalid.
    pub min_correlation: f64,
    /// Half-width of the median filter applied between levels.
    pub median_radius: usize,
    /// Final targets farther than this from their local median are replaced
    /// by the median, which must itself pass the correlation test.
    pub consistency_tolerance: f64,
    /// Patches with an intensity standard deviation below this are not
    /// searched; they inherit the coarser estimate.
    pub min_contrast: f64,
    /// Backward check: matching the reference patch back into the marker
    /// must score within this margin of its best near the starting pixel.
    pub return_margin: f64,
    /// Half-width of the backward search window.
    pub return_radius: usize,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            patch_radius: 6,
            search_radius: 3,
            min_correlation: 0.2,
            median_radius: 2,
            consistency_tolerance: 3.0,
            min_contrast: 0.01,
            return_margin: 0.02,
            return_radius: 3,
        }
    }
}

#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_image(img: &Image) -> Self {
        let g = img.to_gray();
        Self {
            w: g.width(),
            h: g.height(),
            data: g.data().to_vec(),
        }
    }

    /// 5-tap binomial blur then decimation; pixel `2k` maps to `k`.
    fn down(&self) -> Self {
        const T: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let blurred = crate::matcher::harris::blur(&self.data, self.w, self.h, &T);
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(blurred[2 * y * self.w + 2 * x]);
            }
        }
        Self { w, h, data }
    }
}

/// Integral images of the reference for O(1) patch statistics.
struct RefStats {
    w: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl RefStats {
    fn new(p: &Plane) -> Self {
        let w = p.w + 1;
        let mut sum = vec![0.0; w * (p.h + 1)];
        let mut sq = vec![0.0; w * (p.h + 1)];
        for y in 0..p.h {
            for x in 0..p.w {
                let v = p.data[y * p.w + x];
                let i = (y + 1) * w + x + 1;
                sum[i] = v + sum[i - 1] + sum[i - w] - sum[i - w - 1];
                sq[i] = v * v + sq[i - 1] + sq[i - w] - sq[i - w - 1];
            }
        }
        Self { w, sum, sq }
    }

    /// Centered patch energy `sqrt(sum r^2 - (sum r)^2 / n)` over `[x0, x1) x [y0, y1)`.
    fn energy(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let rect = |t: &[f64]| t[y1 * self.w + x1] - t[y0 * self.w + x1] - t[y1 * self.w + x0] + t[y0 * self.w + x0];
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let s = rect(&self.sum);
        (rect(&self.sq) - s * s / n).max(0.0).sqrt()
    }
}

struct Matcher<'a> {
    marker: &'a Plane,
    reference: &'a Plane,
    stats: RefStats,
    r: usize,
    /// Zero-mean, unit-norm marker patches over their in-bounds part, zero
    /// elsewhere; all zeros on flat patches.
    patches: Vec<f64>,
    /// In-bounds window `[x0, x1) x [y0, y1)` of each patch, in patch coordinates.
    windows: Vec<[usize; 4]>,
    informative: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Est {
    target: Point2,
    score: f64,
    informative: bool,
}

impl<'a> Matcher<'a> {
    fn new(marker: &'a Plane, reference: &'a Plane, r: usize, min_contrast: f64) -> Self {
        let side = 2 * r + 1;
        let n = side * side;
        let windows: Vec<[usize; 4]> = (0..marker.w * marker.h)
            .map(|i| {
                let (x, y) = (i % marker.w, i / marker.w);
                [
                    r.saturating_sub(x),
                    (marker.w + r - x).min(side),
                    r.saturating_sub(y),
                    (marker.h + r - y).min(side),
                ]
            })
            .collect();
        let mut patches = vec![0.0; marker.w * marker.h * n];
        patches.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            let (x, y) = (i % marker.w, i / marker.w);
            let [x0, x1, y0, y1] = windows[i];
            let count = ((x1 - x0) * (y1 - y0)) as f64;
            let mut mean = 0.0;
            for py in y0..y1 {
                for px in x0..x1 {
                    let v = marker.data[(y + py - r) * marker.w + x + px - r];
                    out[py * side + px] = v;
                    mean += v;
                }
            }
            mean /= count;
            let mut norm = 0.0;
            for py in y0..y1 {
                for px in x0..x1 {
                    out[py * side + px] -= mean;
                    norm += out[py * side + px] * out[py * side + px];
                }
            }
            let norm = norm.sqrt();
            if norm < min_contrast * count.sqrt() {
                out.iter_mut().for_each(|v| *v = 0.0);
            } else {
                out.iter_mut().for_each(|v| *v /= norm);
            }
        });
        let informative = patches.par_chunks(n).map(|p| p.iter().any(|v| *v != 0.0)).collect();
        Self {
            marker,
            reference,
            stats: RefStats::new(reference),
            r,
            patches,
            windows,
            informative,
        }
    }

    /// True when the in-bounds window of patch `i` centered at (u, v) lies inside the reference.
    fn in_range(&self, i: usize, u: isize, v: isize) -> bool {
        let r = self.r as isize;
        let [x0, x1, y0, y1] = self.windows[i].map(|v| v as isize);
        u - r + x0 >= 0
            && v - r + y0 >= 0
            && u - r + x1 <= self.reference.w as isize
            && v - r + y1 <= self.reference.h as isize
    }

    /// ZNCC between marker patch `i` and the reference patch centered at (u, v).
    fn score(&self, i: usize, u: isize, v: isize) -> Option<f64> {
        if !self.in_range(i, u, v) {
            return None;
        }
        let r = self.r;
        let side = 2 * r + 1;
        let p = &self.patches[i * side * side..(i + 1) * side * side];
        let [x0, x1, y0, y1] = self.windows[i];
        let (u0, v0) = ((u + x0 as isize) as usize - r, (v + y0 as isize) as usize - r);
        let mut dot = 0.0;
        for dy in y0..y1 {
            let row = &self.reference.data[(v0 + dy - y0) * self.reference.w + u0..][..x1 - x0];
            dot += p[dy * side + x0..dy * side + x1].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        let e = self.stats.energy(u0, v0, u0 + x1 - x0, v0 + y1 - y0);
        Some(if e < 1e-9 { 0.0 } else { dot / e })
    }

    /// Matches the reference patch at `target` back into the marker within
    /// `radius` of pixel `i`; true when the best score within one pixel of
    /// home is within `margin` of the best score overall.
    fn returns_home(&self, i: usize, target: Point2, radius: usize, margin: f64, marker_stats: &RefStats) -> bool {
        let (r, side) = (self.r as isize, 2 * self.r + 1);
        let [x0, x1, y0, y1] = self.windows[i];
        let (u, v) = (target.x.round() as isize, target.y.round() as isize);
        let (rw, rh) = (self.reference.w as isize, self.reference.h as isize);
        if u - r + (x0 as isize) < 0 || v - r + (y0 as isize) < 0 || u - r + x1 as isize > rw || v - r + y1 as isize > rh {
            return true;
        }
        let count = ((x1 - x0) * (y1 - y0)) as f64;
        let mut patch = vec![0.0; side * side];
        let mut mean = 0.0;
        for py in y0..y1 {
            for px in x0..x1 {
                let val = self.reference.data[(v - r + py as isize) as usize * self.reference.w + (u - r + px as isize) as usize];
                patch[py * side + px] = val;
                mean += val;
            }
        }
        mean /= count;
        let mut norm = 0.0;
        for py in y0..y1 {
            for px in x0..x1 {
                patch[py * side + px] -= mean;
                norm += patch[py * side + px] * patch[py * side + px];
            }
        }
        if norm.sqrt() < 1e-9 {
            return false;
        }
        let (mw, mh) = (self.marker.w as isize, self.marker.h as isize);
        let (x, y) = ((i % self.marker.w) as isize, (i / self.marker.w) as isize);
        let rad = radius as isize;
        let mut best = f64::NEG_INFINITY;
        let mut home = f64::NEG_INFINITY;
        for cy in y - rad..=y + rad {
            for cx in x - rad..=x + rad {
                let (ax, ay) = (cx - r + x0 as isize, cy - r + y0 as isize);
                let (bx, by) = (cx - r + x1 as isize, cy - r + y1 as isize);
                if ax < 0 || ay < 0 || bx > mw || by > mh {
                    continue;
                }
                let mut dot = 0.0;
                for py in y0..y1 {
                    let row = &self.marker.data[(cy - r + py as isize) as usize * self.marker.w + ax as usize..][..x1 - x0];
                    dot += patch[py * side + x0..py * side + x1].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                }
                let e = marker_stats.energy(ax as usize, ay as usize, bx as usize, by as usize);
                let score = if e < 1e-9 { 0.0 } else { dot / e };
                best = best.max(score);
                if (cx - x).abs() <= 1 && (cy - y).abs() <= 1 {
                    home = home.max(score);
                }
            }
        }
        home >= best - margin
    }

    /// Parabolic peak refinement around the integer best (u, v).
    fn refine(&self, i: usize, u: isize, v: isize, s0: f64) -> Point2 {
        let offset = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => {
                let den = a - 2.0 * s0 + b;
                if den < 0.0 {
                    (0.5 * (a - b) / den).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        let dx = offset(self.score(i, u - 1, v), self.score(i, u + 1, v));
        let dy = offset(self.score(i, u, v - 1), self.score(i, u, v + 1));
        Point2::new(u as f64 + dx, v as f64 + dy)
    }

    fn best_in(&self, i: usize, us: std::ops::RangeInclusive<isize>, vs: std::ops::RangeInclusive<isize>) -> Option<(Point2, f64)> {
        let mut best: Option<(isize, isize, f64)> = None;
        for v in vs {
            for u in us.clone() {
                if let Some(s) = self.score(i, u, v) {
                    if best.is_none_or(|(_, _, b)| s > b) {
                        best = Some((u, v, s));
                    }
                }
            }
        }
        best.map(|(u, v, s)| (self.refine(i, u, v, s), s))
    }

    fn exhaustive(&self) -> Vec<Est> {
        let (rw, rh) = (self.reference.w as isize, self.reference.h as isize);
        (0..self.marker.w * self.marker.h)
            .into_par_iter()
            .map(|i| {
                let found = self.informative[i].then(|| self.best_in(i, 0..=rw - 1, 0..=rh - 1)).flatten();
                match found {
                    Some((target, score)) => Est {
                        target,
                        score,
                        informative: true,
                    },
                    None => Est {
                        target: Point2::new(0.0, 0.0),
                        score: -1.0,
                        informative: false,
                    },
                }
            })
            .collect()
    }

    fn local(&self, predicted: &[Est], radius: usize) -> Vec<Est> {
        let rad = radius as isize;
        (0..self.marker.w * self.marker.h)
            .into_par_iter()
            .map(|i| {
                let p = predicted[i];
                if !self.informative[i] {
                    return Est { informative: false, ..p };
                }
                let (cu, cv) = (p.target.x.round() as isize, p.target.y.round() as isize);
                match self.best_in(i, cu - rad..=cu + rad, cv - rad..=cv + rad) {
                    Some((target, score)) => Est {
                        target,
                        score,
                        informative: true,
                    },
                    None => Est { informative: false, ..p },
                }
            })
            .collect()
    }
}

/// Gives uninformative pixels the displacement and score of the nearest
/// informative one by repeated 4-neighbour dilation. Ties go to the first neighbour in
/// left, right, up, down order.
fn fill_uninformative(est: &mut [Est], w: usize, h: usize) {
    let mut filled: Vec<bool> = est.iter().map(|e| e.informative).collect();
    if !filled.iter().any(|&f| f) {
        return;
    }
    while filled.iter().any(|&f| !f) {
        let snapshot = filled.clone();
        for i in 0..w * h {
            if snapshot[i] {
                continue;
            }
            let (x, y) = (i % w, i / w);
            let nbrs = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            if let Some(j) = nbrs.into_iter().flatten().find(|&j| snapshot[j]) {
                let (jx, jy) = ((j % w) as f64, (j / w) as f64);
                est[i] = Est {
                    target: Point2::new(est[j].target.x - jx + x as f64, est[j].target.y - jy + y as f64),
                    score: est[j].score,
                    informative: false,
                };
                filled[i] = true;
            }
        }
    }
}

fn lower_median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Component-wise lower median of informative displacements in each window,
/// returned as targets.
fn median_filter(est: &[Est], w: usize, h: usize, r: usize) -> Vec<Point2> {
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for ny in y.saturating_sub(r)..(y + r + 1).min(h) {
                for nx in x.saturating_sub(r)..(x + r + 1).min(w) {
                    let e = est[ny * w + nx];
                    if e.informative {
                        xs.push(e.target.x - nx as f64);
                        ys.push(e.target.y - ny as f64);
                    }
                }
            }
            if xs.is_empty() {
                est[i].target
            } else {
                Point2::new(x as f64 + lower_median(&mut xs), y as f64 + lower_median(&mut ys))
            }
        })
        .collect()
}

/// Bilinear upsampling of a coarse target field onto the next finer grid.
/// Scores are carried over from the nearest coarse pixel.
fn upsample(t: &[Point2], est: &[Est], cw: usize, ch: usize, fw: usize, fh: usize) -> Vec<Est> {
    let mut out = Vec::with_capacity(fw * fh);
    for y in 0..fh {
        for x in 0..fw {
            let (cx, cy) = ((x as f64 / 2.0).min((cw - 1) as f64), (y as f64 / 2.0).min((ch - 1) as f64));
            let (x0, y0) = (cx.floor() as usize, cy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(cw - 1), (y0 + 1).min(ch - 1));
            let (fx, fy) = (cx - x0 as f64, cy - y0 as f64);
            let lerp = |a: Point2, b: Point2, f: f64| Point2::new((1.0 - f) * a.x + f * b.x, (1.0 - f) * a.y + f * b.y);
            let top = lerp(t[y0 * cw + x0], t[y0 * cw + x1], fx);
            let bot = lerp(t[y1 * cw + x0], t[y1 * cw + x1], fx);
            let p = lerp(top, bot, fy);
            let near = est[((y / 2).min(ch - 1)) * cw + (x / 2).min(cw - 1)];
            out.push(Est {
                target: Point2::new(2.0 * p.x, 2.0 * p.y),
                score: near.score,
                informative: false,
            });
        }
    }
    out
}

/// Coarse-to-fine ZNCC correspondence from every marker pixel into the reference.
///
/// The coarsest level is searched exhaustively; each finer level searches
/// locally around the upsampled estimate, with a median filter in between.
/// Low-contrast marker patches are not searched and inherit the coarser
/// estimate. At full resolution each match is checked backwards (reference
/// patch into the marker); pixels that disagree with their neighbourhood
/// take the neighbourhood median; pixels whose correlation ends up below
/// `min_correlation` are marked invalid.
pub fn dense_match(marker: &Image, reference: &Image, cfg: &DenseConfig) -> FlowField {
    dense_match_scored(marker, reference, cfg).flow
}

/// Flow plus the per-pixel correlation each validity decision was based on.
#[derive(Debug, Clone)]
pub struct DenseMatch {
    pub flow: FlowField,
    /// Row-major; negative infinity where the backward check failed.
    pub correlation: Vec<f64>,
}

pub fn dense_match_scored(marker: &Image, reference: &Image, cfg: &DenseConfig) -> DenseMatch {
    let (mw, mh) = marker.size();
    let side = 2 * cfg.patch_radius + 1;
    let mut mp = vec![Plane::from_image(marker)];
    let mut rp = vec![Plane::from_image(reference)];
    if rp[0].w < side || rp[0].h < side {
        return DenseMatch {
            flow: FlowField::invalid(mw, mh),
            correlation: vec![f64::NEG_INFINITY; mw * mh],
        };
    }
    let min_side = (2 * side).max(16);
    while mp.len() < cfg.levels.max(1) {
        let (m, r) = (mp.last().unwrap().down(), rp.last().unwrap().down());
        if m.w.min(m.h) < min_side || r.w.min(r.h) < min_side {
            break;
        }
        mp.push(m);
        rp.push(r);
    }
    let top = mp.len() - 1;
    let mut est = Matcher::new(&mp[top], &rp[top], cfg.patch_radius, cfg.min_contrast).exhaustive();
    fill_uninformative(&mut est, mp[top].w, mp[top].h);
    for l in (0..top).rev() {
        let (cw, ch) = (mp[l + 1].w, mp[l + 1].h);
        let smoothed = median_filter(&est, cw, ch, cfg.median_radius);
        let predicted = upsample(&smoothed, &est, cw, ch, mp[l].w, mp[l].h);
        est = Matcher::new(&mp[l], &rp[l], cfg.patch_radius, cfg.min_contrast).local(&predicted, cfg.search_radius);
    }
    let finest = Matcher::new(&mp[0], &rp[0], cfg.patch_radius, cfg.min_contrast);
    let marker_stats = RefStats::new(&mp[0]);
    est.par_iter_mut().enumerate().for_each(|(i, e)| {
        if e.informative && e.score >= cfg.min_correlation && !finest.returns_home(i, e.target, cfg.return_radius, cfg.return_margin, &marker_stats) {
            e.score = f64::NEG_INFINITY;
        }
    });
    // unverifiable pixels borrow the correlation of the nearest verified one
    let mut verified = est.clone();
    fill_uninformative(&mut verified, mw, mh);
    for (e, v) in est.iter_mut().zip(&verified) {
        if !e.informative {
            e.score = v.score;
        }
    }
    let med = median_filter(&est, mw, mh, cfg.median_radius);
    let (rw, rh) = ((reference.width() - 1) as f64, (reference.height() - 1) as f64);
    let inside = |p: Point2| p.x >= 0.0 && p.y >= 0.0 && p.x <= rw && p.y <= rh;
    let decided: Vec<(Point2, f64, bool)> = (0..mw * mh)
        .into_par_iter()
        .map(|i| {
            let Est { target, score, informative } = est[i];
            if target.distance(&med[i]) <= cfg.consistency_tolerance {
                return (target, score, inside(target));
            }
            // outlier: fall back to the neighbourhood median if it correlates
            let m = med[i];
            let s = if informative {
                finest.score(i, m.x.round() as isize, m.y.round() as isize).unwrap_or(-1.0)
            } else {
                score
            };
            (m, s, inside(m))
        })
        .collect();
    let flow = FlowField::from_fn(mw, mh, |x, y| {
        let (p, s, inside) = decided[y * mw + x];
        (s >= cfg.min_correlation && inside).then_some(p)
    });
    DenseMatch {
        flow,
        correlation: decided.iter().map(|d| d.1).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::procedural_texture;

    #[test]
    fn translated_crop_is_recovered() {
        let reference = procedural_texture(200, 160, 3);
        let (ox, oy) = (37, 21);
        let marker = Image::from_fn(100, 80, 3, |x, y, c| reference.get(x + ox, y + oy, c)).unwrap();
        let flow = dense_match(&marker, &reference, &DenseConfig::default());
        let mut good = 0;
        for (x, y, p) in flow.iter_valid() {
            if p.distance(&Point2::new((x + ox) as f64, (y + oy) as f64)) < 1.0 {
                good += 1;
            }
        }
        assert!(good as f64 >= 0.9 * (100.0 * 80.0), "{good}");
    }

    #[test]
    fn median_is_lower() {
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), 2.0);
    }
}
