//! Region-restricted SSIM and PSNR.

use crate::error::{Error, Result};

use super::{Image, ValidRegion};

/// PSNR reported for zero error, and the upper bound of any PSNR value.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Odd window side.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    /// Normalized 1D Gaussian taps.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as isize;
        let taps: Vec<f64> = (-r..=r)
            .map(|i| (-(i * i) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / s).collect()
    }

    fn constants(&self) -> (f64, f64) {
        let c1 = (self.k1 * self.dynamic_range).powi(2);
        let c2 = (self.k2 * self.dynamic_range).powi(2);
        (c1, c2)
    }
}

fn check_inputs(a: &Image, b: &Image, region: &ValidRegion) -> Result<()> {
    if a.size() != b.size() || a.channels() != b.channels() {
        return Err(Error::mismatch(
            format!("{:?}x{}", a.size(), a.channels()),
            format!("{:?}x{}", b.size(), b.channels()),
        ));
    }
    if region.size() != a.size() {
        return Err(Error::mismatch(format!("region {:?}", a.size()), format!("{:?}", region.size())));
    }
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(())
}

/// SSIM with default parameters.
pub fn ssim_value(a: &Image, b: &Image, region: &ValidRegion) -> Result<f64> {
    ssim_with(a, b, region, &SsimConfig::default())
}

/// Mean SSIM over `region` pixels and channels.
///
/// Window statistics only include region pixels, with the Gaussian weights
/// renormalized over them. Computed with separable filtering of the masked
/// moments over the region's bounding box.
pub fn ssim_with(a: &Image, b: &Image, region: &ValidRegion, cfg: &SsimConfig) -> Result<f64> {
    check_inputs(a, b, region)?;
    let kernel = cfg.kernel();
    let r = kernel.len() / 2;
    let (c1, c2) = cfg.constants();
    let (w, h) = a.size();
    let (bx0, by0, bx1, by1) = region.bounding_box().ok_or(Error::EmptyRegion)?;
    let (x0, y0) = (bx0.saturating_sub(r), by0.saturating_sub(r));
    let (x1, y1) = ((bx1 + r).min(w - 1), (by1 + r).min(h - 1));
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);

    let mut total = 0.0;
    let mut moments = vec![vec![0.0; bw * bh]; 6];
    for c in 0..a.channels() {
        for yy in 0..bh {
            for xx in 0..bw {
                let (x, y) = (x0 + xx, y0 + yy);
                let i = yy * bw + xx;
                if region.contains(x, y) {
                    let (va, vb) = (a.get(x, y, c), b.get(x, y, c));
                    moments[0][i] = 1.0;
                    moments[1][i] = va;
                    moments[2][i] = vb;
                    moments[3][i] = va * va;
                    moments[4][i] = vb * vb;
                    moments[5][i] = va * vb;
                } else {
                    for m in moments.iter_mut() {
                        m[i] = 0.0;
                    }
                }
            }
        }
        let blurred: Vec<Vec<f64>> = moments.iter().map(|m| separable_blur(m, bw, bh, &kernel)).collect();
        for yy in 0..bh {
            for xx in 0..bw {
                if !region.contains(x0 + xx, y0 + yy) {
                    continue;
                }
                let i = yy * bw + xx;
                let wsum = blurred[0][i];
                let mu_a = blurred[1][i] / wsum;
                let mu_b = blurred[2][i] / wsum;
                let var_a = blurred[3][i] / wsum - mu_a * mu_a;
                let var_b = blurred[4][i] / wsum - mu_b * mu_b;
                let cov = blurred[5][i] / wsum - mu_a * mu_b;
                total += ssim_formula(mu_a, mu_b, var_a, var_b, cov, c1, c2);
            }
        }
    }
    Ok(total / (region.count() * a.channels()) as f64)
}

#[inline]
pub(crate) fn ssim_formula(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

fn separable_blur(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = k.len() / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            let mut s = 0.0;
            for (xx, v) in row.iter().enumerate().take(hi + 1).skip(lo) {
                s += k[xx + r - x] * v;
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            let mut s = 0.0;
            for yy in lo..=hi {
                s += k[yy + r - y] * tmp[yy * w + x];
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// `10 log10(1 / MSE)` over region pixels and channels, capped at [`PSNR_CAP_DB`].
pub fn psnr_value(a: &Image, b: &Image, region: &ValidRegion) -> Result<f64> {
    check_inputs(a, b, region)?;
    let mut sse = 0.0;
    for (i, _) in region.mask().iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = (i % region.width(), i / region.width());
        for (va, vb) in a.pixel(x, y).iter().zip(b.pixel(x, y)) {
            sse += (va - vb) * (va - vb);
        }
    }
    let mse = sse / (region.count() * a.channels()) as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}
