use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{BenchmarkReport, EvalRecord, Subset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Lower median for even counts.
    pub median: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Stats {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: v[(v.len() - 1) / 2],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PckRow {
    /// Records with ground truth, failed ones included at PCK 0.
    pub records: usize,
    pub pck1: f64,
    pub pck3: f64,
    pub pck5: f64,
    /// Over scored records only.
    pub epe_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub level: u32,
    pub total: usize,
    pub scored: usize,
    pub ssim_mean: Option<f64>,
    pub psnr_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub subset: Subset,
    pub total: usize,
    pub scored: usize,
    pub failed: usize,
    pub failed_pct: f64,
    pub ssim: Option<Stats>,
    pub psnr: Option<Stats>,
    pub pck: Option<PckRow>,
    pub levels: Vec<LevelPoint>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SubsetSummary {
    pub(crate) fn build(subset: Subset, all: &[EvalRecord]) -> Option<Self> {
        let recs: Vec<&EvalRecord> = all.iter().filter(|r| r.subset == subset).collect();
        if recs.is_empty() {
            return None;
        }
        let scored: Vec<&&EvalRecord> = recs.iter().filter(|r| r.is_scored()).collect();
        let ssim: Vec<f64> = scored.iter().filter_map(|r| r.ssim).collect();
        let psnr: Vec<f64> = scored.iter().filter_map(|r| r.psnr).collect();
        let with_gt: Vec<[f64; 3]> = recs.iter().filter_map(|r| r.pck).collect();
        let pck = (!with_gt.is_empty()).then(|| {
            let n = with_gt.len() as f64;
            let col = |k: usize| with_gt.iter().map(|p| p[k]).sum::<f64>() / n;
            let epes: Vec<f64> = scored.iter().filter_map(|r| r.epe_mean).collect();
            PckRow {
                records: with_gt.len(),
                pck1: col(0),
                pck3: col(1),
                pck5: col(2),
                epe_mean: mean(&epes),
            }
        });
        let levels: Vec<u32> = match subset.level_range() {
            Some(r) => r.collect(),
            None => {
                let mut l: Vec<u32> = recs.iter().map(|r| r.level).collect();
                l.sort_unstable();
                l.dedup();
                l
            }
        };
        let levels = levels
            .into_iter()
            .map(|level| {
                let at: Vec<&&EvalRecord> = recs.iter().filter(|r| r.level == level).collect();
                let ok: Vec<&&&EvalRecord> = at.iter().filter(|r| r.is_scored()).collect();
                LevelPoint {
                    level,
                    total: at.len(),
                    scored: ok.len(),
                    ssim_mean: mean(&ok.iter().filter_map(|r| r.ssim).collect::<Vec<_>>()),
                    psnr_mean: mean(&ok.iter().filter_map(|r| r.psnr).collect::<Vec<_>>()),
                }
            })
            .collect();
        Some(Self {
            subset,
            total: recs.len(),
            scored: scored.len(),
            failed: recs.len() - scored.len(),
            failed_pct: 100.0 * (recs.len() - scored.len()) as f64 / recs.len() as f64,
            ssim: Stats::of(&ssim),
            psnr: Stats::of(&psnr),
            pck,
            levels,
        })
    }
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

impl BenchmarkReport {
    /// Column-aligned text report: alignment table, PCK table, level curves.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "estimator: {}", self.estimator);
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>6} {:>8} {:>10} {:>12} {:>10} {:>12}",
            "subset", "total", "failed", "failed%", "SSIM mean", "SSIM median", "PSNR mean", "PSNR median"
        );
        for sub in &self.subsets {
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>6} {:>8.2} {:>10} {:>12} {:>10} {:>12}",
                sub.subset.as_str(),
                sub.total,
                sub.failed,
                sub.failed_pct,
                cell(sub.ssim.map(|x| x.mean), 4),
                cell(sub.ssim.map(|x| x.median), 4),
                cell(sub.psnr.map(|x| x.mean), 2),
                cell(sub.psnr.map(|x| x.median), 2),
            );
        }
        let pck: Vec<_> = self.subsets.iter().filter_map(|x| x.pck.map(|p| (x.subset, p))).collect();
        if !pck.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{:<12} {:>7} {:>8} {:>8} {:>8} {:>10}",
                "subset", "records", "PCK-1", "PCK-3", "PCK-5", "EPE mean"
            );
            for (sub, p) in pck {
                let _ = writeln!(
                    s,
                    "{:<12} {:>7} {:>8.4} {:>8.4} {:>8.4} {:>10}",
                    sub.as_str(),
                    p.records,
                    p.pck1,
                    p.pck3,
                    p.pck5,
                    cell(p.epe_mean, 4)
                );
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<12} {:>5} {:>6} {:>6} {:>10} {:>10}",
            "subset", "level", "total", "scored", "SSIM mean", "PSNR mean"
        );
        for sub in &self.subsets {
            for l in &sub.levels {
                let _ = writeln!(
                    s,
                    "{:<12} {:>5} {:>6} {:>6} {:>10} {:>10}",
                    sub.subset.as_str(),
                    l.level,
                    l.total,
                    l.scored,
                    cell(l.ssim_mean, 4),
                    cell(l.psnr_mean, 2)
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMetric {
    Ssim,
    Psnr,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Per-level mean curves, one panel per physical subset and one series per report.
pub fn level_curves_svg(reports: &[&BenchmarkReport], metric: CurveMetric) -> String {
    let (pw, ph, m) = (280.0, 220.0, 40.0);
    let panels = [Subset::Deformation, Subset::Viewpoint, Subset::Lighting];
    let (ymin, ymax, label) = match metric {
        CurveMetric::Ssim => (0.0, 1.0, "SSIM"),
        CurveMetric::Psnr => (0.0, 50.0, "PSNR (dB)"),
    };
    let width = pw * panels.len() as f64;
    let height = ph + 20.0 * reports.len() as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (k, subset) in panels.iter().enumerate() {
        let ox = k as f64 * pw;
        let n = subset.level_range().map_or(1, |r| *r.end()) as f64;
        let sx = |level: f64| ox + m + (level - 1.0) / (n - 1.0).max(1.0) * (pw - 1.5 * m);
        let sy = |v: f64| ph - m - (v.clamp(ymin, ymax) - ymin) / (ymax - ymin) * (ph - 1.5 * m);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="14" text-anchor="middle">{}</text>"#,
            ox + pw / 2.0,
            subset.as_str()
        );
        let _ = writeln!(
            s,
            r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#,
            x0 = ox + m,
            y0 = ph - m,
            y1 = m / 2.0,
            x1 = ox + pw - m / 2.0
        );
        for level in 1..=n as u32 {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{level}</text>"#,
                sx(level as f64),
                ph - m + 14.0
            );
        }
        for v in [ymin, (ymin + ymax) / 2.0, ymax] {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, ox + m - 4.0, sy(v) + 4.0);
        }
        if k == 0 {
            let _ = writeln!(s, r#"<text x="4" y="{}" transform="rotate(-90 10 {})">{label}</text>"#, ph / 2.0, ph / 2.0);
        }
        for (ri, rep) in reports.iter().enumerate() {
            let Some(sub) = rep.subset(*subset) else { continue };
            let pts: Vec<String> = sub
                .levels
                .iter()
                .filter_map(|l| {
                    let v = match metric {
                        CurveMetric::Ssim => l.ssim_mean,
                        CurveMetric::Psnr => l.psnr_mean,
                    }?;
                    Some(format!("{:.2},{:.2}", sx(l.level as f64), sy(v)))
                })
                .collect();
            let color = PALETTE[ri % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
    }
    for (ri, rep) in reports.iter().enumerate() {
        let y = ph + 14.0 + 20.0 * ri as f64;
        let color = PALETTE[ri % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{m}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            m + 24.0,
            m + 30.0,
            y + 4.0,
            rep.estimator
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_median() {
        assert_eq!(Stats::of(&[4.0, 1.0, 3.0, 2.0]).unwrap().median, 2.0);
        assert_eq!(Stats::of(&[3.0, 1.0, 2.0]).unwrap().median, 2.0);
        assert!(Stats::of(&[]).is_none());
    }
}
