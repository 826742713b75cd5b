//! EPE/PCK evaluation against ground truth and the warp-alignment protocol:
//! warp the marker by the predicted flow, then score SSIM/PSNR against the
//! reference (or its well-lit twin) inside the covered region.

mod dvl;
mod estimator;
mod report;

use std::fmt;
use std::ops::RangeInclusive;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{psnr_value, ssim_value, warp_by_flow, FlowField, Image};
use crate::matcher::MatchOutcome;

pub use dvl::{exposure_curve, generate_dvl, lighting_exposure, viewpoint_angle_deg, DvlConfig};
pub use estimator::{
    DenseEstimator, Estimator, FailingEstimator, FlowDirEstimator, HomographyEstimator, OracleEstimator,
};
pub use report::{level_curves_svg, CurveMetric, LevelPoint, PckRow, Stats, SubsetSummary};

/// PCK thresholds reported in tables, in pixels.
pub const PCK_THRESHOLDS: [f64; 3] = [1.0, 3.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Deformation,
    Viewpoint,
    Lighting,
    Synthetic,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Self::Deformation, Self::Viewpoint, Self::Lighting, Self::Synthetic];

    /// Documented difficulty levels; synthetic sets accept any level >= 1.
    pub fn level_range(&self) -> Option<RangeInclusive<u32>> {
        match self {
            Self::Deformation => Some(1..=5),
            Self::Viewpoint => Some(1..=4),
            Self::Lighting => Some(1..=10),
            Self::Synthetic => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Deformation => "deformation",
            Self::Viewpoint => "viewpoint",
            Self::Lighting => "lighting",
            Self::Synthetic => "synthetic",
        }
    }

    fn check_level(&self, level: u32) -> Result<()> {
        let ok = match self.level_range() {
            Some(r) => r.contains(&level),
            None => level >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("level {level} outside the {self} range")))
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a benchmark manifest. Paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub subset: Subset,
    pub level: u32,
    pub marker: String,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_flow: Option<String>,
}

impl ManifestEntry {
    pub fn validate(&self) -> Result<()> {
        self.subset.check_level(self.level)?;
        if self.subset == Subset::Lighting && self.twin.is_none() {
            return Err(Error::InvalidInput(format!("lighting record {} has no twin", self.id)));
        }
        if self.subset == Subset::Synthetic && self.gt_flow.is_none() {
            return Err(Error::InvalidInput(format!("synthetic record {} has no ground truth", self.id)));
        }
        Ok(())
    }
}

/// Reads and validates a manifest; ids must be unique.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("benchmark manifest: {e}")))?;
    let mut seen = std::collections::HashSet::new();
    for e in &entries {
        e.validate()?;
        if !seen.insert(e.id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate record id {}", e.id)));
        }
    }
    Ok(entries)
}

#[derive(Debug, Clone)]
pub struct BenchmarkSample {
    pub id: String,
    pub subset: Subset,
    pub level: u32,
    pub marker: Image,
    pub reference: Image,
    pub twin: Option<Image>,
    pub gt_flow: Option<FlowField>,
}

impl BenchmarkSample {
    pub fn new(
        id: impl Into<String>,
        subset: Subset,
        level: u32,
        marker: Image,
        reference: Image,
        twin: Option<Image>,
        gt_flow: Option<FlowField>,
    ) -> Result<Self> {
        let id = id.into();
        subset.check_level(level)?;
        if subset == Subset::Lighting && twin.is_none() {
            return Err(Error::InvalidInput(format!("lighting sample {id} has no twin")));
        }
        if subset == Subset::Synthetic && gt_flow.is_none() {
            return Err(Error::InvalidInput(format!("synthetic sample {id} has no ground truth")));
        }
        if let Some(t) = &twin {
            if t.size() != reference.size() {
                return Err(Error::mismatch(format!("twin {:?}", reference.size()), format!("{:?}", t.size())));
            }
        }
        if let Some(g) = &gt_flow {
            if g.size() != marker.size() {
                return Err(Error::mismatch(format!("gt flow {:?}", marker.size()), format!("{:?}", g.size())));
            }
        }
        Ok(Self {
            id,
            subset,
            level,
            marker,
            reference,
            twin,
            gt_flow,
        })
    }

    pub fn load(entry: &ManifestEntry, base: &Path) -> Result<Self> {
        let twin = entry.twin.as_ref().map(|p| Image::load(base.join(p))).transpose()?;
        let gt = entry.gt_flow.as_ref().map(|p| FlowField::read_flo(base.join(p))).transpose()?;
        Self::new(
            entry.id.clone(),
            entry.subset,
            entry.level,
            Image::load(base.join(&entry.marker))?,
            Image::load(base.join(&entry.reference))?,
            twin,
            gt,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpeResult {
    /// Per-pixel error; NaN where either flow is invalid.
    pub map: Vec<f64>,
    pub mean: f64,
    pub count: usize,
}

fn check_sizes(pred: &FlowField, gt: &FlowField) -> Result<()> {
    if pred.size() != gt.size() {
        return Err(Error::mismatch(format!("{:?}", gt.size()), format!("{:?}", pred.size())));
    }
    Ok(())
}

/// End-point error over pixels valid in both flows.
pub fn epe(pred: &FlowField, gt: &FlowField) -> Result<EpeResult> {
    check_sizes(pred, gt)?;
    let (w, h) = gt.size();
    let mut map = vec![f64::NAN; w * h];
    let mut sum = 0.0;
    let mut count = 0;
    for (i, m) in map.iter_mut().enumerate() {
        if let (Some(p), Some(g)) = (pred.get_index(i), gt.get_index(i)) {
            *m = p.distance(&g);
            sum += *m;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(EpeResult {
        map,
        mean: sum / count as f64,
        count,
    })
}

/// Fraction of ground-truth-valid pixels with EPE strictly below `delta`.
/// Pixels the prediction leaves invalid count as incorrect.
pub fn pck(pred: &FlowField, gt: &FlowField, delta: f64) -> Result<f64> {
    check_sizes(pred, gt)?;
    let (w, h) = gt.size();
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in 0..w * h {
        let Some(g) = gt.get_index(i) else { continue };
        total += 1;
        if pred.get_index(i).is_some_and(|p| p.distance(&g) < delta) {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub ssim: f64,
    pub psnr: f64,
    pub valid_pixels: usize,
}

/// Warps `marker` by `flow` onto the reference canvas and scores it inside
/// the covered region, against `twin` when given and `reference` otherwise.
pub fn alignment_eval(marker: &Image, flow: &FlowField, reference: &Image, twin: Option<&Image>) -> Result<Alignment> {
    if let Some(t) = twin {
        if t.size() != reference.size() {
            return Err(Error::mismatch(format!("twin {:?}", reference.size()), format!("{:?}", t.size())));
        }
    }
    let target = twin.unwrap_or(reference).to_rgb();
    let (warped, region) = warp_by_flow(&marker.to_rgb(), flow, target.size())?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(Alignment {
        ssim: ssim_value(&warped, &target, &region)?,
        psnr: psnr_value(&warped, &target, &region)?,
        valid_pixels: region.count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Scored,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub subset: Subset,
    pub level: u32,
    pub outcome: Outcome,
    /// Machine-readable failure code, set on failed records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epe_mean: Option<f64>,
    /// PCK at [`PCK_THRESHOLDS`]; present whenever ground truth exists,
    /// zero for failed records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pck: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    pub valid_pixels: usize,
}

impl EvalRecord {
    fn failed(sample: &BenchmarkSample, code: &str) -> Self {
        Self {
            id: sample.id.clone(),
            subset: sample.subset,
            level: sample.level,
            outcome: Outcome::Failed,
            failure: Some(code.to_string()),
            epe_mean: None,
            pck: sample.gt_flow.as_ref().map(|_| [0.0; 3]),
            ssim: None,
            psnr: None,
            valid_pixels: 0,
        }
    }

    pub fn is_scored(&self) -> bool {
        self.outcome == Outcome::Scored
    }
}

/// Runs `estimator` on one sample and scores the result.
pub fn evaluate_sample(sample: &BenchmarkSample, estimator: &dyn Estimator) -> EvalRecord {
    let flow = match estimator.estimate(sample) {
        MatchOutcome::Flow(f) => f,
        MatchOutcome::Failed(reason) => {
            log::debug!("{}: {} failed: {reason}", sample.id, estimator.name());
            return EvalRecord::failed(sample, reason.code());
        }
    };
    if flow.size() != sample.marker.size() {
        log::warn!("{}: flow size {:?} does not match the marker", sample.id, flow.size());
        return EvalRecord::failed(sample, "dimension_mismatch");
    }
    let (epe_mean, pck_row) = match &sample.gt_flow {
        Some(gt) => {
            let row = PCK_THRESHOLDS.map(|d| pck(&flow, gt, d).unwrap_or(0.0));
            (epe(&flow, gt).ok().map(|e| e.mean), Some(row))
        }
        None => (None, None),
    };
    match alignment_eval(&sample.marker, &flow, &sample.reference, sample.twin.as_ref()) {
        Ok(a) => EvalRecord {
            id: sample.id.clone(),
            subset: sample.subset,
            level: sample.level,
            outcome: Outcome::Scored,
            failure: None,
            epe_mean,
            pck: pck_row,
            ssim: Some(a.ssim),
            psnr: Some(a.psnr),
            valid_pixels: a.valid_pixels,
        },
        Err(e) => {
            log::debug!("{}: alignment failed: {e}", sample.id);
            let mut r = EvalRecord::failed(sample, "empty_region");
            r.pck = pck_row;
            r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkConfig {
    pub workers: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub estimator: String,
    pub subsets: Vec<SubsetSummary>,
    /// Sorted by id.
    pub records: Vec<EvalRecord>,
}

impl BenchmarkReport {
    pub fn from_records(estimator: &str, mut records: Vec<EvalRecord>) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let subsets = Subset::ALL
            .iter()
            .filter_map(|s| SubsetSummary::build(*s, &records))
            .collect();
        Self {
            estimator: estimator.to_string(),
            subsets,
            records,
        }
    }

    pub fn subset(&self, s: Subset) -> Option<&SubsetSummary> {
        self.subsets.iter().find(|x| x.subset == s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Evaluates in-memory samples.
pub fn run_benchmark(samples: &[BenchmarkSample], estimator: &dyn Estimator, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let records = pool(config.workers)?.install(|| samples.par_iter().map(|s| evaluate_sample(s, estimator)).collect());
    Ok(BenchmarkReport::from_records(estimator.name(), records))
}

/// Evaluates manifest entries, loading images lazily relative to `base`.
pub fn run_manifest(
    entries: &[ManifestEntry],
    base: &Path,
    estimator: &dyn Estimator,
    config: &BenchmarkConfig,
) -> Result<BenchmarkReport> {
    let records: Result<Vec<EvalRecord>> = pool(config.workers)?.install(|| {
        entries
            .par_iter()
            .map(|e| BenchmarkSample::load(e, base).map(|s| evaluate_sample(&s, estimator)))
            .collect()
    });
    Ok(BenchmarkReport::from_records(estimator.name(), records?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn epe_of_three_four_offset_is_five() {
        let gt = FlowField::identity(6, 4);
        let r = epe(&gt.offset(Point2::new(3.0, 4.0)), &gt).unwrap();
        assert!((r.mean - 5.0).abs() < 1e-12);
        assert!(r.map.iter().all(|e| (e - 5.0).abs() < 1e-12));
    }

    #[test]
    fn pck_is_strict() {
        let gt = FlowField::identity(6, 4);
        let pred = gt.offset(Point2::new(3.0, 4.0));
        assert_eq!(pck(&pred, &gt, 3.0).unwrap(), 0.0);
        assert_eq!(pck(&pred, &gt, 5.0).unwrap(), 0.0);
        assert_eq!(pck(&pred, &gt, 5.01).unwrap(), 1.0);
    }

    #[test]
    fn invalid_predictions_count_against_pck() {
        let gt = FlowField::identity(4, 4);
        let mut pred = gt.clone();
        pred.set(0, 0, None);
        pred.set(1, 0, None);
        assert_eq!(pck(&pred, &gt, 1.0).unwrap(), 14.0 / 16.0);
        assert_eq!(epe(&pred, &gt).unwrap().count, 14);
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let gt = FlowField::identity(4, 4);
        assert!(matches!(epe(&FlowField::invalid(4, 4), &gt), Err(Error::NoValidPixels)));
        assert_eq!(pck(&FlowField::invalid(4, 4), &gt, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn manifest_rejects_bad_levels_and_missing_twins() {
        let base = ManifestEntry {
            id: "a".into(),
            subset: Subset::Viewpoint,
            level: 5,
            marker: "m.png".into(),
            reference: "r.png".into(),
            twin: None,
            gt_flow: None,
        };
        assert!(base.validate().is_err());
        let lighting = ManifestEntry {
            subset: Subset::Lighting,
            level: 3,
            ..base.clone()
        };
        assert!(lighting.validate().is_err());
        let ok = ManifestEntry { level: 4, ..base };
        assert!(ok.validate().is_ok());
        let json = serde_json::to_string(&ok).unwrap();
        assert!(!json.contains("twin"));
        assert!(serde_json::from_str::<ManifestEntry>(&json.replace("}", ",\"extra\":1}")).is_err());
    }
}
