mod common;

use markerforge::benchmark::{
    alignment_eval, epe, generate_dvl, load_manifest, pck, run_benchmark, run_manifest, BenchmarkConfig,
    BenchmarkSample, DvlConfig, Estimator, FailingEstimator, OracleEstimator, Outcome, Subset,
};
use markerforge::geometry::Point2;
use markerforge::imaging::{procedural_texture, PSNR_CAP_DB};
use markerforge::matcher::{FailureReason, MatchOutcome};
use markerforge::{FlowField, Image};
use proptest::prelude::*;
use rand::Rng;

fn shifted_sample(id: &str, subset: Subset, level: u32, seed: u64) -> BenchmarkSample {
    let reference = procedural_texture(96, 72, seed);
    let marker = Image::from_fn(48, 36, 3, |x, y, c| reference.get(x + 20, y + 10, c)).unwrap();
    let gt = FlowField::from_fn(48, 36, |x, y| Some(Point2::new((x + 20) as f64, (y + 10) as f64)));
    let twin = (subset == Subset::Lighting).then(|| reference.clone());
    let reference = if subset == Subset::Lighting { reference.map(|v| v * 0.2) } else { reference };
    BenchmarkSample::new(id, subset, level, marker, reference, twin, Some(gt)).unwrap()
}

/// Fails every sample whose id ends in an odd digit, otherwise returns the ground truth.
struct OddFails;

impl Estimator for OddFails {
    fn name(&self) -> &str {
        "odd-fails"
    }

    fn estimate(&self, sample: &BenchmarkSample) -> MatchOutcome {
        let odd = sample.id.bytes().last().is_some_and(|b| (b - b'0') % 2 == 1);
        if odd {
            MatchOutcome::Failed(FailureReason::InsufficientMatches { found: 2 })
        } else {
            OracleEstimator.estimate(sample)
        }
    }
}

fn mixed_samples() -> Vec<BenchmarkSample> {
    let mut out = Vec::new();
    for i in 0..10u32 {
        out.push(shifted_sample(&format!("d{i}"), Subset::Deformation, i % 5 + 1, i as u64));
        out.push(shifted_sample(&format!("v{i}"), Subset::Viewpoint, i % 4 + 1, 50 + i as u64));
        out.push(shifted_sample(&format!("l{i}"), Subset::Lighting, i + 1, 100 + i as u64));
        out.push(shifted_sample(&format!("s{i}"), Subset::Synthetic, 1, 150 + i as u64));
    }
    out
}

fn random_flow(w: usize, h: usize, seed: u64, invalid: f64) -> FlowField {
    let mut r = common::rng(seed);
    FlowField::from_fn(w, h, |x, y| {
        (!r.random_bool(invalid)).then(|| Point2::new(x as f64 + r.random_range(-6.0..6.0), y as f64 + r.random_range(-6.0..6.0)))
    })
}

proptest! {
    #[test]
    fn pck_is_monotone_in_delta(seed in any::<u64>(), d1 in 0.0..10.0f64, d2 in 0.0..10.0f64) {
        let gt = random_flow(20, 15, seed, 0.1);
        let pred = random_flow(20, 15, seed.wrapping_add(1), 0.2);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(pck(&pred, &gt, lo).unwrap() <= pck(&pred, &gt, hi).unwrap());
    }

    #[test]
    fn pck_of_ground_truth_is_one(seed in any::<u64>(), delta in 1e-9..10.0f64) {
        let gt = random_flow(20, 15, seed, 0.3);
        prop_assert_eq!(pck(&gt, &gt, delta).unwrap(), 1.0);
    }

    #[test]
    fn uniform_offset_epe_is_its_length(seed in any::<u64>(), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let gt = random_flow(12, 9, seed, 0.2);
        let e = epe(&gt.offset(Point2::new(dx, dy)), &gt).unwrap();
        prop_assert!((e.mean - dx.hypot(dy)).abs() < 1e-9);
    }
}

#[test]
fn all_failure_estimator_reports_no_alignment_aggregates() {
    let report = run_benchmark(&mixed_samples(), &FailingEstimator, &BenchmarkConfig::default()).unwrap();
    for s in &report.subsets {
        assert_eq!(s.failed, s.total);
        assert_eq!(s.failed_pct, 100.0);
        assert!(s.ssim.is_none() && s.psnr.is_none());
        assert!(s.levels.iter().all(|l| l.scored == 0 && l.ssim_mean.is_none()));
    }
    assert!(report.records.iter().all(|r| r.outcome == Outcome::Failed));
}

#[test]
fn oracle_scores_perfect_pck_and_alignment() {
    let report = run_benchmark(&mixed_samples(), &OracleEstimator, &BenchmarkConfig::default()).unwrap();
    for s in &report.subsets {
        assert_eq!(s.failed, 0);
        let p = s.pck.as_ref().unwrap();
        assert_eq!((p.pck1, p.pck3, p.pck5), (1.0, 1.0, 1.0));
        assert!(s.ssim.unwrap().mean > 0.999999);
        assert_eq!(s.psnr.unwrap().median, PSNR_CAP_DB);
    }
}

#[test]
fn aggregates_exclude_failed_records() {
    let samples = mixed_samples();
    let report = run_benchmark(&samples, &OddFails, &BenchmarkConfig::default()).unwrap();
    for s in &report.subsets {
        assert_eq!(s.total, s.scored + s.failed);
        assert_eq!(s.failed, 5);
        let scored: Vec<f64> = report
            .records
            .iter()
            .filter(|r| r.subset == s.subset && r.is_scored())
            .map(|r| r.psnr.unwrap())
            .collect();
        let mean = scored.iter().sum::<f64>() / scored.len() as f64;
        assert!((s.psnr.unwrap().mean - mean).abs() < 1e-12);
        assert_eq!(s.pck.as_ref().unwrap().pck1, 0.5);
    }
}

#[test]
fn report_is_independent_of_worker_count() {
    let samples = mixed_samples();
    let one = run_benchmark(&samples, &OddFails, &BenchmarkConfig { workers: 1 }).unwrap();
    let many = run_benchmark(&samples, &OddFails, &BenchmarkConfig { workers: 6 }).unwrap();
    assert_eq!(one.to_json(), many.to_json());
    assert_eq!(one.to_table(), many.to_table());
    let ids: Vec<&str> = one.records.iter().map(|r| r.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn identity_flow_on_identical_images_is_perfect() {
    let img = procedural_texture(64, 48, 2);
    let a = alignment_eval(&img, &FlowField::identity(64, 48), &img, None).unwrap();
    assert!((a.ssim - 1.0).abs() < 1e-12);
    assert_eq!(a.psnr, PSNR_CAP_DB);
    assert_eq!(a.valid_pixels, 64 * 48);
}

#[test]
fn displaced_flow_scores_lower() {
    let s = shifted_sample("x", Subset::Synthetic, 1, 9);
    let gt = s.gt_flow.clone().unwrap();
    let good = alignment_eval(&s.marker, &gt, &s.reference, None).unwrap();
    let bad = alignment_eval(&s.marker, &gt.offset(Point2::new(20.0, 0.0)), &s.reference, None).unwrap();
    assert!(bad.ssim < good.ssim);
    assert!(bad.psnr < good.psnr);
}

#[test]
fn lighting_is_scored_against_the_twin() {
    let s = shifted_sample("l", Subset::Lighting, 3, 4);
    let gt = s.gt_flow.clone().unwrap();
    let twin = s.twin.clone().unwrap();
    let against_twin = alignment_eval(&s.marker, &gt, &s.reference, Some(&twin)).unwrap();
    let against_dark = alignment_eval(&s.marker, &gt, &s.reference, None).unwrap();
    assert!(against_twin.ssim > 0.999999);
    assert!(against_dark.ssim < against_twin.ssim);
    let report = run_benchmark(&[s], &OracleEstimator, &BenchmarkConfig::default()).unwrap();
    assert_eq!(report.records[0].ssim, Some(against_twin.ssim));
}

#[test]
fn lighting_without_twin_is_rejected() {
    let s = shifted_sample("l", Subset::Lighting, 3, 4);
    assert!(BenchmarkSample::new("l", Subset::Lighting, 3, s.marker, s.reference, None, None).is_err());
}

#[test]
fn out_of_range_levels_are_rejected() {
    let s = shifted_sample("d", Subset::Synthetic, 1, 4);
    for (subset, level) in [(Subset::Deformation, 6), (Subset::Viewpoint, 5), (Subset::Viewpoint, 0)] {
        assert!(BenchmarkSample::new("d", subset, level, s.marker.clone(), s.reference.clone(), None, None).is_err());
    }
}

#[test]
fn manifest_schema_violations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let bad = [
        r#"[{"id":"a","subset":"viewpoint","level":1,"marker":"m.png","reference":"r.png","extra":1}]"#,
        r#"[{"id":"a","subset":"weather","level":1,"marker":"m.png","reference":"r.png"}]"#,
        r#"[{"id":"a","subset":"viewpoint","level":1,"marker":"m.png","reference":"r.png"},
            {"id":"a","subset":"viewpoint","level":2,"marker":"m.png","reference":"r.png"}]"#,
        r#"[{"id":"a","subset":"lighting","level":1,"marker":"m.png","reference":"r.png"}]"#,
    ];
    for text in bad {
        std::fs::write(&path, text).unwrap();
        assert!(load_manifest(&path).is_err(), "{text}");
    }
}

#[test]
fn small_dvl_stand_in_round_trips_through_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DvlConfig {
        markers: 2,
        images_per_marker: 10,
        marker_size: (48, 36),
        canvas_size: (96, 72),
        seed: 5,
        write_ground_truth: true,
    };
    let entries = generate_dvl(&cfg, dir.path()).unwrap();
    assert_eq!(entries.len(), 60);
    let loaded = load_manifest(dir.path().join("benchmark.json")).unwrap();
    assert_eq!(loaded, entries);
    for s in Subset::ALL.iter().filter(|s| **s != Subset::Synthetic) {
        let levels: std::collections::BTreeSet<u32> =
            entries.iter().filter(|e| e.subset == *s).map(|e| e.level).collect();
        let range = s.level_range().unwrap();
        assert_eq!(levels.into_iter().collect::<Vec<_>>(), range.collect::<Vec<_>>(), "{s}");
    }
    let report = run_manifest(&entries, dir.path(), &OracleEstimator, &BenchmarkConfig { workers: 2 }).unwrap();
    assert_eq!(report.records.len(), 60);
    for s in &report.subsets {
        assert_eq!(s.failed, 0, "{}", s.subset);
        assert!(s.ssim.unwrap().mean > 0.9, "{}: {:?}", s.subset, s.ssim);
    }
}
