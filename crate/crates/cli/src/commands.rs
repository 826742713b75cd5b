use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use markerforge::benchmark::{
    generate_dvl, level_curves_svg, load_manifest, run_manifest, BenchmarkConfig, BenchmarkReport, CurveMetric,
    DenseEstimator, DvlConfig, Estimator, FlowDirEstimator, HomographyEstimator, OracleEstimator,
};
use markerforge::flyingmarkers::{generate_dataset, list_images, SamplerConfig};
use markerforge::geometry::{GeometricTransform, TwoViewRig};
use markerforge::imaging::write_pfm;
use markerforge::losses::{self, gradcheck_sed, gradcheck_syn, random_probe_flow, LossOptions};
use markerforge::matcher::{
    dense_match, detect_corners, match_descriptors, ransac_homography, DenseConfig, FailureReason, MatchOutcome,
    RansacConfig,
};
use markerforge::{FlowField, Image};

use crate::args::*;
use crate::error::{CliError, CliResult, Context};

const GRADCHECK_ABS_TOL: f64 = 1e-3;
const GRADCHECK_REL_TOL: f64 = 1e-4;

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).usage(&format!("config {}", path.display()))?;
    serde_json::from_str(&text).usage(&format!("config {}", path.display()))
}

/// Fills every option not given on the command line from the config file.
macro_rules! merge {
    ($args:ident, $m:ident, $file:ident; $($field:ident),*) => {
        $( if !explicit($m, stringify!($field)) { if let Some(v) = $file.$field.take() { $args.$field = v; } } )*
    };
    (opt $args:ident, $m:ident, $file:ident; $($field:ident),*) => {
        $( if !explicit($m, stringify!($field)) { if let Some(v) = $file.$field.take() { $args.$field = Some(v); } } )*
    };
}

fn parse_size(s: &str, what: &str) -> CliResult<[u32; 2]> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Usage(format!("{what} must look like WIDTHxHEIGHT, got {s}")))?;
    Ok([w.trim().parse().usage(what)?, h.trim().parse().usage(what)?])
}

fn parse_weights(s: &str) -> CliResult<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .usage("kind-weights")?;
    v.try_into()
        .map_err(|_| CliError::Usage("kind-weights needs three comma-separated numbers".into()))
}

fn require_dir(p: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let p = p.clone().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))?;
    if !p.is_dir() {
        return Err(CliError::Usage(format!("--{flag} {} is not a directory", p.display())));
    }
    Ok(p)
}

fn require_file(p: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let p = p.clone().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))?;
    if !p.is_file() {
        return Err(CliError::Usage(format!("--{flag} {} does not exist", p.display())));
    }
    Ok(p)
}

pub fn generate(a: GenerateArgs, m: &ArgMatches) -> CliResult {
    let start = Instant::now();
    if a.layout == Layout::Dvl {
        let canvas = parse_size(&a.canvas_size, "canvas-size")?;
        let marker = parse_size(&a.marker_size, "marker-size")?;
        let cfg = DvlConfig {
            markers: a.dvl_markers,
            images_per_marker: a.dvl_images,
            // the stand-in defaults to half-size images unless sizes are given
            marker_size: if explicit(m, "marker_size") {
                (marker[0] as usize, marker[1] as usize)
            } else {
                DvlConfig::default().marker_size
            },
            canvas_size: if explicit(m, "canvas_size") {
                (canvas[0] as usize, canvas[1] as usize)
            } else {
                DvlConfig::default().canvas_size
            },
            seed: a.seed,
            write_ground_truth: true,
        };
        let entries = pool(a.workers)?.install(|| generate_dvl(&cfg, &a.out))?;
        println!(
            "generated {} benchmark records in {} ({:.2}s)",
            entries.len(),
            a.out.display(),
            start.elapsed().as_secs_f64()
        );
        return Ok(());
    }
    let mut cfg = match &a.config {
        Some(p) => read_config::<SamplerConfig>(p)?,
        None => SamplerConfig::default(),
    };
    let use_flag = |id: &str| a.config.is_none() || explicit(m, id);
    if use_flag("count") {
        cfg.count = a.count;
    }
    if use_flag("seed") {
        cfg.seed = a.seed;
    }
    if use_flag("canvas_size") {
        cfg.canvas_size = parse_size(&a.canvas_size, "canvas-size")?;
    }
    if use_flag("marker_size") {
        cfg.marker_size = parse_size(&a.marker_size, "marker-size")?;
    }
    if use_flag("kind_weights") {
        cfg.kind_weights = parse_weights(&a.kind_weights)?;
    }
    cfg.validate().usage("sampler configuration")?;
    let markers = list_images(require_dir(&a.markers, "markers")?)?;
    let backgrounds = list_images(require_dir(&a.backgrounds, "backgrounds")?)?;
    if cfg.count > 0 && (markers.is_empty() || backgrounds.is_empty()) {
        return Err(CliError::Usage("marker and background directories must contain images".into()));
    }
    let manifest = if cfg.count == 0 {
        write_empty_dataset(&cfg, &a.out)?;
        None
    } else {
        Some(generate_dataset(&cfg, &markers, &backgrounds, &a.out, a.workers)?)
    };
    let mut counts = [0usize; 3];
    for r in manifest.iter().flat_map(|m| &m.records) {
        counts[r.kind as usize] += 1;
    }
    println!(
        "generated {} samples (affine {}, homography {}, tps {}) in {} ({:.2}s)",
        cfg.count,
        counts[0],
        counts[1],
        counts[2],
        a.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn write_empty_dataset(cfg: &SamplerConfig, out: &Path) -> CliResult {
    fs::create_dir_all(out)?;
    let manifest = json!({
        "name": cfg.name,
        "format_version": markerforge::flyingmarkers::FORMAT_VERSION,
        "sample_count": 0,
        "config": cfg,
        "records": [],
    });
    fs::write(out.join("manifest.json"), serde_json::to_string(&manifest).data("manifest")? + "\n")?;
    fs::write(out.join("benchmark.json"), "[\n]\n")?;
    Ok(())
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchFile {
    method: Option<MatchMethod>,
    marker: Option<PathBuf>,
    reference: Option<PathBuf>,
    sample: Option<PathBuf>,
    seed: Option<u64>,
    iterations: Option<usize>,
    threshold: Option<f64>,
    max_corners: Option<usize>,
    levels: Option<usize>,
    search_radius: Option<usize>,
}

fn failure_path(out: &Path) -> PathBuf {
    out.with_extension("failed.json")
}

pub fn run_match(mut a: MatchArgs, m: &ArgMatches) -> CliResult {
    if let Some(p) = &a.config {
        let mut f: MatchFile = read_config(p)?;
        merge!(a, m, f; method, seed, iterations, threshold, max_corners, levels, search_radius);
        merge!(opt a, m, f; marker, reference, sample);
    }
    let outcome = match a.method {
        MatchMethod::Gt => {
            let dir = require_dir(&a.sample, "sample")?;
            MatchOutcome::Flow(FlowField::read_flo(dir.join("flow.flo")).data("ground-truth flow")?)
        }
        method => {
            let marker = Image::load(require_file(&a.marker, "marker")?)?;
            let reference = Image::load(require_file(&a.reference, "ref")?)?;
            if method == MatchMethod::Homography {
                let ka = detect_corners(&marker, a.max_corners);
                let kb = detect_corners(&reference, a.max_corners);
                let matches = match_descriptors(&marker, &ka, &reference, &kb);
                log::info!("{} / {} corners, {} matches", ka.len(), kb.len(), matches.len());
                let cfg = RansacConfig {
                    iterations: a.iterations,
                    inlier_threshold: a.threshold,
                    seed: a.seed,
                };
                ransac_homography(&matches, &cfg, marker.size())
            } else {
                let cfg = DenseConfig {
                    levels: a.levels,
                    search_radius: a.search_radius,
                    ..DenseConfig::default()
                };
                MatchOutcome::Flow(dense_match(&marker, &reference, &cfg))
            }
        }
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    match outcome {
        MatchOutcome::Flow(flow) => {
            flow.write_flo(&a.out)?;
            let failed = failure_path(&a.out);
            if failed.exists() {
                fs::remove_file(failed)?;
            }
            println!(
                "{}",
                json!({"status": "ok", "out": a.out, "valid_pixels": flow.valid_count(), "pixels": flow.width() * flow.height()})
            );
        }
        MatchOutcome::Failed(reason) => {
            let record = failure_record(&reason);
            fs::write(failure_path(&a.out), record.to_string() + "\n")?;
            println!("{record}");
        }
    }
    Ok(())
}

fn failure_record(reason: &FailureReason) -> serde_json::Value {
    json!({"status": "failed", "code": reason.code(), "detail": reason.to_string()})
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossesFile {
    transform: Option<PathBuf>,
    pose: Option<PathBuf>,
    sed_weight: Option<f64>,
    sed_clip: Option<f64>,
    map_out: Option<PathBuf>,
    gradcheck: Option<bool>,
    seed: Option<u64>,
    samples: Option<usize>,
    step: Option<f64>,
    amplitude: Option<f64>,
}

pub fn losses(mut a: LossesArgs, m: &ArgMatches) -> CliResult {
    if let Some(p) = &a.config {
        let mut f: LossesFile = read_config(p)?;
        merge!(a, m, f; sed_weight, gradcheck, seed, samples, step, amplitude);
        merge!(opt a, m, f; transform, pose, sed_clip, map_out);
    }
    if a.transform.is_none() && a.pose.is_none() {
        return Err(CliError::Usage("give --transform, --pose or both".into()));
    }
    if !(a.step > 0.0) || !(a.amplitude >= 0.0) {
        return Err(CliError::Usage("--step must be positive and --amplitude nonnegative".into()));
    }
    let flow = FlowField::read_flo(&a.flow).data("flow file")?;
    let transform = match &a.transform {
        Some(p) => Some(GeometricTransform::from_json(&fs::read_to_string(p)?).data("transform file")?),
        None => None,
    };
    let fundamental = match &a.pose {
        Some(p) => Some(
            TwoViewRig::from_json(&fs::read_to_string(p)?)
                .and_then(|r| r.fundamental())
                .data("pose file")?,
        ),
        None => None,
    };
    let opts = LossOptions {
        keep_map: a.map_out.is_some(),
        sed_clip: a.sed_clip,
        sed_weight: a.sed_weight,
    };
    let syn = transform.as_ref().map(|t| losses::l_syn_with(&flow, t, &opts)).transpose()?;
    let sed = fundamental.as_ref().map(|f| losses::l_sed_with(&flow, f, &opts)).transpose()?;
    let mut out = serde_json::Map::new();
    if let (Some(s), Some(e)) = (&syn, &sed) {
        let all = losses::combine(s, e, a.sed_weight);
        out.insert("all".into(), json!({"total": all.total, "mean": all.mean, "pixel_count": all.pixel_count}));
    }
    if let Some(prefix) = &a.map_out {
        for (name, r) in [("syn", &syn), ("sed", &sed)] {
            if let Some(map) = r.as_ref().and_then(|r| r.per_pixel.as_ref()) {
                let path = PathBuf::from(format!("{}_{name}.pfm", prefix.display()));
                write_pfm(&path, flow.width(), flow.height(), map)?;
            }
        }
    }
    for (name, r) in [("syn", syn), ("sed", sed)] {
        if let Some(mut r) = r {
            r.per_pixel = None;
            out.insert(name.into(), serde_json::to_value(r).data("report")?);
        }
    }
    let mut failures = 0;
    if a.gradcheck {
        let probe = random_probe_flow(&flow, a.samples, a.amplitude, a.seed);
        let mut gc = serde_json::Map::new();
        if let Some(t) = &transform {
            let r = gradcheck_syn(&probe, t, a.step, GRADCHECK_ABS_TOL, GRADCHECK_REL_TOL)?;
            failures += r.failures;
            gc.insert("syn".into(), serde_json::to_value(r).data("report")?);
        }
        if let Some(f) = &fundamental {
            let r = gradcheck_sed(&probe, f, a.step, GRADCHECK_ABS_TOL, GRADCHECK_REL_TOL)?;
            failures += r.failures;
            gc.insert("sed".into(), serde_json::to_value(r).data("report")?);
        }
        out.insert("gradcheck".into(), gc.into());
    }
    println!("{}", serde_json::to_string_pretty(&out).data("report")?);
    if failures > 0 {
        return Err(CliError::Internal(format!("{failures} gradient checks exceeded tolerance")));
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    method: Option<BenchMethod>,
    flows: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    report: Option<ReportFormat>,
    svg: Option<bool>,
}

pub fn bench(mut a: BenchArgs, m: &ArgMatches) -> CliResult {
    if let Some(p) = &a.config {
        let mut f: BenchFile = read_config(p)?;
        merge!(a, m, f; method, workers, seed, report, svg);
        merge!(opt a, m, f; flows, out);
    }
    let pool = pool(a.workers)?;
    let manifest = require_file(&Some(a.manifest.clone()), "manifest")?;
    let entries = load_manifest(&manifest).data("manifest")?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let estimator: Box<dyn Estimator> = match a.method {
        BenchMethod::Oracle => Box::new(OracleEstimator),
        BenchMethod::Homography => Box::new(HomographyEstimator {
            ransac: RansacConfig {
                seed: a.seed,
                ..RansacConfig::default()
            },
            ..HomographyEstimator::default()
        }),
        BenchMethod::Dense => Box::new(DenseEstimator::default()),
        BenchMethod::Flowdir => Box::new(FlowDirEstimator::new(require_dir(&a.flows, "flows")?)),
    };
    let start = Instant::now();
    let report = pool.install(|| run_manifest(&entries, base, estimator.as_ref(), &BenchmarkConfig { workers: a.workers }))?;
    log::info!("benchmarked {} records in {:.2}s", entries.len(), start.elapsed().as_secs_f64());
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("report.json"), report.to_json() + "\n")?;
        fs::write(out.join("report.txt"), report.to_table())?;
        if a.svg {
            fs::write(out.join("curves_ssim.svg"), level_curves_svg(&[&report], CurveMetric::Ssim))?;
            fs::write(out.join("curves_psnr.svg"), level_curves_svg(&[&report], CurveMetric::Psnr))?;
        }
    } else if a.svg {
        return Err(CliError::Usage("--svg needs --out".into()));
    }
    match a.report {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Json => println!("{}", report.to_json()),
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> CliResult {
    let reports: Vec<BenchmarkReport> = a
        .inputs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).data(&p.display().to_string())?;
            serde_json::from_str(&text).data(&p.display().to_string())
        })
        .collect::<CliResult<_>>()?;
    for r in &reports {
        match a.format {
            ReportFormat::Table => print!("{}", r.to_table()),
            ReportFormat::Json => println!("{}", r.to_json()),
        }
    }
    if let Some(svg) = &a.svg {
        let metric = match a.metric {
            Metric::Ssim => CurveMetric::Ssim,
            Metric::Psnr => CurveMetric::Psnr,
        };
        fs::write(svg, level_curves_svg(&reports.iter().collect::<Vec<_>>(), metric))?;
    }
    Ok(())
}
