use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Synthetic marker correspondence data, losses and alignment benchmarks.
///
/// Logging verbosity follows the MARKERFORGE_LOG environment variable
/// (error, warn, info, debug, trace; default warn).
#[derive(Debug, Parser)]
#[command(name = "markerforge", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic marker/reference dataset with ground-truth flow.
    Generate(GenerateArgs),
    /// Estimate a flow field from a marker into a reference image.
    Match(MatchArgs),
    /// Evaluate the supervised and epipolar losses of a flow file.
    Losses(LossesArgs),
    /// Run an estimator over a benchmark manifest and write reports.
    Bench(BenchArgs),
    /// Render saved benchmark reports as tables, JSON or SVG curves.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Randomly warped markers pasted on backgrounds.
    Flyingmarkers,
    /// Graded deformation / viewpoint / lighting stand-in benchmark.
    Dvl,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory of marker images (flyingmarkers layout).
    #[arg(long)]
    pub markers: Option<PathBuf>,
    /// Directory of background images (flyingmarkers layout).
    #[arg(long)]
    pub backgrounds: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of samples (flyingmarkers layout).
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; the output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Dataset layout.
    #[arg(long, value_enum, default_value_t = Layout::Flyingmarkers)]
    pub layout: Layout,
    /// Reference canvas size, WIDTHxHEIGHT.
    #[arg(long, default_value = "640x480")]
    pub canvas_size: String,
    /// Marker size after resizing, WIDTHxHEIGHT.
    #[arg(long, default_value = "320x240")]
    pub marker_size: String,
    /// Relative weights of affine, homography and spline samples.
    #[arg(long, default_value = "1,1,1")]
    pub kind_weights: String,
    /// Markers in the dvl layout.
    #[arg(long, default_value_t = 10)]
    pub dvl_markers: usize,
    /// Images per marker and subset in the dvl layout.
    #[arg(long, default_value_t = 10)]
    pub dvl_images: usize,
    /// JSON sampler configuration; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    /// Harris corners, patch descriptors, RANSAC homography.
    Homography,
    /// Coarse-to-fine correlation matcher.
    Dense,
    /// Copy the ground-truth flow of a generated sample.
    Gt,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, value_enum, default_value_t = MatchMethod::Dense)]
    pub method: MatchMethod,
    /// Marker image.
    #[arg(long)]
    pub marker: Option<PathBuf>,
    /// Reference image.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Sample directory holding flow.flo (gt method).
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// Output flow file; failures are written next to it as .failed.json.
    #[arg(long)]
    pub out: PathBuf,
    /// RANSAC seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RANSAC iterations.
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// RANSAC inlier threshold in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub threshold: f64,
    /// Harris corners kept per image.
    #[arg(long, default_value_t = 1000)]
    pub max_corners: usize,
    /// Pyramid levels of the dense matcher.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Local search radius of the dense matcher, pixels.
    #[arg(long, default_value_t = 3)]
    pub search_radius: usize,
    /// JSON file with any of the options above; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// Predicted flow file.
    #[arg(long)]
    pub flow: PathBuf,
    /// Ground-truth transform JSON (enables the supervised loss).
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Two-view pose and intrinsics JSON (enables the epipolar loss).
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Weight of the epipolar term in the combined loss.
    #[arg(long, default_value_t = 1.0)]
    pub sed_weight: f64,
    /// Truncate each epipolar term at this many pixels.
    #[arg(long)]
    pub sed_clip: Option<f64>,
    /// Write per-pixel loss maps as PFM files with this path prefix.
    #[arg(long)]
    pub map_out: Option<PathBuf>,
    /// Verify analytic gradients with central differences.
    #[arg(long)]
    pub gradcheck: bool,
    /// Seed for the gradient-check pixel draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pixels checked per loss.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Finite-difference step in pixels.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Random displacement applied to checked pixels, pixels.
    #[arg(long, default_value_t = 2.0)]
    pub amplitude: f64,
    /// JSON file with any of the options above; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    /// Ground-truth flow where available.
    Oracle,
    Homography,
    Dense,
    /// Precomputed <id>.flo files from --flows.
    Flowdir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = BenchMethod::Dense)]
    pub method: BenchMethod,
    /// Directory of <id>.flo predictions (flowdir method).
    #[arg(long)]
    pub flows: Option<PathBuf>,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// RANSAC seed (homography method).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.json, report.txt and curve SVGs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report: ReportFormat,
    /// Also write per-level SSIM and PSNR curves as SVG.
    #[arg(long)]
    pub svg: bool,
    /// JSON file with any of the options above; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Ssim,
    Psnr,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Saved report.json files, one curve series each.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    /// Write per-level curves to this SVG file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Metric plotted in the SVG.
    #[arg(long, value_enum, default_value_t = Metric::Ssim)]
    pub metric: Metric,
}
