use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stereo_noise::IlluminationMode;

use crate::config::parse_window;

/// Range-error modeling toolkit for passive and active stereo depth sensors.
#[derive(Debug, Parser)]
#[command(name = "stereo-noise", version, about)]
pub struct Cli {
    /// TOML file with run settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true, env = "STEREO_NOISE_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated dataset (generative model or full stereo pipeline).
    Simulate(SimulateArgs),
    /// Fit sigma_Z = k Z^lambda and print a CSV row per range window.
    Fit(FitArgs),
    /// Per-bin kurtosis and counts as CSV plus SVG plots.
    Stats(StatsArgs),
    /// JSON report with fit, bin table and model curve.
    Report(ReportArgs),
    /// Published Kinect v1 curves next to a fitted power law.
    Baselines(BaselinesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Gaussian samples drawn directly from a power-law model.
    Generative,
    /// Rendered speckle scanlines, subpixel matching and triangulation.
    Pipeline,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One sampling group per capture distance.
    #[default]
    Nominal,
    /// Groups are range windows over pixel means.
    PixelMean,
}

fn parse_illumination(s: &str) -> Result<IlluminationMode, String> {
    match s {
        "passive" => Ok(IlluminationMode::Passive),
        "active" => Ok(IlluminationMode::Active),
        _ => Err(format!("expected passive or active, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<SimMode>,
    /// passive or active.
    #[arg(long, value_parser = parse_illumination)]
    pub illumination: Option<IlluminationMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Capture distances in meters (default 0.5 to 3.0 in 0.25 steps).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub distances: Option<Vec<f64>>,
    /// Frames per distance.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Pixels per frame; correlation windows in pipeline mode.
    #[arg(long)]
    pub pixels: Option<u32>,
    /// Model scale k (generative mode).
    #[arg(long)]
    pub k: Option<f64>,
    /// Model exponent lambda (generative mode).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Focal length in pixels (pipeline mode).
    #[arg(long)]
    pub focal_length: Option<f64>,
    /// Baseline in meters (pipeline mode).
    #[arg(long)]
    pub baseline: Option<f64>,
    /// Mean pixel intensity at the control range (pipeline mode).
    #[arg(long)]
    pub intensity: Option<f64>,
    #[arg(long)]
    pub control_range: Option<f64>,
    /// Correlation window half width in pixels.
    #[arg(long)]
    pub half_width: Option<usize>,
    /// Speckle correlation length in pixels.
    #[arg(long)]
    pub correlation_length: Option<f64>,
    /// Speckle relative standard deviation.
    #[arg(long)]
    pub contrast: Option<f64>,
    /// Standard deviation in meters of an intensity-independent range error.
    #[arg(long)]
    pub noise_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Dataset directory or manifest file.
    #[arg(long, short)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Samples drawn per group.
    #[arg(long)]
    pub per_group: Option<usize>,
    /// Samples drawn overall from datasets without capture distances.
    #[arg(long)]
    pub flat_total: Option<usize>,
    #[arg(long)]
    pub grouping: Option<Grouping>,
    /// Width of pixel-mean groups (default: bin width).
    #[arg(long)]
    pub group_width: Option<f64>,
    /// Lower end of the lambda search bracket.
    #[arg(long)]
    pub lambda_lo: Option<f64>,
    /// Upper end of the lambda search bracket.
    #[arg(long)]
    pub lambda_hi: Option<f64>,
    /// Root-finding tolerance on lambda.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Range window of pixel means used for the fit, as LO-HI meters.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Width of the range bins in meters.
    #[arg(long)]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Fit the six standard windows 0.50-2.00 through 0.75-3.00.
    #[arg(long)]
    pub all_windows: bool,
    /// CSV destination (default stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Directory for bins.csv and the SVG plots.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Include the six standard windows.
    #[arg(long)]
    pub all_windows: bool,
    /// JSON destination (default stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    /// Scale of the fitted curve.
    #[arg(long, default_value_t = 0.002728953587948)]
    pub k: f64,
    /// Exponent of the fitted curve.
    #[arg(long, default_value_t = 2.032949021394627)]
    pub lambda: f64,
    /// CSV destination (default stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
