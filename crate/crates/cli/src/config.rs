//! Run configuration: command-line flags over the `--config` file over
//! built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stereo_noise::stats::{GroupingStrategy, DEFAULT_BIN_WIDTH, DEFAULT_FLAT_TOTAL, DEFAULT_PER_GROUP};
use stereo_noise::IlluminationMode;

use crate::cli::{AnalysisArgs, Grouping, SimMode, SimulateArgs};
use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_WINDOW: (f64, f64) = (0.75, 3.0);
pub const DEFAULT_BRACKET: (f64, f64) = (0.0, 5.0);
pub const DEFAULT_TOL: f64 = 1e-10;

/// Range windows fitted by `--all-windows`.
pub const TABLE_WINDOWS: [(f64, f64); 6] = [
    (0.50, 2.00),
    (0.75, 2.00),
    (0.75, 2.25),
    (0.75, 2.50),
    (0.75, 2.75),
    (0.75, 3.00),
];

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub simulate: SimulateFile,
    #[serde(default)]
    pub analysis: AnalysisFile,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub mode: Option<SimMode>,
    pub illumination: Option<IlluminationMode>,
    pub k: Option<f64>,
    pub lambda: Option<f64>,
    pub distances: Option<Vec<f64>>,
    pub pixels: Option<u32>,
    pub frames: Option<usize>,
    pub focal_length: Option<f64>,
    pub baseline: Option<f64>,
    pub intensity: Option<f64>,
    pub control_range: Option<f64>,
    pub half_width: Option<usize>,
    pub correlation_length: Option<f64>,
    pub contrast: Option<f64>,
    pub noise_floor: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFile {
    pub per_group: Option<usize>,
    pub flat_total: Option<usize>,
    pub bracket: Option<[f64; 2]>,
    pub tol: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub bin_width: Option<f64>,
    pub grouping: Option<Grouping>,
    pub group_width: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Settings shared by `fit`, `stats` and `report`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Analysis {
    pub seed: u64,
    pub per_group: usize,
    pub flat_total: usize,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub window: (f64, f64),
    pub bin_width: f64,
    pub grouping: GroupingStrategy,
}

impl Analysis {
    pub fn resolve(args: &AnalysisArgs, file: &FileConfig) -> Result<Self> {
        let f = &file.analysis;
        let bracket = match (args.lambda_lo, args.lambda_hi) {
            (None, None) => f.bracket.map(|[a, b]| (a, b)).unwrap_or(DEFAULT_BRACKET),
            (lo, hi) => {
                let base = f.bracket.map(|[a, b]| (a, b)).unwrap_or(DEFAULT_BRACKET);
                (lo.unwrap_or(base.0), hi.unwrap_or(base.1))
            }
        };
        let bin_width = args.bin_width.or(f.bin_width).unwrap_or(DEFAULT_BIN_WIDTH);
        let grouping = match args.grouping.or(f.grouping).unwrap_or_default() {
            Grouping::Nominal => GroupingStrategy::NominalDistance,
            Grouping::PixelMean => GroupingStrategy::PixelMean {
                width: args.group_width.or(f.group_width).unwrap_or(bin_width),
            },
        };
        let a = Analysis {
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            per_group: args.per_group.or(f.per_group).unwrap_or(DEFAULT_PER_GROUP),
            flat_total: args.flat_total.or(f.flat_total).unwrap_or(DEFAULT_FLAT_TOTAL),
            bracket,
            tol: args.tol.or(f.tol).unwrap_or(DEFAULT_TOL),
            window: args.window.or(f.window.map(|[a, b]| (a, b))).unwrap_or(DEFAULT_WINDOW),
            bin_width,
            grouping,
        };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.per_group < 1 || self.flat_total < 1 {
            return bad("sample counts must be at least 1".into());
        }
        if !(self.bracket.0 < self.bracket.1) {
            return bad(format!("empty lambda bracket [{}, {}]", self.bracket.0, self.bracket.1));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if !(self.window.0 < self.window.1) {
            return bad(format!("empty range window {}-{}", self.window.0, self.window.1));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad(format!("bin width must be positive, got {}", self.bin_width));
        }
        if let GroupingStrategy::PixelMean { width } = self.grouping {
            if !(width > 0.0 && width.is_finite()) {
                return bad(format!("group width must be positive, got {width}"));
            }
        }
        Ok(())
    }
}

/// Fully resolved `simulate` settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Simulation {
    pub mode: SimMode,
    pub illumination: IlluminationMode,
    pub seed: u64,
    pub distances: Vec<f64>,
    /// Frames per capture distance.
    pub frames: usize,
    /// Pixels per frame (generative) or correlation windows per scanline.
    pub pixels: u32,
    pub noise_floor: Option<f64>,
    pub model: Option<ModelParams>,
    pub rig: Option<RigParams>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    pub k: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RigParams {
    pub focal_length: f64,
    pub baseline: f64,
    pub intensity: f64,
    pub control_range: f64,
    pub half_width: usize,
    pub correlation_length: f64,
    pub contrast: f64,
}

pub fn default_distances() -> Vec<f64> {
    (0..11).map(|i| 0.5 + 0.25 * i as f64).collect()
}

impl Simulation {
    pub fn resolve(args: &SimulateArgs, file: &FileConfig) -> Result<Self> {
        let f = &file.simulate;
        let mode = args.mode.or(f.mode).unwrap_or(SimMode::Generative);
        let illumination = args
            .illumination
            .or(f.illumination)
            .unwrap_or(IlluminationMode::Passive);
        let distances = args
            .distances
            .clone()
            .or_else(|| f.distances.clone())
            .unwrap_or_else(default_distances);
        if distances.is_empty() || distances.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(CliError::Config(
                "distances must be a nonempty list of positive ranges".into(),
            ));
        }
        let noise_floor = args.noise_floor.or(f.noise_floor).filter(|v| *v > 0.0);
        let (model, rig, default_pixels) = match mode {
            SimMode::Generative => {
                if args.focal_length.is_some() || args.baseline.is_some() {
                    log::warn!("rig parameters are ignored in generative mode");
                }
                let (Some(k), Some(lambda)) = (args.k.or(f.k), args.lambda.or(f.lambda)) else {
                    return Err(CliError::Config("generative mode needs --k and --lambda".into()));
                };
                (Some(ModelParams { k, lambda }), None, 200)
            }
            SimMode::Pipeline => {
                let (Some(focal_length), Some(baseline)) =
                    (args.focal_length.or(f.focal_length), args.baseline.or(f.baseline))
                else {
                    return Err(CliError::Config(
                        "pipeline mode needs rig parameters --focal-length and --baseline".into(),
                    ));
                };
                if args.k.is_some() || args.lambda.is_some() {
                    return Err(CliError::Config(
                        "--k and --lambda only apply to generative mode".into(),
                    ));
                }
                let intensity = args.intensity.or(f.intensity).unwrap_or(match illumination {
                    IlluminationMode::Passive => 2e4,
                    IlluminationMode::Active => 2e5,
                });
                let rig = RigParams {
                    focal_length,
                    baseline,
                    intensity,
                    control_range: args.control_range.or(f.control_range).unwrap_or(0.5),
                    half_width: args.half_width.or(f.half_width).unwrap_or(7),
                    correlation_length: args.correlation_length.or(f.correlation_length).unwrap_or(3.0),
                    contrast: args.contrast.or(f.contrast).unwrap_or(0.3),
                };
                (None, Some(rig), 8)
            }
        };
        let s = Simulation {
            mode,
            illumination,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            distances,
            frames: args.frames.or(f.frames).unwrap_or(300),
            pixels: args.pixels.or(f.pixels).unwrap_or(default_pixels),
            noise_floor,
            model,
            rig,
        };
        if s.frames < 1 || s.pixels < 1 {
            return Err(CliError::Config("frames and pixels must be at least 1".into()));
        }
        Ok(s)
    }
}

/// Parses `LO-HI`, e.g. `0.75-3.00`.
pub fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once('-').ok_or_else(|| format!("expected LO-HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if !(lo < hi) {
        return Err(format!("window {s:?} is empty"));
    }
    Ok((lo, hi))
}

pub fn window_label((lo, hi): (f64, f64)) -> String {
    format!("{lo:.2}-{hi:.2}")
}
