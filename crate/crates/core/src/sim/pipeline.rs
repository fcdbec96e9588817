use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::matcher::{estimate_disparity_with, CorrelationWindow, MatchOptions};
use super::pattern::ScanlinePattern;
use super::render::{render_noisy_pair, ShotNoise};
use super::{derive_seed, RangeSample};
use crate::error::{Error, Result};
use crate::model::StereoRig;
use crate::par::{self, Execution};
use crate::radiometry::{IlluminationModel, NoiseFloor};

const STREAM_TRIAL: u64 = 1;
const STREAM_FLOOR: u64 = 2;
const STREAM_RANGE: u64 = 3;

/// One Monte Carlo batch at a single true range.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub rig: StereoRig,
    pub illum: IlluminationModel,
    /// Axial range of the fronto-parallel target, meters.
    pub true_range: f64,
    /// Number of frames rendered and matched.
    pub trials: usize,
    pub seed: u64,
    pub noise: ShotNoise,
    /// Intensity-independent range error, off when `None`.
    pub noise_floor: Option<NoiseFloor>,
    pub match_options: MatchOptions,
}

impl SimRun {
    pub fn new(rig: StereoRig, illum: IlluminationModel, true_range: f64, trials: usize, seed: u64) -> Self {
        SimRun {
            rig,
            illum,
            true_range,
            trials,
            seed,
            noise: ShotNoise::Poisson,
            noise_floor: None,
            match_options: MatchOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Domain("a simulation run needs at least one trial".into()));
        }
        if !(self.true_range > 0.0 && self.true_range.is_finite()) {
            return Err(Error::Domain(format!(
                "true range must be positive, got {}",
                self.true_range
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineOutput {
    /// `trials * windows` samples ordered by frame, then window.
    pub samples: Vec<RangeSample>,
    pub match_failures: usize,
    /// Frames whose rendering failed; all their samples are invalid.
    pub render_failures: usize,
}

impl PipelineOutput {
    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_valid()).count()
    }
}

/// Window placement on a scanline long enough for disparities up to
/// `max_disparity`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanlineLayout {
    pub length: usize,
    pub windows: Vec<CorrelationWindow>,
}

impl ScanlineLayout {
    pub fn new(max_disparity: f64, pixels: usize, half_width: usize, search_radius: usize) -> Result<Self> {
        if pixels == 0 || !(max_disparity >= 0.0) {
            return Err(Error::Domain(
                "layout needs at least one pixel and a nonnegative disparity".into(),
            ));
        }
        let first = max_disparity.ceil() as usize + search_radius + 2 * half_width + 4;
        let spacing = 2 * half_width + 1;
        let windows = (0..pixels)
            .map(|i| CorrelationWindow::new(first + i * spacing, half_width))
            .collect::<Result<Vec<_>>>()?;
        let last = first + (pixels - 1) * spacing;
        Ok(ScanlineLayout {
            length: last + half_width + 6,
            windows,
        })
    }
}

/// Renders, matches and triangulates `run.trials` frames.
pub fn run_pipeline(run: &SimRun, pattern: &ScanlinePattern, windows: &[CorrelationWindow]) -> Result<PipelineOutput> {
    run_pipeline_with(Execution::default(), run, pattern, windows)
}

pub fn run_pipeline_with(
    exec: Execution,
    run: &SimRun,
    pattern: &ScanlinePattern,
    windows: &[CorrelationWindow],
) -> Result<PipelineOutput> {
    run.validate()?;
    if windows.is_empty() {
        return Err(Error::Domain("pipeline needs at least one correlation window".into()));
    }
    let d_true = run.rig.range_to_disparity(run.true_range)?;
    let floor = match run.noise_floor {
        Some(f) if f.range_std > 0.0 => Some(Normal::new(0.0, f.range_std).map_err(|e| Error::Domain(e.to_string()))?),
        _ => None,
    };

    let frames = par::map_indexed(exec, run.trials, |t| {
        simulate_frame(run, pattern, windows, d_true, floor.as_ref(), t)
    });

    let mut out = PipelineOutput {
        samples: Vec::with_capacity(run.trials * windows.len()),
        ..Default::default()
    };
    for frame in frames {
        match frame {
            FrameResult::Matched(samples, failures) => {
                out.match_failures += failures;
                out.samples.extend(samples);
            }
            FrameResult::RenderFailed(samples) => {
                out.render_failures += 1;
                out.samples.extend(samples);
            }
        }
    }
    Ok(out)
}

enum FrameResult {
    Matched(Vec<RangeSample>, usize),
    RenderFailed(Vec<RangeSample>),
}

fn simulate_frame(
    run: &SimRun,
    pattern: &ScanlinePattern,
    windows: &[CorrelationWindow],
    d_true: f64,
    floor: Option<&Normal<f64>>,
    frame: usize,
) -> FrameResult {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, STREAM_TRIAL, frame as u64));
    let invalid = |w: &CorrelationWindow| RangeSample {
        pixel: w.center,
        frame,
        z: None,
    };
    let Ok((left, right)) = render_noisy_pair(pattern, &run.illum, run.true_range, d_true, run.noise, &mut rng) else {
        return FrameResult::RenderFailed(windows.iter().map(invalid).collect());
    };
    let mut floor_rng = floor.map(|_| ChaCha8Rng::seed_from_u64(derive_seed(run.seed, STREAM_FLOOR, frame as u64)));
    let mut failures = 0;
    let samples = windows
        .iter()
        .map(|w| {
            let d = estimate_disparity_with(&left, &right, w, d_true, &run.match_options)
                .and_then(|d| run.rig.disparity_to_range(d));
            match d {
                Ok(mut z) => {
                    if let (Some(dist), Some(r)) = (floor, floor_rng.as_mut()) {
                        z += dist.sample(r);
                    }
                    RangeSample {
                        pixel: w.center,
                        frame,
                        z: (z > 0.0).then_some(z),
                    }
                }
                Err(_) => {
                    failures += 1;
                    invalid(w)
                }
            }
        })
        .collect();
    FrameResult::Matched(samples, failures)
}

/// Runs `base` at each of `ranges`, deriving one seed per range.
pub fn run_sweep(
    exec: Execution,
    base: &SimRun,
    ranges: &[f64],
    pattern: &ScanlinePattern,
    windows: &[CorrelationWindow],
) -> Result<Vec<PipelineOutput>> {
    ranges
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let run = SimRun {
                true_range: z,
                seed: derive_seed(base.seed, STREAM_RANGE, i as u64),
                ..base.clone()
            };
            run_pipeline_with(exec, &run, pattern, windows)
        })
        .collect()
}
