use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use stereo_noise::ingest::{read_dataset, Dataset, ExperimentKind};
use stereo_noise::stats::{bin_by_range, BinStats};
use stereo_noise::{
    fit_with, BaselineModel, Error, FitInput, FitOptions, IlluminationMode, PowerLawFit, PowerLawModel,
};

use crate::config::{window_label, Analysis, TABLE_WINDOWS};
use crate::data::{dataset_digest, sample_pairs, Sampled};
use crate::error::{CliError, Context, Result};
use crate::svg::Chart;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn open(path: &Path) -> Result<Dataset> {
    read_dataset(path).context(|| format!("opening dataset {}", path.display()))
}

#[derive(Clone, Debug)]
pub struct WindowFit {
    pub window: (f64, f64),
    pub fit: PowerLawFit,
}

fn options(cfg: &Analysis) -> FitOptions {
    FitOptions {
        bracket: cfg.bracket,
        tol: cfg.tol,
        ..FitOptions::default()
    }
}

/// Fits the pairs whose pixel mean lies in `window` (all pairs if `None`).
pub fn fit_window(data: &Sampled, cfg: &Analysis, window: Option<(f64, f64)>) -> Result<PowerLawFit> {
    let (pairs, distances) = match window {
        Some(w) => data.within(w),
        None => (data.pairs.clone(), data.distances.clone()),
    };
    let what = || match window {
        Some(w) => format!("fitting window {}", window_label(w)),
        None => "fitting the full data range".into(),
    };
    if distances.iter().all(Option::is_some) && !pairs.is_empty() {
        let mut d: Vec<u64> = distances.iter().map(|d| d.unwrap().to_bits()).collect();
        d.sort_unstable();
        d.dedup();
        if d.len() < 2 {
            return Err(CliError::Core {
                context: what(),
                source: Error::DegenerateData(
                    "all samples come from a single capture distance; lambda is not identifiable".into(),
                ),
            });
        }
    }
    let input = FitInput::new(pairs).context(what)?;
    let f = fit_with(&input, &options(cfg)).context(what)?;
    if !f.converged {
        log::warn!("{}: root finding stopped before reaching the tolerance", what());
    }
    Ok(f)
}

pub fn fit_windows(data: &Sampled, cfg: &Analysis, all: bool) -> Result<Vec<WindowFit>> {
    let windows: Vec<(f64, f64)> = if all { TABLE_WINDOWS.to_vec() } else { vec![cfg.window] };
    windows
        .into_iter()
        .map(|w| {
            Ok(WindowFit {
                window: w,
                fit: fit_window(data, cfg, Some(w))?,
            })
        })
        .collect()
}

pub fn fit_csv(fits: &[WindowFit]) -> String {
    let mut s = String::from("window,k,se_k,lambda,se_lambda\n");
    for w in fits {
        let f = &w.fit;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            window_label(w.window),
            f.k,
            f.se_k,
            f.lambda,
            f.se_lambda
        );
    }
    s
}

pub fn cmd_fit(cfg: &Analysis, dataset: &Path, all: bool, out: Option<&Path>) -> Result<()> {
    let ds = open(dataset)?;
    let data = sample_pairs(&ds, cfg)?;
    let fits = fit_windows(&data, cfg, all)?;
    for w in &fits {
        log::info!(
            "{}: k = {} +- {}, lambda = {} +- {} (n = {})",
            window_label(w.window),
            w.fit.k,
            w.fit.se_k,
            w.fit.lambda,
            w.fit.se_lambda,
            w.fit.n
        );
    }
    emit(out, &fit_csv(&fits))
}

pub struct StatsOutput {
    pub model: PowerLawFit,
    pub bins: Vec<BinStats>,
}

/// Bins the sampled pairs, normalizing kurtosis by the full-range fit.
pub fn compute_stats(data: &Sampled, cfg: &Analysis) -> Result<StatsOutput> {
    let model = fit_window(data, cfg, None)?;
    let bins = bin_by_range(&data.pairs, cfg.bin_width, &model.model()).context(|| "binning".into())?;
    Ok(StatsOutput { model, bins })
}

pub fn bins_csv(bins: &[BinStats]) -> String {
    let mut s = String::from("lo,hi,center,count,kurtosis\n");
    for b in bins {
        let k = b.kurtosis.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", b.lo, b.hi, b.center(), b.count, k);
    }
    s
}

fn sigma_plot(data: &Sampled, stats: &StatsOutput, width: f64) -> String {
    let model = stats.model.model();
    let (lo, hi) = stats.model.data_range;
    let x = (0.0, (hi / width).ceil() * width);
    let abs: Vec<(f64, f64)> = data.pairs.iter().map(|p| (p.mean, p.residual().abs())).collect();
    let rms: Vec<(f64, f64)> = stats
        .bins
        .iter()
        .filter(|b| b.count >= 2)
        .map(|b| {
            let (n, ss) = data
                .pairs
                .iter()
                .filter(|p| p.mean >= b.lo && p.mean < b.hi)
                .fold((0usize, 0.0), |(n, s), p| (n + 1, s + p.residual().powi(2)));
            (b.center(), (ss / n as f64).sqrt())
        })
        .collect();
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|i| lo + (hi - lo) * i as f64 / 200.0)
        .map(|z| (z, model.sigma_z(z)))
        .collect();
    let y_max = abs.iter().map(|p| p.1).fold(model.sigma_z(hi), f64::max) * 1.05;
    let mut c = Chart::new(
        "Range error vs. range",
        "pixel mean range [m]",
        "|z - mean| [m]",
        x,
        (0.0, y_max),
    );
    c.points(&abs, 1.5, "#9ecae1", Some("|residual|"));
    c.points(&rms, 4.0, "#08519c", Some("bin RMS"));
    c.line(
        &curve,
        "#d7301f",
        false,
        Some(&format!(
            "k Z^lambda, k = {:.4e}, lambda = {:.3}",
            model.k, model.lambda
        )),
    );
    c.render()
}

fn kurtosis_plot(stats: &StatsOutput, width: f64, x_max: f64) -> String {
    let pts: Vec<(f64, f64)> = stats
        .bins
        .iter()
        .filter_map(|b| b.kurtosis.map(|k| (b.center(), k)))
        .collect();
    let y_max = pts.iter().map(|p| p.1).fold(4.0, f64::max) * 1.1;
    let x = (0.0, (x_max / width).ceil() * width);
    let mut c = Chart::new(
        "Kurtosis per range bin",
        "range [m]",
        "mean (z - mean)^4 / sigma^4",
        x,
        (0.0, y_max),
    );
    c.line(&[(x.0, 3.0), (x.1, 3.0)], "#636363", true, Some("normal (3)"));
    c.points(&pts, 4.0, "#08519c", Some("bins with at least 100 samples"));
    c.render()
}

fn counts_plot(stats: &StatsOutput, width: f64, x_max: f64) -> String {
    let bars: Vec<(f64, f64, f64)> = stats.bins.iter().map(|b| (b.lo, b.hi, b.count as f64)).collect();
    let y_max = bars.iter().map(|b| b.2).fold(1.0, f64::max) * 1.1;
    let x = (0.0, (x_max / width).ceil() * width);
    let mut c = Chart::new("Samples per range bin", "range [m]", "count", x, (0.0, y_max));
    c.bars(&bars, "#6baed6");
    c.render()
}

pub fn cmd_stats(cfg: &Analysis, dataset: &Path, out: &Path) -> Result<()> {
    let ds = open(dataset)?;
    let data = sample_pairs(&ds, cfg)?;
    let stats = compute_stats(&data, cfg)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let x_max = stats.bins.last().map_or(1.0, |b| b.hi);
    let files = [
        ("bins.csv", bins_csv(&stats.bins)),
        ("sigma_vs_range.svg", sigma_plot(&data, &stats, cfg.bin_width)),
        ("kurtosis.svg", kurtosis_plot(&stats, cfg.bin_width, x_max)),
        ("counts.svg", counts_plot(&stats, cfg.bin_width, x_max)),
    ];
    for (name, text) in files {
        emit(Some(&out.join(name)), &text)?;
    }
    let suppressed = stats
        .bins
        .iter()
        .filter(|b| b.count > 0 && b.kurtosis.is_none())
        .count();
    log::info!(
        "{} bins, {suppressed} with too few samples for kurtosis",
        stats.bins.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitRow {
    window: Option<String>,
    k: f64,
    se_k: f64,
    lambda: f64,
    se_lambda: f64,
    log_likelihood: f64,
    n: usize,
    data_range: (f64, f64),
    converged: bool,
    hessian: [[f64; 2]; 2],
}

impl FitRow {
    fn new(window: Option<(f64, f64)>, f: &PowerLawFit) -> Self {
        FitRow {
            window: window.map(window_label),
            k: f.k,
            se_k: f.se_k,
            lambda: f.lambda,
            se_lambda: f.se_lambda,
            log_likelihood: f.log_likelihood,
            n: f.n,
            data_range: f.data_range,
            converged: f.converged,
            hessian: f.hessian,
        }
    }
}

#[derive(Serialize)]
struct DatasetInfo {
    /// Manifest file name; the directory is left out so that reports do
    /// not depend on where the data lives.
    manifest: String,
    sha256: String,
    experiment_kind: ExperimentKind,
    illumination: IlluminationMode,
    captures: usize,
    frames: usize,
    valid_samples: usize,
    sampled: usize,
    groups: usize,
    short_groups: usize,
}

#[derive(Serialize)]
struct CurvePoint {
    z: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    dataset: DatasetInfo,
    config: &'a Analysis,
    fit: FitRow,
    windows: Vec<FitRow>,
    full_range_fit: FitRow,
    bins: Vec<BinStats>,
    curve: Vec<CurvePoint>,
}

pub fn cmd_report(cfg: &Analysis, dataset: &Path, all: bool, out: Option<&Path>) -> Result<()> {
    let ds = open(dataset)?;
    let data = sample_pairs(&ds, cfg)?;
    let main = fit_window(&data, cfg, Some(cfg.window))?;
    let windows = if all {
        fit_windows(&data, cfg, true)?
    } else {
        Vec::new()
    };
    let stats = compute_stats(&data, cfg)?;
    let model = main.model();
    let (lo, hi) = main.data_range;
    let m = ds.manifest();
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        dataset: DatasetInfo {
            manifest: ds
                .manifest_path()
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: dataset_digest(&ds)?,
            experiment_kind: m.experiment_kind,
            illumination: m.illumination,
            captures: m.captures.len(),
            frames: m.total_frames(),
            valid_samples: data.valid_samples,
            sampled: data.pairs.len(),
            groups: data.groups,
            short_groups: data.short_groups,
        },
        config: cfg,
        fit: FitRow::new(Some(cfg.window), &main),
        windows: windows.iter().map(|w| FitRow::new(Some(w.window), &w.fit)).collect(),
        full_range_fit: FitRow::new(None, &stats.model),
        bins: stats.bins,
        curve: (0..=100)
            .map(|i| lo + (hi - lo) * i as f64 / 100.0)
            .map(|z| CurvePoint {
                z,
                sigma: model.sigma_z(z),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(format!("report: {e}")))?;
    text.push('\n');
    emit(out, &text)
}

/// Range grid of the baseline table: 0 to 4 m in 5 cm steps.
pub fn baseline_grid() -> impl Iterator<Item = f64> {
    (0..=80).map(|i| i as f64 / 20.0)
}

pub fn baselines_csv(fitted: &PowerLawModel) -> String {
    let (kh, ng) = (BaselineModel::khoshelham(), BaselineModel::nguyen());
    let mut s = String::from("z,khoshelham,nguyen,fit\n");
    for z in baseline_grid() {
        let _ = writeln!(s, "{z},{},{},{}", kh.sigma(z), ng.sigma(z), fitted.sigma_z(z));
    }
    s
}

pub fn cmd_baselines(k: f64, lambda: f64, out: Option<&Path>) -> Result<()> {
    let model = PowerLawModel::new(k, lambda).context(|| "fitted curve parameters".into())?;
    emit(out, &baselines_csv(&model))
}
