//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereo_noise::estimator::{hessian_at, k_given_lambda, lambda_score, log_likelihood};
use stereo_noise::radiometry::{Approximation, ShotNoiseSpec};
use stereo_noise::sim::{
    estimate_disparity, predicted_disparity_variance, render_noisy_pair, run_sweep, sample_generative,
    CorrelationWindow, ScanlineLayout, ScanlinePattern, ShotNoise, SimRun,
};
use stereo_noise::stats::{balanced_sample, bin_by_range, kurtosis, pairs_from_samples};
use stereo_noise::{
    fit, BaselineModel, Execution, FitInput, IlluminationModel, NoiseFloor, PowerLawModel, RangePair, StereoRig,
};
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const PASSIVE_FIT: (f64, f64) = (0.002728953587948, 2.032949021394627);
const ACTIVE_FIT: (f64, f64) = (0.001933811429317, 2.417736068990799);

// f = 200 px, b = 5 cm, 3 correlation windows of half width 7 per scanline
struct Bench {
    rig: StereoRig,
    layout: ScanlineLayout,
    pattern: ScanlinePattern,
    ranges: Vec<f64>,
}

impl Bench {
    fn new() -> Self {
        let layout = ScanlineLayout::new(20.0, 3, 7, 3).unwrap();
        Bench {
            rig: StereoRig::new(200.0, 0.05, 640, 0.5).unwrap(),
            pattern: ScanlinePattern::speckle(layout.length, 3.0, 0.3, 1).unwrap(),
            layout,
            ranges: (0..11).map(|i| 0.5 + 0.25 * i as f64).collect(),
        }
    }

    fn lambda(&self, illum: IlluminationModel, trials: usize, seed: u64, floor: Option<f64>) -> Result<f64, String> {
        let mut base = SimRun::new(self.rig, illum, 1.0, trials, seed);
        base.noise_floor = floor.map(|f| NoiseFloor::new(f).unwrap());
        let outs = run_sweep(
            Execution::default(),
            &base,
            &self.ranges,
            &self.pattern,
            &self.layout.windows,
        )
        .map_err(|e| e.to_string())?;
        let pairs: Vec<RangePair> = outs.iter().flat_map(|o| pairs_from_samples(&o.samples)).collect();
        let f = fit(&FitInput::new(pairs).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        Ok(f.lambda)
    }
}

fn passive_exponent() -> Outcome {
    let t = Instant::now();
    let lambda = Bench::new().lambda(IlluminationModel::passive(2e4, 0.5).unwrap(), 10_000, 1, None)?;
    ensure!(
        (1.85..=2.15).contains(&lambda),
        "lambda = {lambda:.4} outside [1.85, 2.15]"
    );
    Ok(format!(
        "lambda = {lambda:.4} (10^4 trials x 11 distances, {:.1} s)",
        t.elapsed().as_secs_f64()
    ))
}

fn active_exponent_and_floor() -> Outcome {
    let b = Bench::new();
    let illum = IlluminationModel::active(2e5, 0.5).unwrap();
    let lambda = b.lambda(illum, 10_000, 1, None)?;
    ensure!((2.8..=3.2).contains(&lambda), "lambda = {lambda:.4} outside [2.8, 3.2]");
    let mut lowered = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let off = b.lambda(illum, 1000, 500 + seed, None)?;
        let on = b.lambda(illum, 1000, 500 + seed, Some(5e-4))?;
        if on < off {
            lowered += 1;
        }
        worst = worst.min(off - on);
    }
    ensure!(lowered == 20, "noise floor lowered lambda in {lowered}/20 paired runs");
    Ok(format!(
        "lambda = {lambda:.4}; floor lowers lambda in 20/20 pairs (smallest drop {worst:.3})"
    ))
}

fn round_trip() -> Outcome {
    let ranges: Vec<f64> = (0..10).map(|i| 0.75 + 0.25 * i as f64).collect();
    let mut summary = Vec::new();
    for (name, (k, lambda)) in [("passive", PASSIVE_FIT), ("active", ACTIVE_FIT)] {
        let model = PowerLawModel::new(k, lambda).unwrap();
        let hits = (0..20)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
                let samples = sample_generative(&model, &ranges, 20_000, &mut rng).unwrap();
                let f = fit(&FitInput::new(pairs_from_samples(&samples)).unwrap()).unwrap();
                (f.lambda - lambda).abs() <= 0.02 && ((f.k - k) / k).abs() <= 0.05
            })
            .count();
        ensure!(hits >= 18, "{name}: {hits}/20 seeds within tolerance");
        summary.push(format!("{name} {hits}/20"));
    }
    Ok(format!("{} seeds recovered (2x10^5 samples each)", summary.join(", ")))
}

fn random_instance(rng: &mut ChaCha8Rng) -> FitInput {
    let n = rng.random_range(50..=500);
    let lambda = rng.random_range(1.0..4.0);
    let k = 10f64.powf(rng.random_range(-4.0..-2.0));
    let pairs = (0..n)
        .map(|_| {
            let mean: f64 = rng.random_range(0.6..3.0);
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            RangePair::new(mean + k * mean.powf(lambda) * e, mean)
        })
        .collect();
    FitInput::new(pairs).unwrap()
}

fn grid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let lambda_step = 2.5e-3;
    let k_points = 2000;
    let log_step = 4.0 * std::f64::consts::LN_10 / (k_points - 1) as f64;
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..50 {
        let input = random_instance(&mut rng);
        let pairs = input.pairs();
        let f = fit(&input).map_err(|e| format!("instance {i}: {e}"))?;
        let n = pairs.len() as f64;
        let sum_log: f64 = pairs.iter().map(|p| p.mean.ln()).sum();
        let ll = |ln_k: f64, lambda: f64, s0: f64| -n * ln_k - lambda * sum_log - s0 * (-2.0 * ln_k).exp() / 2.0;
        let s0_at = |lambda: f64| -> f64 {
            pairs
                .iter()
                .map(|p| p.residual().powi(2) * p.mean.powf(-2.0 * lambda))
                .sum()
        };
        // k spans two decades either side of each row's closed-form optimum
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for row in 0..=2000 {
            let lambda = row as f64 * lambda_step;
            let s0 = s0_at(lambda);
            let log_lo = 0.5 * (s0 / n).ln() - 2.0 * std::f64::consts::LN_10;
            for j in 0..k_points {
                let ln_k = log_lo + j as f64 * log_step;
                let v = ll(ln_k, lambda, s0);
                if v > best.0 {
                    best = (v, lambda, ln_k);
                }
            }
        }
        let (dl, dk) = ((best.1 - f.lambda).abs(), (best.2 - f.k.ln()).abs());
        ensure!(
            ll(f.k.ln(), f.lambda, s0_at(f.lambda)) >= best.0,
            "instance {i}: grid beats the fit"
        );
        ensure!(
            dl <= lambda_step && dk <= log_step,
            "instance {i}: d_lambda {dl:.2e}, d_ln_k {dk:.2e}"
        );
        worst = (worst.0.max(dl / lambda_step), worst.1.max(dk / log_step));
    }
    Ok(format!(
        "50 instances, worst offset {:.2} cells in lambda, {:.2} in k",
        worst.0, worst.1
    ))
}

fn finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let input = random_instance(&mut rng);
        let ll = |k: f64, l: f64| log_likelihood(&input, k, l).unwrap();
        let f = fit(&input).map_err(|e| e.to_string())?;
        let lambda = f.lambda + rng.random_range(-0.3..0.3);
        let k = f.k * rng.random_range(0.7..1.4);

        let k_l = k_given_lambda(&input, lambda).unwrap();
        let h = 1e-5;
        let fd = (ll(k_l, lambda + h) - ll(k_l, lambda - h)) / (2.0 * h);
        let an = lambda_score(&input, lambda).unwrap();
        let mut rel = vec![(fd - an).abs() / an.abs()];

        let (hk, hl) = (1e-4 * k, 1e-4);
        let c = ll(k, lambda);
        let fkk = (ll(k + hk, lambda) - 2.0 * c + ll(k - hk, lambda)) / (hk * hk);
        let fll = (ll(k, lambda + hl) - 2.0 * c + ll(k, lambda - hl)) / (hl * hl);
        let fkl = (ll(k + hk, lambda + hl) - ll(k + hk, lambda - hl) - ll(k - hk, lambda + hl)
            + ll(k - hk, lambda - hl))
            / (4.0 * hk * hl);
        let an = hessian_at(&input, k, lambda).unwrap();
        rel.extend([(fkk, an[0][0]), (fkl, an[0][1]), (fll, an[1][1])].map(|(fd, an)| (fd - an).abs() / an.abs()));
        let m = rel.into_iter().fold(0.0, f64::max);
        ensure!(m <= 1e-3, "instance {i}: relative difference {m:.2e}");
        worst = worst.max(m);
    }
    Ok(format!("20 instances, largest relative difference {worst:.1e}"))
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

fn draws(
    pattern: &ScanlinePattern,
    illum: &IlluminationModel,
    z: f64,
    d: f64,
    window: &CorrelationWindow,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10_000)
        .map(|_| {
            let (l, r) = render_noisy_pair(pattern, illum, z, d, ShotNoise::Poisson, &mut rng).unwrap();
            estimate_disparity(&l, &r, window, d).unwrap()
        })
        .collect()
}

fn disparity_law() -> Outcome {
    let layout = ScanlineLayout::new(20.0, 1, 7, 3).unwrap();
    let window = &layout.windows[0];
    let pattern = ScanlinePattern::speckle(layout.length, 3.0, 0.3, 11).unwrap();
    let p = pattern.samples();
    let mut ratios = Vec::new();
    for (i, intensity) in [5e3, 2e4, 8e4].into_iter().enumerate() {
        let illum = IlluminationModel::passive(intensity, 0.5).unwrap();
        let v = variance(&draws(&pattern, &illum, 1.0, 9.0, window, 60 + i as u64));
        let gradients: Vec<f64> = window
            .pixels()
            .map(|x| intensity * (p[x + 1] - p[x - 1]) / 2.0)
            .collect();
        let mean = window.pixels().map(|x| intensity * p[x]).sum::<f64>() / window.len() as f64;
        let ratio = v / predicted_disparity_variance(2.0 * mean, &gradients).unwrap();
        ensure!(
            (ratio - 1.0).abs() <= 0.15,
            "I = {intensity}: variance ratio {ratio:.3}"
        );
        ratios.push(format!("{ratio:.3}"));
    }

    let rig = StereoRig::new(120.0, 0.05, 640, 0.5).unwrap();
    let layout = ScanlineLayout::new(12.0, 1, 7, 3).unwrap();
    let window = &layout.windows[0];
    let pattern = ScanlinePattern::speckle(layout.length, 3.0, 0.3, 12).unwrap();
    let illum = IlluminationModel::active(2e5, 0.5).unwrap();
    let std_at = |z: f64, seed: u64| {
        variance(&draws(
            &pattern,
            &illum,
            z,
            rig.range_to_disparity(z).unwrap(),
            window,
            seed,
        ))
        .sqrt()
    };
    let base = std_at(0.5, 90);
    let mut scaled = Vec::new();
    for (i, q) in [1.5, 2.0, 3.0].into_iter().enumerate() {
        let r = std_at(0.5 * q, 91 + i as u64) / base / q;
        ensure!((r - 1.0).abs() <= 0.10, "Z/Z0 = {q}: std ratio / (Z/Z0) = {r:.3}");
        scaled.push(format!("{r:.3}"));
    }
    Ok(format!(
        "variance / prediction = [{}]; active std ratio / (Z/Z0) = [{}]",
        ratios.join(", "),
        scaled.join(", ")
    ))
}

fn radiometry() -> Outcome {
    let active = IlluminationModel::active(3e4, 0.7).unwrap();
    let passive = IlluminationModel::passive(3e4, 0.7).unwrap();
    let reference = active.intensity_at_range(0.7) * 0.49;
    for i in 1..=400 {
        let z = 0.01 * i as f64;
        let c = active.intensity_at_range(z) * z * z;
        ensure!(((c - reference) / reference).abs() <= 1e-12, "Z = {z}: I Z^2 = {c}");
        ensure!(
            passive.intensity_at_range(z) == 3e4,
            "passive intensity varies at Z = {z}"
        );
    }
    let spec = ShotNoiseSpec::new(1e4, Approximation::ExactPoisson).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs: Vec<f64> = (0..1_000_000).map(|_| spec.sample(&mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = variance(&xs);
    ensure!((mean / 1e4 - 1.0).abs() <= 0.01, "Poisson mean {mean}");
    ensure!((var / 1e4 - 1.0).abs() <= 0.01, "Poisson variance {var}");
    Ok(format!(
        "I Z^2 constant over 400 ranges; Poisson mean {mean:.1}, variance {var:.1}"
    ))
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r: Vec<f64> = (0..1_000_000).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let kurt = kurtosis(&r, &vec![1.0; r.len()]).map_err(|e| e.to_string())?;
    ensure!((kurt - 3.0).abs() <= 0.05, "kurtosis {kurt}");

    // 99 samples in [0.5, 0.75), 100 in [0.75, 1.0)
    let model = PowerLawModel::new(0.01, 0.0).unwrap();
    let mut pairs: Vec<RangePair> = (0..99)
        .map(|i| RangePair::new(0.6 + 1e-3 * (i % 7) as f64, 0.6))
        .collect();
    pairs.extend((0..100).map(|i| RangePair::new(0.8 + 1e-3 * (i % 5) as f64, 0.8)));
    let bins = bin_by_range(&pairs, 0.25, &model).map_err(|e| e.to_string())?;
    ensure!(
        bins[2].count == 99 && bins[2].kurtosis.is_none(),
        "bin with 99 samples not suppressed"
    );
    ensure!(
        bins[3].count == 100 && bins[3].kurtosis.is_some(),
        "bin with 100 samples suppressed"
    );

    let groups: Vec<Vec<RangePair>> = (0..11)
        .map(|g| {
            let z = 0.5 + 0.25 * g as f64;
            (0..300 + 37 * g)
                .map(|i| RangePair::new(z + 1e-4 * i as f64, z))
                .collect()
        })
        .collect();
    let s = balanced_sample(&groups, 200, 3).map_err(|e| e.to_string())?;
    for (g, group) in groups.iter().enumerate() {
        let n = s.pairs.iter().filter(|p| p.mean == group[0].mean).count();
        ensure!(n == 200, "group {g}: {n} samples");
    }
    ensure!(
        s.pairs.len() == 2200 && s.short_groups == 0,
        "balanced sample of {} pairs",
        s.pairs.len()
    );
    Ok(format!(
        "kurtosis {kurt:.4} at 10^6; 99-sample bin suppressed; 200 per group x 11"
    ))
}

fn baselines() -> Outcome {
    let csv = common::ok(&["baselines"]);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
        .collect();
    let (kh, ng) = (BaselineModel::khoshelham(), BaselineModel::nguyen());
    let table = [
        (0.0, Some(0.0), 0.001504),
        (0.4, None, 0.0012),
        (1.0, Some(0.001425), 0.001884),
        (2.0, Some(0.0057), 0.006064),
        (4.0, Some(0.0228), 0.025824),
    ];
    for (z, k, n) in table {
        let row = rows
            .iter()
            .find(|r| (r[0] - z).abs() < 1e-12)
            .ok_or(format!("no row at Z = {z}"))?;
        if let Some(k) = k {
            ensure!(
                (row[1] - k).abs() <= 1e-6 && (kh.sigma(z) - k).abs() <= 1e-6,
                "Khoshelham at Z = {z}: {}",
                row[1]
            );
        }
        ensure!(
            (row[2] - n).abs() <= 1e-6 && (ng.sigma(z) - n).abs() <= 1e-6,
            "Nguyen at Z = {z}: {}",
            row[2]
        );
    }
    Ok("all tabulated points within 1e-6".into())
}

fn determinism() -> Outcome {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let at = |name: &str, run: &str| tmp.path().join(run).join(name);
    let s = |p: std::path::PathBuf| p.to_str().unwrap().to_owned();
    for run in ["a", "b"] {
        let (gen, pipe) = (s(at("generative", run)), s(at("pipeline", run)));
        common::ok(&[
            "simulate",
            "--out",
            &gen,
            "--mode",
            "generative",
            "--illumination",
            "passive",
            "--k",
            "0.0027",
            "--lambda",
            "2.03",
            "--seed",
            "21",
            "--frames",
            "60",
        ]);
        common::ok(&[
            "simulate",
            "--out",
            &pipe,
            "--mode",
            "pipeline",
            "--illumination",
            "active",
            "--focal-length",
            "200",
            "--baseline",
            "0.05",
            "--frames",
            "50",
            "--seed",
            "21",
        ]);
        for (tag, ds) in [("generative", &gen), ("pipeline", &pipe)] {
            let fit_csv = s(at(&format!("fit_{tag}.csv"), run));
            common::ok(&["fit", "--dataset", ds, "--all-windows", "--out", &fit_csv]);
            common::ok(&["stats", "--dataset", ds, "--out", &s(at(&format!("stats_{tag}"), run))]);
        }
    }
    let (a, b) = (
        common::snapshot(&tmp.path().join("a")),
        common::snapshot(&tmp.path().join("b")),
    );
    let files: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    for expected in [
        "generative/manifest.toml",
        "pipeline/provenance.toml",
        "fit_pipeline.csv",
        "stats_generative/kurtosis.svg",
    ] {
        ensure!(files.contains(&expected), "{expected} was not written");
    }
    ensure!(a.len() == b.len(), "runs wrote {} and {} files", a.len(), b.len());
    for (fa, fb) in a.iter().zip(&b) {
        ensure!(fa == fb, "{} differs between runs", fa.0);
    }
    Ok(format!(
        "{} artifacts byte-identical across repeated simulate/fit/stats runs",
        a.len()
    ))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("passive pipeline exponent", passive_exponent),
        ("active pipeline exponent and noise floor", active_exponent_and_floor),
        ("estimator round trip", round_trip),
        ("grid-search oracle", grid_oracle),
        ("analytic vs numeric derivatives", finite_differences),
        ("disparity variance law", disparity_law),
        ("radiometry invariants", radiometry),
        ("statistics", statistics),
        ("baseline curves", baselines),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
