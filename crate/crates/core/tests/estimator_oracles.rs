use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereo_noise::estimator::{hessian_at, lambda_score, log_likelihood};
use stereo_noise::sim::sample_generative;
use stereo_noise::stats::pairs_from_samples;
use stereo_noise::{fit, FitInput, PowerLawModel, RangePair};

const PASSIVE: (f64, f64) = (0.002728953587948, 2.032949021394627);
const ACTIVE: (f64, f64) = (0.001933811429317, 2.417736068990799);

fn random_instance(rng: &mut ChaCha8Rng, n_max: usize) -> FitInput {
    let n = rng.random_range(50..=n_max);
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

/// Gaussian log-density summed sample by sample.
fn direct_log_likelihood(pairs: &[RangePair], k: f64, lambda: f64) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let s = k * p.mean.powf(lambda);
            let r = (p.z - p.mean) / s;
            -0.5 * (2.0 * std::f64::consts::PI).ln() - s.ln() - 0.5 * r * r
        })
        .sum()
}

fn round_trip(k: f64, lambda: f64, seed: u64) -> (f64, f64) {
    let model = PowerLawModel::new(k, lambda).unwrap();
    let ranges: Vec<f64> = (0..10).map(|i| 0.75 + 0.25 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_generative(&model, &ranges, 20_000, &mut rng).unwrap();
    let f = fit(&FitInput::new(pairs_from_samples(&samples)).unwrap()).unwrap();
    assert!(f.converged);
    (f.lambda - lambda, (f.k - k) / k)
}

#[test]
fn generative_round_trip_recovers_parameters() {
    for (k, lambda) in [PASSIVE, ACTIVE] {
        let hits = (0..20)
            .filter(|&seed| {
                let (dl, dk) = round_trip(k, lambda, 1000 + seed);
                dl.abs() <= 0.02 && dk.abs() <= 0.05
            })
            .count();
        assert!(hits >= 18, "lambda {lambda}: {hits}/20 seeds recovered");
    }
}

#[test]
fn fit_agrees_with_dense_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let lambda_step = 2.5e-3;
    let k_points = 2000;
    let log_step = 4.0 * std::f64::consts::LN_10 / (k_points - 1) as f64;
    for _ in 0..50 {
        let input = random_instance(&mut rng, 500);
        let pairs = input.pairs();
        let f = fit(&input).unwrap();
        let n = pairs.len() as f64;
        let sum_log: f64 = pairs.iter().map(|p| p.mean.ln()).sum();
        let ll = |ln_k: f64, lambda: f64, s0: f64| -n * ln_k - lambda * sum_log - s0 * (-2.0 * ln_k).exp() / 2.0;

        // each lambda row scans k around that row's closed-form optimum
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=2000 {
            let lambda = i as f64 * lambda_step;
            let s0: f64 = pairs
                .iter()
                .map(|p| p.residual().powi(2) * p.mean.powf(-2.0 * lambda))
                .sum();
            let log_lo = 0.5 * (s0 / n).ln() - 2.0 * std::f64::consts::LN_10;
            for j in 0..k_points {
                let ln_k = log_lo + j as f64 * log_step;
                let v = ll(ln_k, lambda, s0);
                if v > best.0 {
                    best = (v, lambda, ln_k);
                }
            }
        }
        let s0_fit: f64 = pairs
            .iter()
            .map(|p| p.residual().powi(2) * p.mean.powf(-2.0 * f.lambda))
            .sum();
        assert!(ll(f.k.ln(), f.lambda, s0_fit) >= best.0);
        assert!(
            (best.1 - f.lambda).abs() <= lambda_step,
            "lambda {} vs grid {}",
            f.lambda,
            best.1
        );
        assert!(
            (best.2 - f.k.ln()).abs() <= log_step,
            "k {} vs grid {}",
            f.k,
            best.2.exp()
        );
    }
}

#[test]
fn likelihood_matches_per_sample_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let input = random_instance(&mut rng, 300);
        let (k, lambda) = (rng.random_range(1e-4..1e-2), rng.random_range(0.0..5.0));
        let a = log_likelihood(&input, k, lambda).unwrap();
        let b = direct_log_likelihood(input.pairs(), k, lambda);
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let input = random_instance(&mut rng, 500);
        let ll = |k: f64, l: f64| direct_log_likelihood(input.pairs(), k, l);
        let f = fit(&input).unwrap();
        let lambda = f.lambda + rng.random_range(-0.3..0.3);
        let k = f.k * rng.random_range(0.7..1.4);

        // score at the conditional optimum of k
        let k_l = stereo_noise::estimator::k_given_lambda(&input, lambda).unwrap();
        let h = 1e-5;
        let fd = (ll(k_l, lambda + h) - ll(k_l, lambda - h)) / (2.0 * h);
        let an = lambda_score(&input, lambda).unwrap();
        assert!((fd - an).abs() <= 1e-3 * an.abs(), "score {an} vs {fd}");

        let (hk, hl) = (1e-4 * k, 1e-4);
        let c = ll(k, lambda);
        let fkk = (ll(k + hk, lambda) - 2.0 * c + ll(k - hk, lambda)) / (hk * hk);
        let fll = (ll(k, lambda + hl) - 2.0 * c + ll(k, lambda - hl)) / (hl * hl);
        let fkl = (ll(k + hk, lambda + hl) - ll(k + hk, lambda - hl) - ll(k - hk, lambda + hl)
            + ll(k - hk, lambda - hl))
            / (4.0 * hk * hl);
        let an = hessian_at(&input, k, lambda).unwrap();
        for (fd, an) in [(fkk, an[0][0]), (fkl, an[0][1]), (fll, an[1][1])] {
            assert!((fd - an).abs() <= 1e-3 * an.abs(), "hessian {an} vs {fd}");
        }
    }
}
