//! Joint maximum-likelihood fit of `sigma_Z = k * Z^lambda`.
//!
//! Each datum is a range measurement `z` and the mean `zbar` of its pixel,
//! modeled as `z ~ N(zbar, (k * zbar^lambda)^2)`. With residual `r = z - zbar`,
//! `L = ln zbar` and `w = r^2 * zbar^(-2 lambda)`:
//!
//! ```text
//! l(k, lambda)   = -N ln sqrt(2 pi) - N ln k - lambda sum L - sum w / (2 k^2)
//! dl/dk          = -N / k + sum w / k^3                 => k^2 = sum w / N
//! dl/dlambda     = -sum L + sum w L / k^2
//! d2l/dk2        =  N / k^2 - 3 sum w / k^4
//! d2l/dk dlambda = -2 sum w L / k^3
//! d2l/dlambda2   = -2 sum w L^2 / k^2
//! ```
//!
//! The fit substitutes the closed-form `k(lambda)` and solves the profile
//! score for `lambda` with Brent's method. The profile score is
//! nonincreasing in `lambda` (Cauchy-Schwarz on the weights), so a bracket
//! with a sign change contains exactly one maximum. Standard errors come
//! from the inverse observed information `(-H)^-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PowerLawModel;
use crate::par::{tree_sum, Execution};
use crate::roots::brent;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A range measurement paired with its pixel mean, both in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangePair {
    pub z: f64,
    pub mean: f64,
}

impl RangePair {
    pub fn new(z: f64, mean: f64) -> Self {
        RangePair { z, mean }
    }

    #[inline]
    pub fn residual(&self) -> f64 {
        self.z - self.mean
    }
}

/// Validated estimator input.
#[derive(Clone, Debug, PartialEq)]
pub struct FitInput {
    pairs: Vec<RangePair>,
    log_means: Vec<f64>,
}

impl FitInput {
    pub const MIN_SAMPLES: usize = 10;

    pub fn new(pairs: Vec<RangePair>) -> Result<Self> {
        if pairs.len() < Self::MIN_SAMPLES {
            return Err(Error::InsufficientSamples {
                have: pairs.len(),
                need: Self::MIN_SAMPLES,
            });
        }
        Self::build(pairs)
    }

    /// Like [`FitInput::new`] without the minimum sample count.
    #[doc(hidden)]
    pub fn new_small(pairs: Vec<RangePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        Self::build(pairs)
    }

    fn build(pairs: Vec<RangePair>) -> Result<Self> {
        if let Some(p) = pairs
            .iter()
            .find(|p| !(p.z.is_finite() && p.mean.is_finite() && p.mean > 0.0))
        {
            return Err(Error::Domain(format!(
                "fit input needs finite values and positive means, got z = {}, mean = {}",
                p.z, p.mean
            )));
        }
        let log_means = pairs.iter().map(|p| p.mean.ln()).collect();
        Ok(FitInput { pairs, log_means })
    }

    /// Pairs whose mean lies in `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> Result<FitInput> {
        FitInput::new(
            self.pairs
                .iter()
                .copied()
                .filter(|p| p.mean >= lo && p.mean <= hi)
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[RangePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Smallest and largest pixel mean.
    pub fn data_range(&self) -> (f64, f64) {
        self.pairs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.mean), hi.max(p.mean))
            })
    }

    fn sum_log_means(&self) -> f64 {
        tree_sum(Execution::default(), self.len(), |i| [self.log_means[i]])[0]
    }

    /// `[sum w, sum w L, sum w L^2]` at `lambda`.
    fn weighted_sums(&self, lambda: f64) -> [f64; 3] {
        tree_sum(Execution::default(), self.len(), |i| {
            let l = self.log_means[i];
            let r = self.pairs[i].residual();
            let w = r * r * (-2.0 * lambda * l).exp();
            [w, w * l, w * l * l]
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub k: f64,
    pub lambda: f64,
    pub se_k: f64,
    pub se_lambda: f64,
    pub log_likelihood: f64,
    /// Second derivatives of the log-likelihood, order `(k, lambda)`.
    pub hessian: [[f64; 2]; 2],
    pub converged: bool,
    /// Smallest and largest pixel mean used, meters.
    pub data_range: (f64, f64),
    pub n: usize,
}

impl PowerLawFit {
    pub fn model(&self) -> PowerLawModel {
        PowerLawModel {
            k: self.k,
            lambda: self.lambda,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Search bracket for lambda.
    pub bracket: (f64, f64),
    /// Width of the final lambda bracket.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bracket: (0.0, 5.0),
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Closed-form maximizer of the likelihood in `k` for fixed `lambda`.
pub fn k_given_lambda(input: &FitInput, lambda: f64) -> Result<f64> {
    let [s0, _, _] = input.weighted_sums(lambda);
    k_from_sum(s0, input.len())
}

fn k_from_sum(s0: f64, n: usize) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::DegenerateData(
            "all residuals are zero; the likelihood is unbounded".into(),
        ));
    }
    Ok((s0 / n as f64).sqrt())
}

/// Derivative of the log-likelihood in `lambda`, with `k = k(lambda)`.
pub fn lambda_score(input: &FitInput, lambda: f64) -> Result<f64> {
    let [s0, s1, _] = input.weighted_sums(lambda);
    k_from_sum(s0, input.len())?;
    Ok(input.len() as f64 * s1 / s0 - input.sum_log_means())
}

pub fn log_likelihood(input: &FitInput, k: f64, lambda: f64) -> Result<f64> {
    check_k(k)?;
    let [s0, _, _] = input.weighted_sums(lambda);
    let n = input.len() as f64;
    Ok(-n * (LN_SQRT_2PI + k.ln()) - lambda * input.sum_log_means() - s0 / (2.0 * k * k))
}

/// Analytic Hessian of the log-likelihood in `(k, lambda)`.
pub fn hessian_at(input: &FitInput, k: f64, lambda: f64) -> Result<[[f64; 2]; 2]> {
    check_k(k)?;
    let [s0, s1, s2] = input.weighted_sums(lambda);
    let n = input.len() as f64;
    let k2 = k * k;
    let hkk = n / k2 - 3.0 * s0 / (k2 * k2);
    let hkl = -2.0 * s1 / (k2 * k);
    let hll = -2.0 * s2 / k2;
    Ok([[hkk, hkl], [hkl, hll]])
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("k must be positive, got {k}")));
    }
    Ok(())
}

pub fn fit(input: &FitInput) -> Result<PowerLawFit> {
    fit_with(input, &FitOptions::default())
}

pub fn fit_with(input: &FitInput, opts: &FitOptions) -> Result<PowerLawFit> {
    let (lo, hi) = opts.bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("invalid lambda bracket [{lo}, {hi}]")));
    }
    let first = input.pairs[0].mean;
    if input.pairs.iter().all(|p| p.mean == first) {
        return Err(Error::DegenerateData(
            "all pixel means are equal; lambda is not identifiable".into(),
        ));
    }
    if input.pairs.iter().all(|p| p.residual() == 0.0) {
        return Err(Error::DegenerateData("all residuals are zero".into()));
    }

    let score_lo = lambda_score(input, lo)?;
    let score_hi = lambda_score(input, hi)?;
    if score_lo != 0.0 && score_hi != 0.0 && score_lo.signum() == score_hi.signum() {
        return Err(Error::NoRoot {
            lo,
            hi,
            score_lo,
            score_hi,
        });
    }
    let (lambda, converged) = brent(
        |l| lambda_score(input, l).unwrap_or(f64::NAN),
        lo,
        hi,
        opts.tol,
        opts.max_iter,
    );
    let k = k_given_lambda(input, lambda)?;
    let hessian = hessian_at(input, k, lambda)?;

    // observed information
    let (a, b, d) = (-hessian[0][0], -hessian[0][1], -hessian[1][1]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (eig_lo, eig_hi) = (mid - rad, mid + rad);
    if !(eig_lo > 0.0) {
        return Err(Error::Saddle(eig_lo, eig_hi));
    }
    let det = a * d - b * b;
    let var_k = d / det;
    let var_lambda = a / det;

    Ok(PowerLawFit {
        k,
        lambda,
        se_k: var_k.sqrt(),
        se_lambda: var_lambda.sqrt(),
        log_likelihood: log_likelihood(input, k, lambda)?,
        hessian,
        converged,
        data_range: input.data_range(),
        n: input.len(),
    })
}
