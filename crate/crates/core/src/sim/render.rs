use rand::Rng;

use super::pattern::{cubic_at, ScanlinePattern};
use crate::error::{Error, Result};
use crate::radiometry::{sample_shot, Approximation, IlluminationModel, GAUSSIAN_APPROX_MIN_RATE};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShotNoise {
    /// Noise-free images.
    Off,
    #[default]
    Poisson,
    Gaussian,
}

impl ShotNoise {
    fn approximation(self) -> Option<Approximation> {
        match self {
            ShotNoise::Off => None,
            ShotNoise::Poisson => Some(Approximation::ExactPoisson),
            ShotNoise::Gaussian => Some(Approximation::GaussianApprox),
        }
    }
}

/// Renders the left/right scanlines observed at range `z`.
///
/// `left[x] = I(x) + n_l(x)` and `right[x] = I(x + d) + n_r(x)`, where the
/// pattern is scaled by the illumination model's intensity at `z`, the shift
/// is evaluated with cubic interpolation and the two noise fields are
/// independent. Right-image positions beyond the pattern ends are clamped.
pub fn render_noisy_pair<R: Rng + ?Sized>(
    pattern: &ScanlinePattern,
    illum: &IlluminationModel,
    z: f64,
    d_true: f64,
    noise: ShotNoise,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {z}")));
    }
    let n = pattern.len();
    if !d_true.is_finite() || d_true.abs() > n as f64 - 4.0 {
        return Err(Error::Geometry(format!(
            "disparity {d_true} px does not fit a {n} px scanline"
        )));
    }
    let scale = illum.intensity_at_range(z);
    let p = pattern.samples();
    let lo = 1.0;
    let hi = n as f64 - 3.0;

    let mut left: Vec<f64> = p.iter().map(|v| scale * v).collect();
    let mut right: Vec<f64> = (0..n)
        .map(|m| {
            let x = (m as f64 + d_true).clamp(lo, hi);
            scale * cubic_at(p, x).expect("clamped into support")
        })
        .collect();

    if let Some(approx) = noise.approximation() {
        if approx == Approximation::GaussianApprox {
            let min = left.iter().chain(&right).copied().fold(f64::INFINITY, f64::min);
            if min < GAUSSIAN_APPROX_MIN_RATE {
                return Err(Error::ApproximationDomain {
                    rate: min,
                    threshold: GAUSSIAN_APPROX_MIN_RATE,
                });
            }
        }
        for v in left.iter_mut().chain(right.iter_mut()) {
            *v = if *v > 0.0 { sample_shot(*v, approx, rng) } else { 0.0 };
        }
    }
    Ok((left, right))
}
