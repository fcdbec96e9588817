use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternKind {
    /// Low-pass filtered random texture, like a projected speckle pattern.
    Speckle,
    /// Deterministic smooth profile such as a ramp.
    SmoothTexture,
}

/// Noise-free relative intensity profile `I(x)` along one scanline.
///
/// Values are relative to the mean illumination level and are multiplied by
/// the pixel intensity of the illumination model when rendered.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanlinePattern {
    samples: Vec<f64>,
    kind: PatternKind,
}

/// Intensity floor of generated speckle, relative to the mean.
const SPECKLE_MIN: f64 = 0.05;

impl ScanlinePattern {
    pub fn from_samples(samples: Vec<f64>, kind: PatternKind) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::Domain("scanline needs at least 4 samples".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "pattern intensity must be nonnegative, got {bad}"
            )));
        }
        Ok(ScanlinePattern { samples, kind })
    }

    /// Uniform noise smoothed by a Gaussian of standard deviation
    /// `correlation_length / 2`, normalized to unit mean and relative
    /// standard deviation `contrast`.
    pub fn speckle(len: usize, correlation_length: f64, contrast: f64, seed: u64) -> Result<Self> {
        if !(correlation_length > 0.0) || !(contrast > 0.0) {
            return Err(Error::Domain(
                "speckle needs positive correlation length and contrast".into(),
            ));
        }
        let sigma = correlation_length / 2.0;
        let radius = (3.0 * sigma).ceil() as usize;
        let kernel: Vec<f64> = {
            let raw: Vec<f64> = (0..=2 * radius)
                .map(|i| {
                    let t = i as f64 - radius as f64;
                    (-0.5 * t * t / (sigma * sigma)).exp()
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / s).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..len + 2 * radius).map(|_| rng.random::<f64>()).collect();
        let smooth: Vec<f64> = (0..len)
            .map(|i| kernel.iter().zip(&noise[i..]).map(|(w, x)| w * x).sum())
            .collect();
        let n = len as f64;
        let mean = smooth.iter().sum::<f64>() / n;
        let sd = (smooth.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Domain("degenerate speckle realization".into()));
        }
        let samples = smooth
            .iter()
            .map(|x| (1.0 + contrast * (x - mean) / sd).max(SPECKLE_MIN))
            .collect();
        let pattern = ScanlinePattern {
            samples,
            kind: PatternKind::Speckle,
        };
        let half = correlation_length.ceil() as usize;
        let g = pattern.central_gradient();
        for c in half + 1..len.saturating_sub(half + 1) {
            if g[c - half..=c + half].iter().all(|v| *v == 0.0) {
                return Err(Error::Domain(format!("speckle is flat around pixel {c}")));
            }
        }
        Ok(pattern)
    }

    /// Linear ramp `start + slope * x`.
    pub fn ramp(len: usize, start: f64, slope: f64) -> Result<Self> {
        Self::from_samples(
            (0..len).map(|i| start + slope * i as f64).collect(),
            PatternKind::SmoothTexture,
        )
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Intensity at a subpixel position, or `None` outside the cubic support.
    pub fn sample_at(&self, x: f64) -> Option<f64> {
        cubic_at(&self.samples, x)
    }

    /// Central-difference gradient; one-sided at the two ends.
    pub fn central_gradient(&self) -> Vec<f64> {
        central_gradient(&self.samples)
    }
}

pub(crate) fn central_gradient(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut g = vec![0.0; n];
    if n < 2 {
        return g;
    }
    g[0] = v[1] - v[0];
    g[n - 1] = v[n - 1] - v[n - 2];
    for i in 1..n - 1 {
        g[i] = 0.5 * (v[i + 1] - v[i - 1]);
    }
    g
}

/// Catmull-Rom interpolation of `v` at `x`. Requires the four neighbors
/// `floor(x) - 1 ..= floor(x) + 2` to exist. Reproduces linear signals
/// exactly and returns the sample itself at integer positions.
pub fn cubic_at(v: &[f64], x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let base = x.floor();
    let i = base as isize;
    if i < 1 || i + 2 >= v.len() as isize {
        return None;
    }
    let i = i as usize;
    let t = x - base;
    if t == 0.0 {
        return Some(v[i]);
    }
    let (p0, p1, p2, p3) = (v[i - 1], v[i], v[i + 1], v[i + 2]);
    let t2 = t * t;
    let t3 = t2 * t;
    Some(
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_linear_and_nodes() {
        let v: Vec<f64> = (0..10).map(|i| 3.0 + 0.5 * i as f64).collect();
        for x in [1.0, 1.25, 4.5, 6.999] {
            assert!((cubic_at(&v, x).unwrap() - (3.0 + 0.5 * x)).abs() < 1e-12);
        }
        let w = [1.0, 7.0, -2.0, 4.0, 9.0];
        assert_eq!(cubic_at(&w, 2.0), Some(-2.0));
        assert_eq!(cubic_at(&w, 0.5), None);
        assert_eq!(cubic_at(&w, 3.0), None);
    }

    #[test]
    fn speckle_statistics() {
        let p = ScanlinePattern::speckle(4096, 3.0, 0.3, 5).unwrap();
        assert_eq!(p.kind(), PatternKind::Speckle);
        let s = p.samples();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
        assert!(s.iter().all(|v| *v >= SPECKLE_MIN));
        assert_eq!(p, ScanlinePattern::speckle(4096, 3.0, 0.3, 5).unwrap());
    }

    #[test]
    fn rejects_negative_intensity() {
        assert!(ScanlinePattern::from_samples(vec![1.0, -1.0, 2.0, 3.0], PatternKind::Speckle).is_err());
        assert!(ScanlinePattern::ramp(3, 1.0, 1.0).is_err());
    }
}
