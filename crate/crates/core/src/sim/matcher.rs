//! Windowed subpixel disparity estimation.
//!
//! The reference window sits on fixed left-image pixels. An integer SSD
//! search picks the best whole-pixel disparity, then Gauss-Newton steps on
//! the linearized intensity model refine it. The first step is the classic
//! Taylor-linearized ML estimate whose error variance is `sigma^2 / sum I'^2`;
//! further steps re-linearize at the current estimate so that noise-free
//! pairs are matched to solver precision.

use super::pattern::{central_gradient, cubic_at};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationWindow {
    /// Left-image pixel at the window center.
    pub center: usize,
    pub half_width: usize,
    /// Offsets `-half_width ..= half_width`.
    pub positions: Vec<isize>,
}

impl CorrelationWindow {
    pub fn new(center: usize, half_width: usize) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::Domain("correlation window half width must be at least 1".into()));
        }
        if center < half_width {
            return Err(Error::Domain(format!(
                "window of half width {half_width} at pixel {center} leaves the scanline"
            )));
        }
        let h = half_width as isize;
        Ok(CorrelationWindow {
            center,
            half_width,
            positions: (-h..=h).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Left-image pixels covered by the window.
    pub fn pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions.iter().map(|o| (self.center as isize + o) as usize)
    }

    /// Checks that the window and its interpolation margin fit `len` pixels.
    pub fn fits(&self, len: usize) -> bool {
        self.center >= self.half_width + 2 && self.center + self.half_width + 3 < len
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchOptions {
    /// Integer candidates `round(d_init) +- search_radius` are scanned.
    pub search_radius: usize,
    pub max_iterations: usize,
    /// Refinement stops once a step is smaller than this (pixels).
    pub step_tolerance: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            search_radius: 3,
            max_iterations: 20,
            step_tolerance: 1e-10,
        }
    }
}

/// Predicted variance of the disparity estimate, `sigma_sq / sum(g^2)`,
/// where `sigma_sq` is the summed left and right noise variance.
pub fn predicted_disparity_variance(sigma_sq: f64, gradients: &[f64]) -> Result<f64> {
    let energy: f64 = gradients.iter().map(|g| g * g).sum();
    if !(energy > 0.0) {
        return Err(Error::Domain("zero gradient energy in the correlation window".into()));
    }
    Ok(sigma_sq / energy)
}

pub fn estimate_disparity(left: &[f64], right: &[f64], window: &CorrelationWindow, d_init: f64) -> Result<f64> {
    estimate_disparity_with(left, right, window, d_init, &MatchOptions::default())
}

/// Disparity `d` such that `right[m] ~ left[m + d]` over the window.
pub fn estimate_disparity_with(
    left: &[f64],
    right: &[f64],
    window: &CorrelationWindow,
    d_init: f64,
    opts: &MatchOptions,
) -> Result<f64> {
    if left.len() != right.len() {
        return Err(Error::Match("left and right scanlines differ in length".into()));
    }
    if !window.fits(left.len()) {
        return Err(Error::Match(format!(
            "window at pixel {} does not fit a {} px scanline",
            window.center,
            left.len()
        )));
    }
    if !d_init.is_finite() {
        return Err(Error::Match("non-finite initial disparity".into()));
    }
    let grad = central_gradient(left);
    if window.pixels().all(|x| grad[x] == 0.0) {
        return Err(Error::Match(format!("textureless window at pixel {}", window.center)));
    }

    let d0 = integer_search(left, right, window, d_init.round() as isize, opts.search_radius)?;

    let mut d = d0 as f64;
    for _ in 0..opts.max_iterations {
        let (mut num, mut den) = (0.0, 0.0);
        for &o in &window.positions {
            let m = window.center as isize + o - d0;
            let x = m as f64 + d;
            let (Some(l), Some(g)) = (cubic_at(left, x), cubic_at(&grad, x)) else {
                return Err(Error::Match(format!("refinement left the scanline at x = {x}")));
            };
            num += g * (right[m as usize] - l);
            den += g * g;
        }
        if !(den > 0.0) {
            return Err(Error::Match(format!("textureless window at pixel {}", window.center)));
        }
        let step = num / den;
        d += step;
        if (d - d0 as f64).abs() > 1.0 {
            return Err(Error::Match(format!(
                "refinement diverged to {d} px from integer match {d0}"
            )));
        }
        if step.abs() < opts.step_tolerance {
            break;
        }
    }
    Ok(d)
}

fn integer_search(
    left: &[f64],
    right: &[f64],
    window: &CorrelationWindow,
    around: isize,
    radius: usize,
) -> Result<isize> {
    let n = left.len() as isize;
    let r = radius as isize;
    let h = window.half_width as isize;
    let c = window.center as isize;
    let mut best: Option<(f64, isize)> = None;
    for cand in around - r..=around + r {
        // right pixels c + o - cand need a one-pixel margin for the refinement
        if c - h - cand < 0 || c + h - cand >= n {
            continue;
        }
        let ssd: f64 = window
            .positions
            .iter()
            .map(|&o| {
                let e = right[(c + o - cand) as usize] - left[(c + o) as usize];
                e * e
            })
            .sum();
        if best.is_none_or(|(b, _)| ssd < b) {
            best = Some((ssd, cand));
        }
    }
    best.map(|(_, d)| d)
        .ok_or_else(|| Error::Match(format!("no disparity candidate near {around} fits the scanline")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiometry::IlluminationModel;
    use crate::sim::{render_noisy_pair, ScanlinePattern, ShotNoise};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless(pattern: &ScanlinePattern, d: f64) -> (Vec<f64>, Vec<f64>) {
        let il = IlluminationModel::passive(1000.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        render_noisy_pair(pattern, &il, 1.0, d, ShotNoise::Off, &mut rng).unwrap()
    }

    #[test]
    fn predicted_variance_examples() {
        assert_eq!(predicted_disparity_variance(4.0, &[1.0; 4]).unwrap(), 1.0);
        let g = [0.3, -1.2, 2.0, 0.7];
        let g2: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
        let a = predicted_disparity_variance(1.7, &g).unwrap();
        let b = predicted_disparity_variance(1.7, &g2).unwrap();
        assert!((b - a / 4.0).abs() < 1e-15);
        assert!(predicted_disparity_variance(1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn active_scaling_of_predicted_variance() {
        let g0 = [3.0, -1.0, 4.0, 1.5, -5.0, 9.0];
        let s0 = 2.6;
        let base = predicted_disparity_variance(s0, &g0).unwrap();
        for q in [1.5f64, 2.0, 3.0] {
            let gq: Vec<f64> = g0.iter().map(|g| g * q.powi(-2)).collect();
            let v = predicted_disparity_variance(s0 * q.powi(-2), &gq).unwrap();
            assert!((v / (base * q * q) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_subpixel_shift_is_exact() {
        let p = ScanlinePattern::ramp(64, 5.0, 1.5).unwrap();
        let (l, r) = noiseless(&p, 2.25);
        let w = CorrelationWindow::new(30, 5).unwrap();
        let d = estimate_disparity(&l, &r, &w, 2.0).unwrap();
        assert!((d - 2.25).abs() < 1e-3, "{d}");
        let (l, r) = noiseless(&p, 0.0);
        assert!(estimate_disparity(&l, &r, &w, 0.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn speckle_noiseless_recovery() {
        let p = ScanlinePattern::speckle(160, 3.0, 0.3, 77).unwrap();
        let w = CorrelationWindow::new(100, 7).unwrap();
        for d in [0.0, 3.4, 10.5, 17.83, 41.01] {
            let (l, r) = noiseless(&p, d);
            let est = estimate_disparity(&l, &r, &w, d.round() + 1.0).unwrap();
            assert!((est - d).abs() < 1e-3, "d = {d}: {est}");
        }
    }

    #[test]
    fn textureless_window_fails() {
        let flat = vec![100.0; 64];
        let w = CorrelationWindow::new(30, 4).unwrap();
        assert!(matches!(
            estimate_disparity(&flat, &flat, &w, 2.0),
            Err(Error::Match(_))
        ));
    }

    #[test]
    fn window_must_fit() {
        assert!(CorrelationWindow::new(30, 0).is_err());
        let w = CorrelationWindow::new(60, 5).unwrap();
        let v: Vec<f64> = (0..64).map(|i| i as f64).collect();
        assert!(matches!(estimate_disparity(&v, &v, &w, 0.0), Err(Error::Match(_))));
    }
}
