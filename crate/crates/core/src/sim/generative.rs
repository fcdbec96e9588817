use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::RangeSample;
use crate::error::{Error, Result};
use crate::model::PowerLawModel;

/// Draws `n_per_range` samples `z ~ N(Z, (k Z^lambda)^2)` for every true
/// range. Range `i` is reported as pixel `i`; draw `j` as frame `j`.
pub fn sample_generative<R: Rng + ?Sized>(
    model: &PowerLawModel,
    true_ranges: &[f64],
    n_per_range: usize,
    rng: &mut R,
) -> Result<Vec<RangeSample>> {
    if n_per_range < 1 {
        return Err(Error::Domain("need at least one sample per range".into()));
    }
    if let Some(z) = true_ranges.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
        return Err(Error::Domain(format!("true ranges must be positive, got {z}")));
    }
    let mut out = Vec::with_capacity(true_ranges.len() * n_per_range);
    for (pixel, &z) in true_ranges.iter().enumerate() {
        let sigma = model.sigma_z(z);
        for frame in 0..n_per_range {
            let e: f64 = StandardNormal.sample(rng);
            out.push(RangeSample {
                pixel,
                frame,
                z: Some(z + sigma * e),
            });
        }
    }
    Ok(out)
}
