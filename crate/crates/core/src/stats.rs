//! Pixelwise means, balanced subsampling, range binning and kurtosis.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::RangePair;
use crate::model::PowerLawModel;
use crate::sim::{derive_seed, RangeSample};

/// Bins with fewer samples report no kurtosis.
pub const KURTOSIS_MIN_SAMPLES: usize = 100;
pub const DEFAULT_BIN_WIDTH: f64 = 0.25;
pub const DEFAULT_PER_GROUP: usize = 200;
pub const DEFAULT_FLAT_TOTAL: usize = 5000;

/// A range value counts as a measurement only when positive and finite.
#[inline]
pub fn is_valid_range(z: f64) -> bool {
    z > 0.0 && z.is_finite()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelSeries {
    /// Row-major pixel index.
    pub pixel: usize,
    pub values: Vec<f64>,
    pub mean: f64,
}

/// Running per-pixel sums over a stream of equally sized frames.
#[derive(Clone, Debug)]
pub struct PixelMeanAccumulator {
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl PixelMeanAccumulator {
    pub fn new(pixels: usize) -> Self {
        PixelMeanAccumulator {
            sum: vec![0.0; pixels],
            count: vec![0; pixels],
        }
    }

    pub fn push(&mut self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.sum.len() {
            return Err(Error::Format(format!(
                "frame has {} pixels, expected {}",
                frame.len(),
                self.sum.len()
            )));
        }
        for ((s, c), &z) in self.sum.iter_mut().zip(&mut self.count).zip(frame) {
            if is_valid_range(z) {
                *s += z;
                *c += 1;
            }
        }
        Ok(())
    }

    /// Mean of each pixel, `None` for pixels without a valid measurement.
    pub fn means(&self) -> Vec<Option<f64>> {
        self.sum
            .iter()
            .zip(&self.count)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    pub fn counts(&self) -> &[u32] {
        &self.count
    }
}

/// Per-pixel series over a frame stack. Pixels never validly measured are
/// left out.
pub fn pixelwise_means<F: AsRef<[f64]>>(frames: &[F]) -> Result<Vec<PixelSeries>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Format("pixelwise means need at least one frame".into()))?;
    let pixels = first.as_ref().len();
    let mut acc = PixelMeanAccumulator::new(pixels);
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); pixels];
    for f in frames {
        acc.push(f.as_ref())?;
        for (v, &z) in values.iter_mut().zip(f.as_ref()) {
            if is_valid_range(z) {
                v.push(z);
            }
        }
    }
    Ok(acc
        .means()
        .into_iter()
        .zip(values)
        .enumerate()
        .filter_map(|(pixel, (mean, values))| mean.map(|mean| PixelSeries { pixel, values, mean }))
        .collect())
}

/// `(z, zbar)` pairs for every valid sample, with `zbar` the mean of the
/// sample's pixel. Order follows the input.
pub fn pairs_from_samples(samples: &[RangeSample]) -> Vec<RangePair> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.is_valid()) {
        let e = acc.entry(s.pixel).or_default();
        e.0 += s.z.unwrap();
        e.1 += 1;
    }
    samples
        .iter()
        .filter(|s| s.is_valid())
        .map(|s| {
            let (sum, n) = acc[&s.pixel];
            RangePair::new(s.z.unwrap(), sum / n as f64)
        })
        .collect()
}

/// How pairs are grouped before balanced sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GroupingStrategy {
    /// One group per capture distance.
    #[default]
    NominalDistance,
    /// Groups are range windows of the given width over pixel means.
    PixelMean { width: f64 },
}

/// Regroups pairs into `[n w, (n + 1) w)` windows of their pixel mean.
pub fn group_by_mean(pairs: impl IntoIterator<Item = RangePair>, width: f64) -> Vec<Vec<RangePair>> {
    let mut groups: BTreeMap<i64, Vec<RangePair>> = BTreeMap::new();
    for p in pairs {
        groups.entry((p.mean / width).floor() as i64).or_default().push(p);
    }
    groups.into_values().collect()
}

/// Sorted subsample indices for each group: `per_group` drawn uniformly
/// without replacement, or the whole group when it is smaller.
pub fn balanced_indices(group_sizes: &[usize], per_group: usize, seed: u64) -> Vec<Vec<usize>> {
    group_sizes
        .iter()
        .enumerate()
        .map(|(g, &size)| {
            if size <= per_group {
                return (0..size).collect();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xba1a, g as u64));
            let mut idx = index::sample(&mut rng, size, per_group).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalancedSample {
    pub pairs: Vec<RangePair>,
    /// Groups that had fewer than the requested number of pairs.
    pub short_groups: usize,
}

pub fn balanced_sample(groups: &[Vec<RangePair>], per_group: usize, seed: u64) -> Result<BalancedSample> {
    if groups.iter().all(|g| g.is_empty()) {
        return Err(Error::Format("balanced sampling of an empty data set".into()));
    }
    if per_group < 1 {
        return Err(Error::Domain("per-group sample count must be at least 1".into()));
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let picks = balanced_indices(&sizes, per_group, seed);
    let short_groups = sizes.iter().filter(|&&s| s < per_group).count();
    let pairs = groups
        .iter()
        .zip(picks)
        .flat_map(|(g, idx)| idx.into_iter().map(move |i| g[i]))
        .collect();
    Ok(BalancedSample { pairs, short_groups })
}

/// Flat subsample of `total` pairs from the whole data set.
pub fn flat_sample(pairs: &[RangePair], total: usize, seed: u64) -> Result<Vec<RangePair>> {
    if pairs.is_empty() {
        return Err(Error::Format("sampling an empty data set".into()));
    }
    let idx = &balanced_indices(&[pairs.len()], total, seed)[0];
    Ok(idx.iter().map(|&i| pairs[i]).collect())
}

/// Mean of `((z - zbar) / sigma)^4` with `sigma` the model range error at
/// each sample's pixel mean.
pub fn kurtosis(residuals: &[f64], sigmas: &[f64]) -> Result<f64> {
    if residuals.len() != sigmas.len() {
        return Err(Error::Domain("residuals and sigmas differ in length".into()));
    }
    if residuals.len() < KURTOSIS_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            have: residuals.len(),
            need: KURTOSIS_MIN_SAMPLES,
        });
    }
    let s: f64 = residuals
        .iter()
        .zip(sigmas)
        .map(|(r, s)| {
            let u = r / s;
            let u2 = u * u;
            u2 * u2
        })
        .sum();
    Ok(s / residuals.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` when the bin holds fewer than [`KURTOSIS_MIN_SAMPLES`].
    pub kurtosis: Option<f64>,
}

impl BinStats {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bins `[n w, (n + 1) w)` by pixel mean, from the bin at zero up to the
/// last occupied bin. Kurtosis is normalized by `model`.
pub fn bin_by_range(pairs: &[RangePair], width: f64, model: &PowerLawModel) -> Result<Vec<BinStats>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain(format!("bin width must be positive, got {width}")));
    }
    let mut bins: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for p in pairs {
        if !(p.mean >= 0.0) || !p.mean.is_finite() {
            continue;
        }
        let b = (p.mean / width).floor() as usize;
        if bins.len() <= b {
            bins.resize_with(b + 1, Default::default);
        }
        bins[b].0.push(p.residual());
        bins[b].1.push(model.sigma_z(p.mean));
    }
    Ok(bins
        .into_iter()
        .enumerate()
        .map(|(i, (r, s))| BinStats {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count: r.len(),
            kurtosis: kurtosis(&r, &s).ok(),
        })
        .collect())
}
