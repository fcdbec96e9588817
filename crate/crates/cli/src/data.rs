//! Turns a dataset on disk into `(z, zbar)` pairs following the capture
//! protocol: pixelwise means, then balanced subsampling per group.
//!
//! Frames are streamed twice (means, then selection) so memory stays at a
//! few values per pixel regardless of the frame count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;

use sha2::{Digest, Sha256};
use stereo_noise::ingest::{Dataset, ExperimentKind};
use stereo_noise::stats::{balanced_indices, is_valid_range, GroupingStrategy, PixelMeanAccumulator};
use stereo_noise::{Error, RangePair};

use crate::config::Analysis;
use crate::error::{CliError, Context, Result};

#[derive(Clone, Debug)]
pub struct Sampled {
    pub pairs: Vec<RangePair>,
    /// Nominal distance of the capture each pair came from.
    pub distances: Vec<Option<f64>>,
    pub groups: usize,
    pub short_groups: usize,
    pub valid_samples: usize,
}

impl Sampled {
    /// Pairs whose pixel mean lies in `[lo, hi]`, with their distances.
    pub fn within(&self, (lo, hi): (f64, f64)) -> (Vec<RangePair>, Vec<Option<f64>>) {
        self.pairs
            .iter()
            .zip(&self.distances)
            .filter(|(p, _)| p.mean >= lo && p.mean <= hi)
            .map(|(p, d)| (*p, *d))
            .unzip()
    }
}

/// Pixel means and valid-sample counts of one capture.
type CaptureMeans = (Vec<Option<f64>>, Vec<u32>);

fn capture_means(ds: &Dataset) -> Result<Vec<CaptureMeans>> {
    let m = ds.manifest();
    (0..m.captures.len())
        .map(|c| {
            let mut acc = PixelMeanAccumulator::new(m.pixels());
            for f in 0..m.captures[c].frame_count {
                let frame = ds.frame_meters(c, f).context(|| format!("capture {c}, frame {f}"))?;
                acc.push(&frame).context(|| format!("capture {c}, frame {f}"))?;
            }
            Ok((acc.means(), acc.counts().to_vec()))
        })
        .collect()
}

enum Groups {
    /// All valid samples form one pool.
    Flat,
    PerCapture,
    ByMean(f64),
}

pub fn sample_pairs(ds: &Dataset, cfg: &Analysis) -> Result<Sampled> {
    let m = ds.manifest();
    let has_distances = m.captures.iter().all(|c| c.nominal_distance.is_some());
    let scheme = match (m.experiment_kind, cfg.grouping) {
        (_, GroupingStrategy::PixelMean { width }) => Groups::ByMean(width),
        (ExperimentKind::Tilted, _) => Groups::Flat,
        (_, GroupingStrategy::NominalDistance) if has_distances => Groups::PerCapture,
        _ => Groups::Flat,
    };
    let means = capture_means(ds)?;

    // group id of every pixel of every capture
    let mut keys: BTreeMap<i64, usize> = BTreeMap::new();
    let pixel_group: Vec<Vec<Option<usize>>> = means
        .iter()
        .enumerate()
        .map(|(c, (mu, _))| {
            mu.iter()
                .map(|mean| {
                    let mean = (*mean)?;
                    let key = match scheme {
                        Groups::Flat => 0,
                        Groups::PerCapture => c as i64,
                        Groups::ByMean(w) => (mean / w).floor() as i64,
                    };
                    let next = keys.len();
                    Some(*keys.entry(key).or_insert(next))
                })
                .collect()
        })
        .collect();
    // renumber groups in key order so selection does not depend on scan order
    let rank: BTreeMap<usize, usize> = keys.values().enumerate().map(|(r, &g)| (g, r)).collect();
    let ngroups = keys.len();

    let mut sizes = vec![0usize; ngroups];
    for ((_, counts), groups) in means.iter().zip(&pixel_group) {
        for (n, g) in counts.iter().zip(groups) {
            if let Some(g) = g {
                sizes[rank[g]] += *n as usize;
            }
        }
    }
    let valid_samples: usize = sizes.iter().sum();
    if valid_samples == 0 {
        return Err(CliError::Core {
            context: format!("dataset {}", ds.root().display()),
            source: Error::Format("no valid range measurements".into()),
        });
    }
    let per_group = if matches!(scheme, Groups::Flat) {
        cfg.flat_total
    } else {
        cfg.per_group
    };
    let picks = balanced_indices(&sizes, per_group, cfg.seed);
    let short_groups = sizes.iter().filter(|&&s| s < per_group).count();
    if short_groups > 0 {
        log::warn!("{short_groups} of {ngroups} groups have fewer than {per_group} samples and are used whole");
    }

    let mut cursor = vec![0usize; ngroups];
    let mut next = vec![0usize; ngroups];
    let mut pairs = Vec::with_capacity(picks.iter().map(Vec::len).sum());
    let mut distances = Vec::with_capacity(pairs.capacity());
    for (c, ((mu, _), groups)) in means.iter().zip(&pixel_group).enumerate() {
        let distance = m.captures[c].nominal_distance;
        for f in 0..m.captures[c].frame_count {
            let frame = ds.frame_meters(c, f).context(|| format!("capture {c}, frame {f}"))?;
            for ((z, mean), g) in frame.iter().zip(mu).zip(groups) {
                let (Some(mean), Some(g)) = (mean, g) else { continue };
                if !is_valid_range(*z) {
                    continue;
                }
                let g = rank[g];
                if picks[g].get(next[g]) == Some(&cursor[g]) {
                    pairs.push(RangePair::new(*z, *mean));
                    distances.push(distance);
                    next[g] += 1;
                }
                cursor[g] += 1;
            }
        }
    }
    log::info!(
        "sampled {} of {valid_samples} valid measurements from {ngroups} groups",
        pairs.len()
    );
    Ok(Sampled {
        pairs,
        distances,
        groups: ngroups,
        short_groups,
        valid_samples,
    })
}

/// SHA-256 over the manifest bytes followed by every frame file in order.
pub fn dataset_digest(ds: &Dataset) -> Result<String> {
    let mut h = Sha256::new();
    let mut feed = |path: std::path::PathBuf| -> Result<()> {
        let mut file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let mut buf = [0u8; 1 << 16];
        loop {
            let n = file.read(&mut buf).map_err(|e| CliError::io(&path, e))?;
            if n == 0 {
                return Ok(());
            }
            h.update(&buf[..n]);
        }
    };
    feed(ds.manifest_path())?;
    for (c, f) in ds.frame_ids() {
        feed(ds.frame_path(c, f))?;
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
