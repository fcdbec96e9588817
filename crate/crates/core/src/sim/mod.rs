//! Monte Carlo engines: an image-level scanline stereo simulator and a
//! direct sampler of the heteroscedastic range-measurement model.

mod generative;
mod matcher;
mod pattern;
mod pipeline;
mod render;

pub use generative::sample_generative;
pub use matcher::{
    estimate_disparity, estimate_disparity_with, predicted_disparity_variance, CorrelationWindow, MatchOptions,
};
pub use pattern::{cubic_at, PatternKind, ScanlinePattern};
pub use pipeline::{run_pipeline, run_pipeline_with, run_sweep, PipelineOutput, ScanlineLayout, SimRun};
pub use render::{render_noisy_pair, ShotNoise};

use serde::{Deserialize, Serialize};

/// One range measurement of one pixel in one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    /// Row-major pixel index within the frame.
    pub pixel: usize,
    pub frame: usize,
    /// Measured range in meters; `None` when matching failed.
    pub z: Option<f64>,
}

impl RangeSample {
    pub fn is_valid(&self) -> bool {
        matches!(self.z, Some(z) if z > 0.0 && z.is_finite())
    }
}

/// Derives an independent 64-bit seed for item `index` of `stream`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut x = master ^ splitmix(stream.wrapping_add(0x51_7c_c1_b7_27_22_0a_95));
    x = splitmix(x ^ splitmix(index));
    splitmix(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
