//! Range-error modeling for passive and active stereo depth sensors.
//!
//! Shot-noise-limited stereo has a range error that grows as `Z^2` when the
//! scene is lit by ambient light and as `Z^3` when the sensor carries its own
//! illuminator. This crate provides the radiometric and geometric model,
//! Monte Carlo simulators that reproduce both laws, and a maximum-likelihood
//! estimator for the general law `sigma_Z = k * Z^lambda` with Cramér-Rao
//! standard errors.
//!
//! The `parallel` feature (on by default) runs Monte Carlo trials and
//! likelihood sums on rayon; all results are bit-identical to the
//! sequential path.

pub mod error;
pub mod estimator;
pub mod ingest;
pub mod model;
pub mod par;
pub mod radiometry;
mod roots;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{fit, fit_with, FitInput, FitOptions, PowerLawFit, RangePair};
pub use model::{BaselineKind, BaselineModel, PowerLawModel, StereoRig};
pub use par::Execution;
pub use radiometry::{IlluminationMode, IlluminationModel, NoiseFloor};
