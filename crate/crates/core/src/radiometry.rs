//! Range-dependent irradiance and photon shot noise.
//!
//! Intensities are linear photon-count proxies: exposure, gain and surface
//! reflectance are folded into the intensity at the control range.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest rate for which the normal approximation of the Poisson law is
/// accepted. Skewness of Poisson(20) is 1/sqrt(20) ~ 0.22.
pub const GAUSSIAN_APPROX_MIN_RATE: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IlluminationMode {
    /// Ambient light; pixel irradiance does not depend on range.
    Passive,
    /// Illuminator co-located with the cameras; irradiance falls as Z^-2.
    Active,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlluminationModel {
    pub mode: IlluminationMode,
    /// Mean pixel intensity at the control range.
    pub intensity_at_control: f64,
    /// Control range Z0 in meters.
    pub control_range: f64,
}

impl IlluminationModel {
    pub fn new(mode: IlluminationMode, intensity_at_control: f64, control_range: f64) -> Result<Self> {
        if !(intensity_at_control > 0.0 && intensity_at_control.is_finite()) {
            return Err(Error::Domain(format!(
                "intensity at control range must be positive, got {intensity_at_control}"
            )));
        }
        if !(control_range > 0.0 && control_range.is_finite()) {
            return Err(Error::Domain(format!(
                "control range must be positive, got {control_range}"
            )));
        }
        Ok(IlluminationModel {
            mode,
            intensity_at_control,
            control_range,
        })
    }

    pub fn passive(intensity_at_control: f64, control_range: f64) -> Result<Self> {
        Self::new(IlluminationMode::Passive, intensity_at_control, control_range)
    }

    pub fn active(intensity_at_control: f64, control_range: f64) -> Result<Self> {
        Self::new(IlluminationMode::Active, intensity_at_control, control_range)
    }

    /// Pixel flux at range `z` relative to the flux at the control range.
    ///
    /// The per-patch flux reaching the aperture scales as (Z/Z0)^-2 (passive)
    /// or (Z/Z0)^-4 (active), while the patch area imaged by one pixel grows
    /// as (Z/Z0)^2, leaving 1 and (Z/Z0)^-2 after integration.
    #[inline]
    pub fn flux_scaling(&self, z: f64) -> f64 {
        debug_assert!(z > 0.0);
        match self.mode {
            IlluminationMode::Passive => 1.0,
            IlluminationMode::Active => {
                let q = self.control_range / z;
                q * q
            }
        }
    }

    /// Flux per unit surface through a unit aperture area, relative to Z0.
    pub fn patch_flux_scaling(&self, z: f64) -> f64 {
        let q = self.control_range / z;
        match self.mode {
            IlluminationMode::Passive => q * q,
            IlluminationMode::Active => q * q * q * q,
        }
    }

    /// Surface area imaged by one pixel, relative to Z0.
    pub fn visible_area_scaling(&self, z: f64) -> f64 {
        let r = z / self.control_range;
        r * r
    }

    /// Mean pixel intensity at range `z`.
    #[inline]
    pub fn intensity_at_range(&self, z: f64) -> f64 {
        self.intensity_at_control * self.flux_scaling(z)
    }

    /// Shot-noise variance at range `z` of a pixel whose intensity at the
    /// control range is `intensity_control`. Equal to its mean intensity.
    #[inline]
    pub fn pixel_noise_variance(&self, intensity_control: f64, z: f64) -> f64 {
        intensity_control * self.flux_scaling(z)
    }
}

/// Intensity-independent error source that adds a constant variance to
/// every range measurement. Off unless configured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloor {
    /// Standard deviation in meters.
    pub range_std: f64,
}

impl NoiseFloor {
    pub fn new(range_std: f64) -> Result<Self> {
        if !(range_std >= 0.0 && range_std.is_finite()) {
            return Err(Error::Domain(format!(
                "noise floor must be nonnegative, got {range_std}"
            )));
        }
        Ok(NoiseFloor { range_std })
    }

    pub fn variance(&self) -> f64 {
        self.range_std * self.range_std
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approximation {
    #[default]
    ExactPoisson,
    GaussianApprox,
}

/// Photon count distribution of one pixel exposure.
#[derive(Clone, Copy, Debug)]
pub struct ShotNoiseSpec {
    rate: f64,
    approximation: Approximation,
}

impl ShotNoiseSpec {
    pub fn new(rate: f64, approximation: Approximation) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("poisson rate must be positive, got {rate}")));
        }
        if approximation == Approximation::GaussianApprox && rate < GAUSSIAN_APPROX_MIN_RATE {
            return Err(Error::ApproximationDomain {
                rate,
                threshold: GAUSSIAN_APPROX_MIN_RATE,
            });
        }
        Ok(ShotNoiseSpec { rate, approximation })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn approximation(&self) -> Approximation {
        self.approximation
    }

    /// Draws one exposure: an integer count for `ExactPoisson`, a real from
    /// N(rate, rate) for `GaussianApprox`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_shot(self.rate, self.approximation, rng)
    }
}

/// Unchecked draw used by the simulators, which validate rates up front.
#[inline]
pub(crate) fn sample_shot<R: Rng + ?Sized>(rate: f64, approx: Approximation, rng: &mut R) -> f64 {
    match approx {
        Approximation::ExactPoisson => Poisson::new(rate).expect("positive rate").sample(rng),
        Approximation::GaussianApprox => Normal::new(rate, rate.sqrt()).expect("finite rate").sample(rng),
    }
}
