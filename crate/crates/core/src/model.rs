//! Stereo triangulation geometry and range-error models.
//!
//! Ranges are axial (measured along the optical axis). Focal length and
//! disparity are in pixels, range and baseline in meters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ideal rectified, coplanar stereo pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    /// Focal length in pixels.
    pub focal_length: f64,
    /// Baseline in meters.
    pub baseline: f64,
    /// Image width in pixels.
    pub pixel_count_x: usize,
    /// Reference range in meters at which illumination is specified.
    pub control_range: f64,
}

impl StereoRig {
    pub fn new(focal_length: f64, baseline: f64, pixel_count_x: usize, control_range: f64) -> Result<Self> {
        if !(focal_length > 0.0 && focal_length.is_finite()) {
            return Err(Error::Domain(format!(
                "focal length must be positive, got {focal_length}"
            )));
        }
        if !(baseline > 0.0 && baseline.is_finite()) {
            return Err(Error::Domain(format!("baseline must be positive, got {baseline}")));
        }
        if !(control_range > 0.0 && control_range.is_finite()) {
            return Err(Error::Domain(format!(
                "control range must be positive, got {control_range}"
            )));
        }
        Ok(StereoRig {
            focal_length,
            baseline,
            pixel_count_x,
            control_range,
        })
    }

    /// `f * b`, the constant linking range and disparity.
    #[inline]
    pub fn focal_baseline(&self) -> f64 {
        self.focal_length * self.baseline
    }

    /// Triangulates `Z = f b / d`.
    pub fn disparity_to_range(&self, disparity: f64) -> Result<f64> {
        if !(disparity > 0.0) {
            return Err(Error::Domain(format!(
                "cannot triangulate nonpositive disparity {disparity}"
            )));
        }
        Ok(self.focal_baseline() / disparity)
    }

    /// Inverse of [`StereoRig::disparity_to_range`].
    pub fn range_to_disparity(&self, range: f64) -> Result<f64> {
        if !(range > 0.0) {
            return Err(Error::Domain(format!("range must be positive, got {range}")));
        }
        Ok(self.focal_baseline() / range)
    }
}

/// `sigma_Z = k * Z^lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawModel {
    /// Scale in m^(1 - lambda).
    pub k: f64,
    pub lambda: f64,
}

impl PowerLawModel {
    pub fn new(k: f64, lambda: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("k must be positive, got {k}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(PowerLawModel { k, lambda })
    }

    /// Quadratic law of shot-noise-limited passive stereo.
    pub fn passive(k: f64) -> Result<Self> {
        Self::new(k, 2.0)
    }

    /// Cubic law of shot-noise-limited stereo with a co-located illuminator.
    pub fn active(k: f64) -> Result<Self> {
        Self::new(k, 3.0)
    }

    /// Range standard deviation at range `z` (meters, `z > 0`).
    #[inline]
    pub fn sigma_z(&self, z: f64) -> f64 {
        self.k * z.powf(self.lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    /// `c1 * Z^2`
    KhoshelhamQuadratic,
    /// `c1 + c2 * (Z - c3)^2`
    NguyenOffsetQuadratic,
}

impl BaselineKind {
    fn arity(self) -> usize {
        match self {
            BaselineKind::KhoshelhamQuadratic => 1,
            BaselineKind::NguyenOffsetQuadratic => 3,
        }
    }
}

/// Published Kinect v1 axial-noise curve with a single quadratic constant.
pub const KHOSHELHAM_COEFFICIENTS: [f64; 1] = [0.001425];
/// Published Kinect v1 axial-noise curve with offset, gain and vertex.
pub const NGUYEN_COEFFICIENTS: [f64; 3] = [0.0012, 0.0019, 0.4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    kind: BaselineKind,
    coefficients: Vec<f64>,
}

impl BaselineModel {
    pub fn new(kind: BaselineKind, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != kind.arity() {
            return Err(Error::Domain(format!(
                "{kind:?} takes {} coefficients, got {}",
                kind.arity(),
                coefficients.len()
            )));
        }
        Ok(BaselineModel { kind, coefficients })
    }

    pub fn khoshelham() -> Self {
        BaselineModel {
            kind: BaselineKind::KhoshelhamQuadratic,
            coefficients: KHOSHELHAM_COEFFICIENTS.to_vec(),
        }
    }

    pub fn nguyen() -> Self {
        BaselineModel {
            kind: BaselineKind::NguyenOffsetQuadratic,
            coefficients: NGUYEN_COEFFICIENTS.to_vec(),
        }
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn sigma(&self, z: f64) -> f64 {
        let c = &self.coefficients;
        match self.kind {
            BaselineKind::KhoshelhamQuadratic => c[0] * z * z,
            BaselineKind::NguyenOffsetQuadratic => {
                let dz = z - c[2];
                c[0] + c[1] * dz * dz
            }
        }
    }
}
