//! Wind velocity providers.
//!
//! Every provider is immutable after construction and samples the ground-frame
//! wind `(u, v, w)` at a space-time point, `x` streamwise and `z` up.

mod gridded;
mod shear;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Vec3;

pub use gridded::{load_gridded, write_gridded, GriddedField};
pub use shear::{synth_shear, ShearMode, SyntheticShearField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindError {
    #[error("altitude {z} m is above the wind domain top {top} m")]
    AboveDomain { z: f64, top: f64 },
    #[error("altitude {z} m is below ground")]
    BelowGround { z: f64 },
    #[error("malformed wind file: {0}")]
    Format(String),
    #[error("invalid wind data: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindSample {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl WindSample {
    pub fn new(u: f64, v: f64, w: f64) -> Self {
        WindSample { u, v, w }
    }

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.u, self.v, self.w)
    }
}

pub trait WindField: Send + Sync {
    fn sample(&self, x: f64, y: f64, z: f64, t: f64) -> Result<WindSample, WindError>;

    /// Highest altitude at which the field is defined, if bounded.
    fn ceiling(&self) -> Option<f64> {
        None
    }
}

/// Uniform wind along `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantField {
    pub speed: f64,
}

impl ConstantField {
    pub fn new(speed: f64) -> Self {
        ConstantField { speed }
    }
}

impl Default for ConstantField {
    fn default() -> Self {
        ConstantField { speed: 10.0 }
    }
}

impl WindField for ConstantField {
    fn sample(&self, _x: f64, _y: f64, _z: f64, _t: f64) -> Result<WindSample, WindError> {
        Ok(WindSample::new(self.speed, 0.0, 0.0))
    }
}
