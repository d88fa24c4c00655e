//! Point-mass kite physics on a rigid tether.
//!
//! The kite position is held in spherical coordinates `(theta, phi, r)` around the
//! ground station, with `theta` the polar angle from the vertical and `phi` the
//! azimuth measured from the mean wind axis `+x`. All force vectors are expressed
//! in the local basis `(e_theta, e_phi, e_r)` attached to the kite unless stated
//! otherwise.

mod forces;
mod frames;
mod integrate;
mod polar;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forces::{
    aero_force, beta_angle, centrifugal_force, evaluate_forces, gravity_force, relative_wind,
    tether_tension, tether_tension_unclamped, ForceBreakdown, ForceEvaluation, TetherMode,
};
pub use frames::{local_frame, wind_frame, LocalFrame, WindFrame};
pub use integrate::{
    derivatives, integrate_step, rk4_step, StateDerivative, StepDiagnostics, StepOutcome,
    StepSettings,
};
pub use polar::AeroPolar;

pub type Vec3 = Vector3<f64>;

/// Relative wind speeds below this are treated as no wind at all (m/s).
pub const EPS_WIND: f64 = 1e-6;
/// Minimum `sin(theta)` before the azimuthal equation is considered singular.
pub const EPS_THETA: f64 = 1e-6;

pub const ALPHA_MIN_DEG: f64 = -5.0;
pub const ALPHA_MAX_DEG: f64 = 18.0;
pub const PSI_MIN_DEG: f64 = -3.0;
pub const PSI_MAX_DEG: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("relative wind aligned with the tether (substep {substep:?})")]
    AlignmentSingularity { substep: Option<usize> },
    #[error("polar singularity, sin(theta) = {sin_theta:e} (substep {substep:?})")]
    PolarSingularity { sin_theta: f64, substep: Option<usize> },
    #[error("relative wind speed {speed:e} m/s is too small to define a direction")]
    DegenerateWind { speed: f64 },
    #[error("attack angle {alpha_deg} deg outside polar range [{min}, {max}]")]
    OutOfRange { alpha_deg: f64, min: f64, max: f64 },
    #[error("wind field could not be sampled at substep {substep}: {source}")]
    Wind {
        substep: usize,
        #[source]
        source: crate::wind::WindError,
    },
    #[error("invalid polar table: {0}")]
    Polar(String),
}

impl DynamicsError {
    pub(crate) fn at_substep(self, idx: usize) -> Self {
        match self {
            DynamicsError::AlignmentSingularity { .. } => {
                DynamicsError::AlignmentSingularity { substep: Some(idx) }
            }
            DynamicsError::PolarSingularity { sin_theta, .. } => DynamicsError::PolarSingularity {
                sin_theta,
                substep: Some(idx),
            },
            other => other,
        }
    }
}

/// Dynamical state of the kite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KiteState {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
    pub r_dot: f64,
}

impl KiteState {
    pub fn at_rest(theta: f64, phi: f64, r: f64) -> Self {
        KiteState {
            theta,
            phi,
            r,
            theta_dot: 0.0,
            phi_dot: 0.0,
            r_dot: 0.0,
        }
    }

    /// Cartesian position in the ground frame (x along the mean wind, z up).
    pub fn position(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(self.r * st * cp, self.r * st * sp, self.r * ct)
    }

    pub fn altitude(&self) -> f64 {
        self.r * self.theta.cos()
    }

    /// Kite velocity in local components.
    pub fn velocity_local(&self) -> Vec3 {
        Vec3::new(
            self.theta_dot * self.r,
            self.phi_dot * self.r * self.theta.sin(),
            self.r_dot,
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.theta,
            self.phi,
            self.r,
            self.theta_dot,
            self.phi_dot,
            self.r_dot,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub(crate) fn axpy(&self, h: f64, d: &StateDerivative) -> KiteState {
        KiteState {
            theta: self.theta + h * d.theta,
            phi: self.phi + h * d.phi,
            r: self.r + h * d.r,
            theta_dot: self.theta_dot + h * d.theta_dot,
            phi_dot: self.phi_dot + h * d.phi_dot,
            r_dot: self.r_dot + h * d.r_dot,
        }
    }
}

/// Physical constants of the kite, drum and atmosphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Kite mass (kg).
    pub m: f64,
    /// Characteristic area (m^2).
    pub area: f64,
    /// Air density (kg/m^3).
    pub rho: f64,
    /// Drum mass (kg).
    pub drum_mass: f64,
    /// Drum radius (m).
    pub drum_radius: f64,
    /// Viscous friction on the drum shaft (N m s).
    pub k_fric: f64,
    pub g: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            m: 1.0,
            area: 10.0,
            rho: 1.2,
            drum_mass: 10.0,
            drum_radius: 0.2,
            k_fric: 0.6,
            g: 9.81,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("m", self.m),
            ("area", self.area),
            ("rho", self.rho),
            ("drum_mass", self.drum_mass),
            ("drum_radius", self.drum_radius),
            ("g", self.g),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.k_fric.is_finite() && self.k_fric >= 0.0) {
            return Err(format!("k_fric must be non-negative, got {}", self.k_fric));
        }
        Ok(())
    }

    /// Drum moment of inertia, `M R^2 / 2`.
    pub fn drum_inertia(&self) -> f64 {
        0.5 * self.drum_mass * self.drum_radius * self.drum_radius
    }
}

/// Attack and bank angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAngles {
    pub alpha: f64,
    pub psi: f64,
}

impl ControlAngles {
    pub fn new(alpha: f64, psi: f64) -> Self {
        ControlAngles { alpha, psi }
    }

    pub fn clamped(self) -> Self {
        ControlAngles {
            alpha: self.alpha.clamp(ALPHA_MIN_DEG, ALPHA_MAX_DEG),
            psi: self.psi.clamp(PSI_MIN_DEG, PSI_MAX_DEG),
        }
    }

    pub fn in_range(&self) -> bool {
        (ALPHA_MIN_DEG..=ALPHA_MAX_DEG).contains(&self.alpha)
            && (PSI_MIN_DEG..=PSI_MAX_DEG).contains(&self.psi)
    }

    pub fn psi_rad(&self) -> f64 {
        self.psi.to_radians()
    }
}
