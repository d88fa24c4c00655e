//! Episodic pumping-cycle environment.
//!
//! A cycle runs four phases in order: traction (reel-out under generator load),
//! a first transitory phase that kills the radial speed, retraction (motor reels
//! in at constant force) and a second transitory phase that repositions the
//! kite for the next traction. Each phase is a separate episode with its own
//! observation, reward and termination rules.

mod cycle;
mod environment;
mod ledger;
pub mod rewards;
mod trajectory;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ALPHA_MAX_DEG, ALPHA_MIN_DEG, PSI_MAX_DEG};

pub(crate) use cycle::trajectory_row;
pub use cycle::{run_cycle, CycleFailed, CycleOutcome, FnPolicy, Policy, ZeroPolicy};
pub use environment::{AweEnv, EntryState, EnvConfig, StepResult};
pub use ledger::{EnergyLedger, PhaseLedger};
pub use rewards::{penalty_schedule, reward_r2t, reward_retraction, reward_t2r, reward_traction};
pub use trajectory::{
    read_trajectory, trajectory_to_string, write_trajectory, TrajectoryRow, TRAJECTORY_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Traction,
    T2R,
    Retraction,
    R2T,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Traction, Phase::T2R, Phase::Retraction, Phase::R2T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Traction => "traction",
            Phase::T2R => "t2r",
            Phase::Retraction => "retraction",
            Phase::R2T => "r2t",
        }
    }

    pub fn next(self) -> Phase {
        Phase::ALL[(self.index() + 1) % 4]
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Phase::R2T => 4,
            _ => 3,
        }
    }

    /// Reel-in phases run the drum motor.
    pub fn motor_driven(self) -> bool {
        matches!(self, Phase::Retraction | Phase::R2T)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "traction" => Ok(Phase::Traction),
            "t2r" => Ok(Phase::T2R),
            "retraction" => Ok(Phase::Retraction),
            "r2t" => Ok(Phase::R2T),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailReason {
    GroundContact,
    AlignmentSingularity,
    TetherOverrun,
    AltitudeOverrun,
    HorizonExhausted,
}

impl FailReason {
    pub fn name(self) -> &'static str {
        match self {
            FailReason::GroundContact => "ground_contact",
            FailReason::AlignmentSingularity => "alignment_singularity",
            FailReason::TetherOverrun => "tether_overrun",
            FailReason::AltitudeOverrun => "altitude_overrun",
            FailReason::HorizonExhausted => "horizon_exhausted",
        }
    }

    /// A crash, as opposed to running out of time.
    pub fn is_crash(self) -> bool {
        !matches!(self, FailReason::HorizonExhausted)
    }
}

impl FromStr for FailReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            FailReason::GroundContact,
            FailReason::AlignmentSingularity,
            FailReason::TetherOverrun,
            FailReason::AltitudeOverrun,
            FailReason::HorizonExhausted,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| format!("unknown failure reason `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Goal,
    Failed(FailReason),
}

impl Status {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Status::Running)
    }

    /// Whether the value of the next state should be cut off. Running out of
    /// horizon is a time limit, not a true terminal state.
    pub fn cuts_bootstrap(self) -> bool {
        match self {
            Status::Running => false,
            Status::Goal => true,
            Status::Failed(r) => r != FailReason::HorizonExhausted,
        }
    }

    pub fn label(self) -> String {
        match self {
            Status::Running => "running".into(),
            Status::Goal => "goal".into(),
            Status::Failed(r) => format!("failed:{}", r.name()),
        }
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "running" => Ok(Status::Running),
            "goal" => Ok(Status::Goal),
            _ => s
                .strip_prefix("failed:")
                .ok_or_else(|| format!("unknown status `{s}`"))?
                .parse()
                .map(Status::Failed),
        }
    }
}

/// What the agent sees: attack angle, relative wind elevation, bank angle and,
/// in the second transitory phase only, the kite azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub alpha_deg: f64,
    pub beta_rad: f64,
    pub psi_deg: f64,
    pub phi: Option<f64>,
}

impl Observation {
    /// Network input, every component mapped affinely onto `[-1, 1]`.
    pub fn normalized(&self) -> Vec<f32> {
        let mid = 0.5 * (ALPHA_MAX_DEG + ALPHA_MIN_DEG);
        let half = 0.5 * (ALPHA_MAX_DEG - ALPHA_MIN_DEG);
        let mut v = vec![
            ((self.alpha_deg - mid) / half) as f32,
            (self.beta_rad / FRAC_PI_2).clamp(-1.0, 1.0) as f32,
            (self.psi_deg / PSI_MAX_DEG) as f32,
        ];
        if let Some(phi) = self.phi {
            v.push((wrap_angle(phi) / PI) as f32);
        }
        v
    }
}

/// Per-step change of the control angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub d_alpha: f64,
    pub d_psi: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        d_alpha: 0.0,
        d_psi: 0.0,
    };

    pub fn new(d_alpha: f64, d_psi: f64) -> Self {
        Action { d_alpha, d_psi }
    }

    /// From a network output in `[-1, 1]^2`; one unit is one degree.
    pub fn from_normalized(a: &[f32]) -> Self {
        Action {
            d_alpha: a[0] as f64,
            d_psi: a[1] as f64,
        }
    }

    pub fn clamped(self) -> Self {
        Action {
            d_alpha: self.d_alpha.clamp(-1.0, 1.0),
            d_psi: self.d_psi.clamp(-1.0, 1.0),
        }
    }

    pub fn exceeds_bounds(&self) -> bool {
        !(self.d_alpha.abs() <= 1.0 && self.d_psi.abs() <= 1.0)
    }
}

/// Geometric thresholds that end phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionThresholds {
    /// Tether length that ends traction (m).
    pub r_traction_end: f64,
    /// Radial speed below which the first transitory phase succeeds (m/s).
    pub r_dot_thr: f64,
    /// Tether length that ends retraction and starts repositioning (m).
    pub r_thr: f64,
    /// Tether length that must be reached before a new traction (m).
    pub r_restart: f64,
    /// Tether overrun limit (m).
    pub r_max: f64,
    /// Kite hits the ground station below this tether length (m).
    pub r_min: f64,
    /// Altitude ceiling (m).
    pub z_max: f64,
    /// Azimuth window for a new traction (rad).
    pub phi_goal: (f64, f64),
    /// Upper bound on the polar angle for a new traction (rad).
    pub theta_goal: f64,
}

impl Default for TransitionThresholds {
    fn default() -> Self {
        TransitionThresholds {
            r_traction_end: 100.0,
            r_dot_thr: 0.2,
            r_thr: 27.0,
            r_restart: 22.0,
            r_max: 130.0,
            r_min: 1.0,
            z_max: 100.0,
            phi_goal: (-FRAC_PI_2, FRAC_PI_2),
            theta_goal: FRAC_PI_4,
        }
    }
}

impl TransitionThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.r_min
            && self.r_min < self.r_restart
            && self.r_restart <= self.r_thr
            && self.r_thr < self.r_traction_end
            && self.r_traction_end < self.r_max)
        {
            return Err("thresholds must satisfy 0 < r_min < r_restart <= r_thr < r_traction_end < r_max".into());
        }
        Ok(())
    }

    /// Kite orientation allows a new traction phase.
    pub fn well_positioned(&self, theta: f64, phi: f64) -> bool {
        let phi = wrap_angle(phi);
        phi >= self.phi_goal.0 && phi <= self.phi_goal.1 && theta < self.theta_goal
    }
}

/// Per-phase episode settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Maximum number of decision steps.
    pub horizon: usize,
    /// Constant motor force while reeling in (N).
    pub motor_force: f64,
}

impl PhaseConfig {
    pub fn default_for(phase: Phase) -> Self {
        PhaseConfig {
            horizon: match phase {
                Phase::Traction | Phase::Retraction => 3000,
                Phase::T2R | Phase::R2T => 1500,
            },
            motor_force: 1200.0,
        }
    }
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self::default_for(Phase::Traction)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("phase {0} needs the end state of the previous phase")]
    MissingEntryState(Phase),
    #[error(transparent)]
    Wind(#[from] crate::wind::WindError),
    #[error("invalid environment configuration: {0}")]
    Config(String),
}

/// Angle wrapped into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
