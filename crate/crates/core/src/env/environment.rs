use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rewards::{reward_r2t, reward_retraction, reward_t2r, reward_traction};
use super::{
    Action, EnvError, FailReason, Observation, Phase, PhaseConfig, Status, TransitionThresholds,
};
use crate::dynamics::{
    beta_angle, evaluate_forces, integrate_step, local_frame, relative_wind, AeroPolar,
    ControlAngles, DynamicsError, KiteState, StepSettings, SystemParams, TetherMode,
    ALPHA_MAX_DEG, ALPHA_MIN_DEG, PSI_MAX_DEG, PSI_MIN_DEG,
};
use crate::wind::{WindError, WindField};

const J_PER_KWH: f64 = 3.6e6;

/// Static settings shared by all episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub params: SystemParams,
    pub polar: AeroPolar,
    pub thresholds: TransitionThresholds,
    pub phases: [PhaseConfig; 4],
    /// Decision interval (s).
    pub dt: f64,
    /// Integration substep (s).
    pub dt_sub: f64,
    /// Keep the substep-resolution power trace.
    pub record_power: bool,
    /// Fresh traction starts at this tether length (m).
    pub r_start: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            params: SystemParams::default(),
            polar: AeroPolar::placeholder(),
            thresholds: TransitionThresholds::default(),
            phases: Phase::ALL.map(PhaseConfig::default_for),
            dt: 0.1,
            dt_sub: 1e-3,
            record_power: false,
            r_start: 20.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.params.validate()?;
        self.thresholds.validate()?;
        if !(self.dt > 0.0 && self.dt_sub > 0.0 && self.dt_sub <= self.dt) {
            return Err(format!("need 0 < dt_sub <= dt, got dt={} dt_sub={}", self.dt, self.dt_sub));
        }
        for p in &self.phases {
            if p.horizon == 0 || !(p.motor_force >= 0.0) {
                return Err("horizons must be positive and motor forces non-negative".into());
            }
        }
        Ok(())
    }

    pub fn substeps(&self) -> usize {
        (self.dt / self.dt_sub).round().max(1.0) as usize
    }

    pub fn phase(&self, phase: Phase) -> &PhaseConfig {
        &self.phases[phase.index()]
    }

    pub fn tether_mode(&self, phase: Phase) -> TetherMode {
        if phase.motor_driven() {
            TetherMode::retraction_from_force(self.phase(phase).motor_force, &self.params)
        } else {
            TetherMode::Traction
        }
    }
}

/// Where a non-initial phase begins: the end of the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryState {
    pub state: KiteState,
    pub controls: ControlAngles,
    pub t: f64,
}

/// Everything produced by one decision step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub status: Status,
    /// Drum energy over the step (kWh).
    pub energy_kwh: f64,
    /// The requested action had to be clamped to one degree.
    pub action_clamped: bool,
}

/// Scalar quantities at the current state, for observation and export.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Snapshot {
    pub beta: f64,
    pub w_rel: f64,
    pub tension: f64,
    /// Power through the drum (W).
    pub power: f64,
}

pub struct AweEnv {
    cfg: EnvConfig,
    wind: Arc<dyn WindField>,
    phase: Phase,
    state: KiteState,
    controls: ControlAngles,
    t: f64,
    k: usize,
    phi0: f64,
    status: Status,
    snapshot: Snapshot,
    phase_energy_j: f64,
    phase_start_t: f64,
    power_trace: Vec<(f64, f64)>,
}

impl AweEnv {
    pub fn new(cfg: EnvConfig, wind: Arc<dyn WindField>) -> Result<Self, EnvError> {
        cfg.validate().map_err(EnvError::Config)?;
        Ok(AweEnv {
            cfg,
            wind,
            phase: Phase::Traction,
            state: KiteState::at_rest(FRAC_PI_3, 0.0, 20.0),
            controls: ControlAngles::new(0.0, 0.0),
            t: 0.0,
            k: 0,
            phi0: 0.0,
            status: Status::Failed(FailReason::HorizonExhausted),
            snapshot: Snapshot::default(),
            phase_energy_j: 0.0,
            phase_start_t: 0.0,
            power_trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn wind(&self) -> &Arc<dyn WindField> {
        &self.wind
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn state(&self) -> &KiteState {
        &self.state
    }

    pub fn controls(&self) -> ControlAngles {
        self.controls
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.k
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot
    }

    pub fn entry_state(&self) -> EntryState {
        EntryState {
            state: self.state,
            controls: self.controls,
            t: self.t,
        }
    }

    /// Drum energy and elapsed time since the phase began (J, s).
    pub fn phase_totals(&self) -> (f64, f64) {
        (self.phase_energy_j, self.t - self.phase_start_t)
    }

    /// `(t, power W)` at substep resolution, when recording is enabled.
    pub fn take_power_trace(&mut self) -> Vec<(f64, f64)> {
        std::mem::take(&mut self.power_trace)
    }

    /// Random fresh traction start: azimuth in [-pi/2, pi/2], polar angle in
    /// [pi/12, pi/3], tether at `r_start`, controls uniform, kite at rest.
    pub fn sample_traction_start(&self, seed: u64) -> EntryState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let theta = rng.random_range(PI / 12.0..=FRAC_PI_3);
        let alpha = rng.random_range(ALPHA_MIN_DEG..=ALPHA_MAX_DEG);
        let psi = rng.random_range(PSI_MIN_DEG..=PSI_MAX_DEG);
        EntryState {
            state: KiteState::at_rest(theta, phi, self.cfg.r_start),
            controls: ControlAngles::new(alpha, psi),
            t: 0.0,
        }
    }

    /// Starts an episode of `phase`. Traction draws a fresh start from `seed`
    /// when no entry state is given; later phases require one.
    pub fn reset(
        &mut self,
        phase: Phase,
        seed: u64,
        entry: Option<EntryState>,
    ) -> Result<Observation, EnvError> {
        let entry = match (phase, entry) {
            (_, Some(e)) => e,
            (Phase::Traction, None) => self.sample_traction_start(seed),
            (p, None) => return Err(EnvError::MissingEntryState(p)),
        };
        self.phase = phase;
        self.state = entry.state;
        self.controls = entry.controls.clamped();
        self.t = entry.t;
        self.k = 0;
        self.phi0 = entry.state.phi;
        self.status = Status::Running;
        self.phase_energy_j = 0.0;
        self.phase_start_t = entry.t;
        self.power_trace.clear();
        self.snapshot = self.compute_snapshot()?;
        if self.cfg.record_power {
            self.power_trace.push((self.t, self.snapshot.power));
        }
        Ok(self.observation())
    }

    fn compute_snapshot(&self) -> Result<Snapshot, EnvError> {
        let pos = self.state.position();
        let wind = self.wind.sample(pos.x, pos.y, pos.z, self.t)?.as_vec();
        let mode = self.cfg.tether_mode(self.phase);
        match evaluate_forces(&self.state, &self.controls, &wind, mode, &self.cfg.params, &self.cfg.polar) {
            Ok(ev) => Ok(Snapshot {
                beta: ev.beta(),
                w_rel: ev.relative_speed(),
                tension: ev.forces.tension,
                power: mode.energy_force(ev.forces.tension, &self.cfg.params) * self.state.r_dot,
            }),
            Err(_) => {
                let frame = local_frame(self.state.theta, self.state.phi);
                let w_rel = relative_wind(&self.state, &wind, &frame);
                Ok(Snapshot {
                    beta: beta_angle(&w_rel).unwrap_or(0.0),
                    w_rel: w_rel.norm(),
                    ..Snapshot::default()
                })
            }
        }
    }

    pub fn observation(&self) -> Observation {
        Observation {
            alpha_deg: self.controls.alpha,
            beta_rad: self.snapshot.beta,
            psi_deg: self.controls.psi,
            phi: (self.phase == Phase::R2T).then_some(self.state.phi),
        }
    }

    fn settings(&self) -> StepSettings {
        StepSettings {
            dt_sub: self.cfg.dt_sub,
            n_sub: self.cfg.substeps(),
            record_power: self.cfg.record_power,
        }
    }

    /// Applies the action, advances the physics by one decision interval and
    /// scores the result.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.status.is_terminal() {
            return Err(EnvError::EpisodeOver);
        }
        let action_clamped = action.exceeds_bounds();
        let a = action.clamped();
        let psi_prev = self.controls.psi_rad();
        self.controls = ControlAngles::new(self.controls.alpha + a.d_alpha, self.controls.psi + a.d_psi).clamped();
        self.k += 1;

        let mode = self.cfg.tether_mode(self.phase);
        let outcome = integrate_step(
            &self.state,
            self.t,
            &self.controls,
            self.wind.as_ref(),
            mode,
            &self.cfg.params,
            &self.cfg.polar,
            self.settings(),
        );
        let mut energy_j = 0.0;
        let status = match outcome {
            Ok(out) => {
                energy_j = out.energy;
                self.state = out.state;
                self.t = out.t;
                if self.cfg.record_power {
                    self.power_trace.extend(out.diagnostics.power_trace.iter().copied());
                }
                self.snapshot = Snapshot {
                    beta: out.end.beta(),
                    w_rel: out.end.relative_speed(),
                    tension: out.end.forces.tension,
                    power: mode.energy_force(out.end.forces.tension, &self.cfg.params) * self.state.r_dot,
                };
                if out.diagnostics.ground_contact.is_some() {
                    Status::Failed(FailReason::GroundContact)
                } else {
                    self.classify()
                }
            }
            Err(e) => {
                // The step is discarded; time still advances to keep the
                // episode clock monotone.
                self.t += self.cfg.dt;
                Status::Failed(map_dynamics_failure(&e))
            }
        };
        if self.cfg.record_power {
            self.power_trace.push((self.t, self.snapshot.power));
        }
        self.phase_energy_j += energy_j;
        self.status = status;
        let energy_kwh = energy_j / J_PER_KWH;
        let reward = self.reward(status, energy_kwh, psi_prev);
        Ok(StepResult {
            obs: self.observation(),
            reward,
            status,
            energy_kwh,
            action_clamped,
        })
    }

    fn classify(&self) -> Status {
        let th = &self.cfg.thresholds;
        let s = &self.state;
        let z = s.altitude();
        if z <= 0.0 || s.r <= th.r_min {
            return Status::Failed(FailReason::GroundContact);
        }
        if s.r > th.r_max {
            return Status::Failed(FailReason::TetherOverrun);
        }
        if z > th.z_max {
            return Status::Failed(FailReason::AltitudeOverrun);
        }
        let goal = match self.phase {
            Phase::Traction => s.r >= th.r_traction_end,
            Phase::T2R => s.r_dot < th.r_dot_thr,
            Phase::Retraction => s.r <= th.r_thr,
            Phase::R2T => th.well_positioned(s.theta, s.phi) && s.r <= th.r_restart,
        };
        if goal {
            Status::Goal
        } else if self.k >= self.cfg.phase(self.phase).horizon {
            Status::Failed(FailReason::HorizonExhausted)
        } else {
            Status::Running
        }
    }

    fn reward(&self, status: Status, energy_kwh: f64, psi_prev: f64) -> f64 {
        let s = &self.state;
        let pc = self.cfg.phase(self.phase);
        match self.phase {
            Phase::Traction => reward_traction(energy_kwh, status),
            Phase::T2R => reward_t2r(s.theta, s.r_dot, status, self.k),
            Phase::Retraction => reward_retraction(
                s.r_dot,
                self.snapshot.w_rel,
                s.r,
                self.k,
                status,
                pc.horizon,
                pc.motor_force,
            ),
            Phase::R2T => reward_r2t(
                s.r_dot,
                psi_prev,
                self.controls.psi_rad(),
                self.phi0,
                self.k,
                status,
            ),
        }
    }
}

fn map_dynamics_failure(e: &DynamicsError) -> FailReason {
    match e {
        DynamicsError::Wind {
            source: WindError::BelowGround { .. },
            ..
        } => FailReason::GroundContact,
        DynamicsError::Wind {
            source: WindError::AboveDomain { .. },
            ..
        } => FailReason::AltitudeOverrun,
        // Every remaining failure is a numerical breakdown of the frame algebra.
        _ => FailReason::AlignmentSingularity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wind::ConstantField;

    fn env(wind: f64) -> AweEnv {
        AweEnv::new(EnvConfig::default(), Arc::new(ConstantField::new(wind))).unwrap()
    }

    #[test]
    fn reset_is_seeded() {
        let mut e = env(10.0);
        e.reset(Phase::Traction, 9, None).unwrap();
        let a = (*e.state(), e.controls());
        e.reset(Phase::Traction, 9, None).unwrap();
        assert_eq!(a, (*e.state(), e.controls()));
        e.reset(Phase::Traction, 10, None).unwrap();
        assert_ne!(a.0, *e.state());
    }

    #[test]
    fn traction_start_distribution() {
        let e = env(10.0);
        let n = 10_000;
        let mut sum = 0.0;
        for seed in 0..n {
            let s = e.sample_traction_start(seed).state;
            assert!(s.theta >= PI / 12.0 && s.theta <= FRAC_PI_3);
            assert!(s.phi.abs() <= FRAC_PI_2);
            assert_eq!(s.r, 20.0);
            assert_eq!((s.theta_dot, s.phi_dot, s.r_dot), (0.0, 0.0, 0.0));
            sum += s.theta;
        }
        let mean = sum / n as f64;
        let (a, b) = (PI / 12.0, FRAC_PI_3);
        let sigma = (b - a) / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5 * (a + b)).abs() < 3.0 * sigma);
    }

    #[test]
    fn later_phases_need_entry() {
        let mut e = env(10.0);
        assert_eq!(e.reset(Phase::T2R, 0, None), Err(EnvError::MissingEntryState(Phase::T2R)));
    }

    #[test]
    fn action_increments_are_clamped() {
        let mut e = env(10.0);
        let entry = EntryState {
            state: KiteState::at_rest(0.6, 0.0, 30.0),
            controls: ControlAngles::new(5.0, 0.0),
            t: 0.0,
        };
        e.reset(Phase::Traction, 0, Some(entry)).unwrap();
        let r = e.step(Action::new(2.0, 0.0)).unwrap();
        assert!(r.action_clamped);
        assert_eq!(e.controls().alpha, 6.0);
        assert_eq!(e.controls().psi, 0.0);
        if !r.status.is_terminal() {
            e.step(Action::ZERO).unwrap();
            assert_eq!(e.controls(), ControlAngles::new(6.0, 0.0));
        }
    }

    #[test]
    fn controls_stay_in_range() {
        let mut e = env(10.0);
        e.reset(Phase::Traction, 3, None).unwrap();
        for i in 0..200 {
            let a = if i % 3 == 0 { Action::new(5.0, -5.0) } else { Action::new(-0.7, 0.9) };
            match e.step(a) {
                Ok(r) if r.status.is_terminal() => break,
                Ok(_) => {}
                Err(err) => panic!("{err}"),
            }
            assert!(e.controls().in_range());
        }
    }

    #[test]
    fn no_steps_after_termination() {
        let mut e = env(0.0);
        let entry = EntryState {
            state: KiteState {
                theta_dot: 3.0,
                ..KiteState::at_rest(FRAC_PI_2 - 0.02, 0.0, 20.0)
            },
            controls: ControlAngles::new(0.0, 0.0),
            t: 0.0,
        };
        e.reset(Phase::Traction, 0, Some(entry)).unwrap();
        let r = e.step(Action::ZERO).unwrap();
        assert_eq!(r.status, Status::Failed(FailReason::GroundContact));
        assert_eq!(r.reward, -0.1);
        assert_eq!(e.step(Action::ZERO).unwrap_err(), EnvError::EpisodeOver);
    }
}
