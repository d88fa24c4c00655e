use super::{
    Action, AweEnv, EnergyLedger, EnvError, FailReason, Observation, Phase, Status, TrajectoryRow,
};

/// Maps observations to control increments.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> Action;
}

/// Holds the controls fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, _obs: &Observation) -> Action {
        Action::ZERO
    }
}

/// Wraps a closure.
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(&Observation) -> Action> Policy for FnPolicy<F> {
    fn act(&mut self, obs: &Observation) -> Action {
        (self.0)(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleFailed {
    pub phase: Phase,
    pub reason: FailReason,
}

#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub ledger: EnergyLedger,
    pub trajectory: Vec<TrajectoryRow>,
    /// Phases in the order they ran.
    pub phases_run: Vec<Phase>,
    pub failure: Option<CycleFailed>,
    pub rewards: [f64; 4],
}

impl CycleOutcome {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn crashed(&self) -> bool {
        self.failure.is_some_and(|f| f.reason.is_crash())
    }
}

pub(crate) fn trajectory_row(env: &AweEnv, reward: f64, status: Status) -> TrajectoryRow {
    let s = env.state();
    let p = s.position();
    let c = env.controls();
    let snap = env.snapshot();
    TrajectoryRow {
        t: env.time(),
        phase: env.phase(),
        theta: s.theta,
        phi: s.phi,
        r: s.r,
        theta_dot: s.theta_dot,
        phi_dot: s.phi_dot,
        r_dot: s.r_dot,
        x: p.x,
        y: p.y,
        z: p.z,
        alpha_deg: c.alpha,
        psi_deg: c.psi,
        beta_rad: snap.beta,
        w_rel: snap.w_rel,
        tension: snap.tension,
        power_kw: snap.power / 1000.0,
        reward,
        status,
    }
}

/// Runs traction, T2R, retraction and, unless the kite is already positioned
/// for the next traction, R2T. Stops at the first failed phase.
pub fn run_cycle(
    env: &mut AweEnv,
    policies: &mut [&mut dyn Policy; 4],
    seed: u64,
) -> Result<CycleOutcome, EnvError> {
    let mut out = CycleOutcome {
        ledger: EnergyLedger::default(),
        trajectory: Vec::new(),
        phases_run: Vec::new(),
        failure: None,
        rewards: [0.0; 4],
    };
    let mut entry = None;
    for phase in Phase::ALL {
        if phase == Phase::R2T {
            let s = env.state();
            if env.config().thresholds.well_positioned(s.theta, s.phi) {
                out.ledger.get_mut(phase).skipped = true;
                break;
            }
        }
        let mut obs = env.reset(phase, seed, entry)?;
        out.phases_run.push(phase);
        out.trajectory.push(trajectory_row(env, 0.0, Status::Running));
        let policy = &mut policies[phase.index()];
        let status = loop {
            let r = env.step(policy.act(&obs))?;
            out.rewards[phase.index()] += r.reward;
            out.trajectory.push(trajectory_row(env, r.reward, r.status));
            obs = r.obs;
            if r.status.is_terminal() {
                break r.status;
            }
        };
        let (energy_j, duration) = env.phase_totals();
        let trace = env.take_power_trace();
        let row = out.ledger.get_mut(phase);
        row.visited = true;
        row.energy_kwh = energy_j / 3.6e6;
        row.duration_s = duration;
        row.power_trace = trace.into_iter().map(|(t, w)| (t, w / 1000.0)).collect();
        if let Status::Failed(reason) = status {
            out.failure = Some(CycleFailed { phase, reason });
            break;
        }
        entry = Some(env.entry_state());
    }
    Ok(out)
}
