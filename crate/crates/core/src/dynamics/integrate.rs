use super::{
    evaluate_forces, AeroPolar, ControlAngles, DynamicsError, ForceEvaluation, KiteState,
    SystemParams, TetherMode, Vec3, EPS_THETA,
};
use crate::wind::WindField;

/// Time derivative of [`KiteState`], field by field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
    pub r_dot: f64,
}

/// Equations of motion for a point mass in spherical coordinates, with the
/// apparent forces already folded into `total_force_local`.
pub fn derivatives(
    state: &KiteState,
    total_force_local: &Vec3,
    mass: f64,
) -> Result<StateDerivative, DynamicsError> {
    let sin_theta = state.theta.sin();
    if sin_theta.abs() <= EPS_THETA {
        return Err(DynamicsError::PolarSingularity {
            sin_theta,
            substep: None,
        });
    }
    let f = total_force_local;
    Ok(StateDerivative {
        theta: state.theta_dot,
        phi: state.phi_dot,
        r: state.r_dot,
        theta_dot: f.x / (mass * state.r),
        phi_dot: f.y / (mass * state.r * sin_theta),
        r_dot: f.z / mass,
    })
}

/// One classical Runge-Kutta step. `f` returns the state derivative and an
/// auxiliary rate (power) at a stage time offset; the auxiliary rate is
/// integrated with the same weights and returned alongside the new state.
pub fn rk4_step<F, E>(y: &KiteState, h: f64, mut f: F) -> Result<(KiteState, f64), E>
where
    F: FnMut(&KiteState, f64) -> Result<(StateDerivative, f64), E>,
{
    let (k1, p1) = f(y, 0.0)?;
    let (k2, p2) = f(&y.axpy(0.5 * h, &k1), 0.5 * h)?;
    let (k3, p3) = f(&y.axpy(0.5 * h, &k2), 0.5 * h)?;
    let (k4, p4) = f(&y.axpy(h, &k3), h)?;
    let w = h / 6.0;
    let next = KiteState {
        theta: y.theta + w * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
        phi: y.phi + w * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
        r: y.r + w * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
        theta_dot: y.theta_dot
            + w * (k1.theta_dot + 2.0 * k2.theta_dot + 2.0 * k3.theta_dot + k4.theta_dot),
        phi_dot: y.phi_dot + w * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot),
        r_dot: y.r_dot + w * (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot),
    };
    Ok((next, w * (p1 + 2.0 * p2 + 2.0 * p3 + p4)))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Lowest altitude seen at substep boundaries (m).
    pub min_altitude: f64,
    /// Any stage saw a pushing (clamped) tether.
    pub slack: bool,
    /// Substep after which the kite was at or below the ground; integration
    /// stops there.
    pub ground_contact: Option<usize>,
    pub substeps: usize,
    /// `(t, power W)` at every substep start, if requested.
    pub power_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: KiteState,
    pub t: f64,
    /// Energy through the drum over the step (J).
    pub energy: f64,
    /// Forces evaluated at the final state.
    pub end: ForceEvaluation,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct StepSettings {
    pub dt_sub: f64,
    pub n_sub: usize,
    pub record_power: bool,
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings {
            dt_sub: 1e-3,
            n_sub: 100,
            record_power: false,
        }
    }
}

fn evaluate_at(
    state: &KiteState,
    t: f64,
    controls: &ControlAngles,
    wind: &dyn WindField,
    mode: TetherMode,
    p: &SystemParams,
    polar: &AeroPolar,
    substep: usize,
) -> Result<ForceEvaluation, DynamicsError> {
    let pos = state.position();
    let w = wind
        .sample(pos.x, pos.y, pos.z, t)
        .map_err(|source| DynamicsError::Wind { substep, source })?;
    evaluate_forces(state, controls, &w.as_vec(), mode, p, polar).map_err(|e| e.at_substep(substep))
}

/// Advances the kite over `n_sub` RK4 substeps of `dt_sub` with fixed controls,
/// recomputing wind, forces and tension at every stage.
#[allow(clippy::too_many_arguments)]
pub fn integrate_step(
    state: &KiteState,
    t0: f64,
    controls: &ControlAngles,
    wind: &dyn WindField,
    mode: TetherMode,
    p: &SystemParams,
    polar: &AeroPolar,
    settings: StepSettings,
) -> Result<StepOutcome, DynamicsError> {
    let h = settings.dt_sub;
    let mut y = *state;
    let mut t = t0;
    let mut energy = 0.0;
    let mut diag = StepDiagnostics {
        min_altitude: y.altitude(),
        ..Default::default()
    };
    for sub in 0..settings.n_sub {
        let mut slack = false;
        let mut first_power = None;
        let (next, de) = rk4_step(&y, h, |s, dt| {
            let ev = evaluate_at(s, t + dt, controls, wind, mode, p, polar, sub)?;
            slack |= ev.slack;
            let d = derivatives(s, &ev.total(), p.m).map_err(|e| e.at_substep(sub))?;
            let power = mode.energy_force(ev.forces.tension, p) * s.r_dot;
            first_power.get_or_insert(power);
            Ok::<_, DynamicsError>((d, power))
        })?;
        if settings.record_power {
            diag.power_trace.push((t, first_power.unwrap_or(0.0)));
        }
        diag.slack |= slack;
        y = next;
        energy += de;
        t = t0 + (sub + 1) as f64 * h;
        diag.substeps = sub + 1;
        let z = y.altitude();
        diag.min_altitude = diag.min_altitude.min(z);
        if z <= 0.0 {
            diag.ground_contact = Some(sub);
            break;
        }
    }
    let end = match evaluate_at(&y, t, controls, wind, mode, p, polar, diag.substeps) {
        Ok(ev) => ev,
        // Below ground the wind may be undefined; report the contact instead.
        Err(DynamicsError::Wind { .. }) if diag.ground_contact.is_some() => {
            let still = crate::wind::ConstantField::new(0.0);
            evaluate_at(&y, t, controls, &still, mode, p, polar, diag.substeps)?
        }
        Err(e) => return Err(e),
    };
    Ok(StepOutcome {
        state: y,
        t,
        energy,
        end,
        diagnostics: diag,
    })
}
