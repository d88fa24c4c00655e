use serde::{Deserialize, Serialize};

use super::{
    local_frame, wind_frame, AeroPolar, ControlAngles, DynamicsError, KiteState, LocalFrame,
    SystemParams, Vec3, WindFrame, EPS_WIND,
};

/// How the drum reacts to the tether.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TetherMode {
    /// Drum free-wheels against friction, driving the generator.
    Traction,
    /// Motor applies a constant reel-in torque `C` (N m).
    Retraction { torque: f64 },
    /// Rigid rod of fixed length; tension takes whatever value keeps `r_ddot = 0`.
    /// Not part of the pumping cycle, used for pendulum checks.
    Locked,
}

impl TetherMode {
    pub fn retraction_from_force(motor_force: f64, p: &SystemParams) -> Self {
        TetherMode::Retraction {
            torque: motor_force * p.drum_radius,
        }
    }

    /// Force entering the energy integral: the tether tension while generating,
    /// the motor force while reeling in.
    pub fn energy_force(&self, tension: f64, p: &SystemParams) -> f64 {
        match *self {
            TetherMode::Traction => tension,
            TetherMode::Retraction { torque } => torque / p.drum_radius,
            TetherMode::Locked => 0.0,
        }
    }
}

/// Force contributions in local components (N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub gravity: Vec3,
    pub centrifugal: Vec3,
    pub lift: Vec3,
    pub drag: Vec3,
    /// Magnitude of the tether pull, acting along `-e_r`.
    pub tension: f64,
}

impl ForceBreakdown {
    /// Radial force without the tether.
    pub fn sum_r(&self) -> f64 {
        self.gravity.z + self.centrifugal.z + self.lift.z + self.drag.z
    }

    pub fn total(&self) -> Vec3 {
        self.gravity + self.centrifugal + self.lift + self.drag - Vec3::new(0.0, 0.0, self.tension)
    }
}

pub fn gravity_force(state: &KiteState, p: &SystemParams) -> Vec3 {
    let (st, ct) = state.theta.sin_cos();
    let mg = p.m * p.g;
    Vec3::new(mg * st, 0.0, -mg * ct)
}

pub fn centrifugal_force(state: &KiteState, p: &SystemParams) -> Vec3 {
    let KiteState {
        theta,
        r,
        theta_dot: td,
        phi_dot: pd,
        r_dot: rd,
        ..
    } = *state;
    let (st, ct) = theta.sin_cos();
    Vec3::new(
        p.m * (pd * pd * r * st * ct - 2.0 * rd * td),
        p.m * (-2.0 * rd * pd * st - 2.0 * pd * td * r * ct),
        p.m * (r * td * td + r * pd * pd * st * st),
    )
}

/// Wind relative to the kite, in local components.
pub fn relative_wind(state: &KiteState, wind_world: &Vec3, frame: &LocalFrame) -> Vec3 {
    frame.to_local(wind_world) - state.velocity_local()
}

/// Lift and drag (local components) for the given relative wind and coefficients.
pub fn aero_force(
    w_rel_local: &Vec3,
    wf: &WindFrame,
    (c_l, c_d): (f64, f64),
    p: &SystemParams,
) -> (Vec3, Vec3) {
    let q = 0.5 * p.area * p.rho * w_rel_local.norm_squared();
    let drag = -wf.x_w * (c_d * q);
    let lift = -wf.z_w * (c_l * q);
    (lift, drag)
}

/// Tension before the no-push clamp. `Locked` returns the radial force balance.
pub fn tether_tension_unclamped(f_sum_r: f64, r_dot: f64, mode: TetherMode, p: &SystemParams) -> f64 {
    let (m, big_m, radius) = (p.m, p.drum_mass, p.drum_radius);
    let base = big_m * f_sum_r * radius + 2.0 * m * (r_dot / radius) * p.k_fric;
    let denom = 2.0 * m * radius + big_m * radius;
    match mode {
        TetherMode::Traction => base / denom,
        TetherMode::Retraction { torque } => (base + 2.0 * m * torque) / denom,
        TetherMode::Locked => f_sum_r,
    }
}

/// Tether tension from the drum balance, clamped at zero for the drum modes
/// since the tether cannot push.
pub fn tether_tension(f_sum_r: f64, r_dot: f64, mode: TetherMode, p: &SystemParams) -> f64 {
    let t = tether_tension_unclamped(f_sum_r, r_dot, mode, p);
    match mode {
        TetherMode::Locked => t,
        _ => t.max(0.0),
    }
}

/// Elevation of the relative wind out of the kite's tangent plane (rad).
pub fn beta_angle(w_rel_local: &Vec3) -> Result<f64, DynamicsError> {
    let speed = w_rel_local.norm();
    if speed <= EPS_WIND {
        return Err(DynamicsError::DegenerateWind { speed });
    }
    Ok((w_rel_local.z / speed).clamp(-1.0, 1.0).asin())
}

/// Everything computed from one state evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ForceEvaluation {
    pub frame: LocalFrame,
    pub w_rel: Vec3,
    pub wind_frame: Option<WindFrame>,
    pub forces: ForceBreakdown,
    /// Unclamped tension was negative.
    pub slack: bool,
}

impl ForceEvaluation {
    pub fn total(&self) -> Vec3 {
        self.forces.total()
    }

    pub fn relative_speed(&self) -> f64 {
        self.w_rel.norm()
    }

    /// Relative wind elevation, zero when there is no relative wind.
    pub fn beta(&self) -> f64 {
        beta_angle(&self.w_rel).unwrap_or(0.0)
    }
}

/// Full force balance on the kite for the given wind at its position.
///
/// Without relative wind the aerodynamic force is zero and no wind frame exists.
pub fn evaluate_forces(
    state: &KiteState,
    controls: &ControlAngles,
    wind_world: &Vec3,
    mode: TetherMode,
    p: &SystemParams,
    polar: &AeroPolar,
) -> Result<ForceEvaluation, DynamicsError> {
    let frame = local_frame(state.theta, state.phi);
    let w_rel = relative_wind(state, wind_world, &frame);
    let (wf, lift, drag) = if w_rel.norm() <= EPS_WIND {
        (None, Vec3::zeros(), Vec3::zeros())
    } else {
        let wf = wind_frame(&w_rel, controls.psi)?;
        let coeffs = polar.coefficients(controls.alpha)?;
        let (lift, drag) = aero_force(&w_rel, &wf, coeffs, p);
        (Some(wf), lift, drag)
    };
    let mut forces = ForceBreakdown {
        gravity: gravity_force(state, p),
        centrifugal: centrifugal_force(state, p),
        lift,
        drag,
        tension: 0.0,
    };
    let raw = tether_tension_unclamped(forces.sum_r(), state.r_dot, mode, p);
    forces.tension = tether_tension(forces.sum_r(), state.r_dot, mode, p);
    Ok(ForceEvaluation {
        frame,
        w_rel,
        wind_frame: wf,
        forces,
        slack: !matches!(mode, TetherMode::Locked) && raw < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn p() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn gravity_at_zenith_and_horizon() {
        let s = KiteState::at_rest(0.0, 0.3, 50.0);
        assert_eq!(gravity_force(&s, &p()), Vec3::new(0.0, 0.0, -9.81));
        let s = KiteState::at_rest(PI / 2.0, 0.0, 50.0);
        let g = gravity_force(&s, &p());
        assert!((g - Vec3::new(9.81, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn gravity_points_down_in_world() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let s = KiteState::at_rest(rng.random_range(0.0..PI), rng.random_range(-PI..PI), 10.0);
            let f = local_frame(s.theta, s.phi);
            let w = f.to_world(&gravity_force(&s, &p()));
            assert!((w - Vec3::new(0.0, 0.0, -9.81)).norm() < 1e-12);
        }
    }

    #[test]
    fn centrifugal_cases() {
        let rest = KiteState::at_rest(0.7, 0.1, 30.0);
        assert_eq!(centrifugal_force(&rest, &p()), Vec3::zeros());
        let spin = KiteState {
            phi_dot: 1.0,
            ..KiteState::at_rest(PI / 2.0, 0.0, 10.0)
        };
        let c = centrifugal_force(&spin, &p());
        assert!((c - Vec3::new(0.0, 0.0, 10.0)).norm() < 1e-12);
        let radial = KiteState {
            r_dot: 4.0,
            ..KiteState::at_rest(0.9, 0.2, 30.0)
        };
        assert_eq!(centrifugal_force(&radial, &p()), Vec3::zeros());
    }

    #[test]
    fn relative_wind_cases() {
        let s = KiteState::at_rest(PI / 2.0, 0.0, 20.0);
        let f = local_frame(s.theta, s.phi);
        let w = relative_wind(&s, &Vec3::new(10.0, 0.0, 0.0), &f);
        assert!((w - Vec3::new(0.0, 0.0, 10.0)).norm() < 1e-14);

        let s = KiteState {
            r_dot: 2.0,
            ..KiteState::at_rest(0.8, 0.4, 20.0)
        };
        let f = local_frame(s.theta, s.phi);
        assert_eq!(relative_wind(&s, &Vec3::zeros(), &f), Vec3::new(0.0, 0.0, -2.0));

        let s = KiteState {
            theta: 0.8,
            phi: 0.4,
            r: 20.0,
            theta_dot: 0.1,
            phi_dot: -0.2,
            r_dot: 1.5,
        };
        let f = local_frame(s.theta, s.phi);
        let riding = f.to_world(&s.velocity_local());
        assert!(relative_wind(&s, &riding, &f).norm() < 1e-14);
    }

    #[test]
    fn pure_drag_along_relative_wind() {
        let w = Vec3::new(5.0, -3.0, 2.0);
        let wf = wind_frame(&w, 1.5).unwrap();
        let (lift, drag) = aero_force(&w, &wf, (0.0, 0.1), &p());
        assert_eq!(lift.norm(), 0.0);
        assert!((drag.normalize() - w.normalize()).norm() < 1e-14);
    }

    #[test]
    fn lift_and_drag_directions_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut n = 0;
        while n < 10_000 {
            let w = Vec3::new(
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
            );
            let Ok(wf) = wind_frame(&w, rng.random_range(-3.0..3.0)) else { continue };
            let (lift, drag) = aero_force(&w, &wf, (0.8, 0.1), &p());
            let cos_drag = drag.dot(&w) / (drag.norm() * w.norm());
            assert!(cos_drag > 1.0 - 1e-10);
            assert!(lift.dot(&w).abs() < 1e-8 * lift.norm() * w.norm());
            let q = 0.5 * 10.0 * 1.2 * w.norm_squared();
            assert!((drag.norm() - 0.1 * q).abs() < 1e-9 * q);
            assert!((lift.norm() - 0.8 * q).abs() < 1e-9 * q);
            n += 1;
        }
    }

    #[test]
    fn quadratic_scaling() {
        let w = Vec3::new(7.0, 2.0, -1.0);
        let wf = wind_frame(&w, 2.0).unwrap();
        let (l1, d1) = aero_force(&w, &wf, (0.9, 0.12), &p());
        let w2 = w * 2.0;
        let wf2 = wind_frame(&w2, 2.0).unwrap();
        let (l2, d2) = aero_force(&w2, &wf2, (0.9, 0.12), &p());
        assert!((l2 - l1 * 4.0).norm() < 1e-12 * l2.norm());
        assert!((d2 - d1 * 4.0).norm() < 1e-12 * d2.norm());
    }

    #[test]
    fn tension_examples() {
        let p = SystemParams::default();
        let t = tether_tension(100.0, 0.0, TetherMode::Traction, &p);
        assert!((t - 200.0 / 2.4).abs() < 1e-12);
        assert_eq!(tether_tension(0.0, 0.0, TetherMode::Traction, &p), 0.0);
        let frictionless = SystemParams { k_fric: 0.0, ..p };
        let mode = TetherMode::retraction_from_force(1200.0, &frictionless);
        let t = tether_tension(0.0, 0.0, mode, &frictionless);
        assert!((t - 200.0).abs() < 1e-12);
    }

    #[test]
    fn tension_algebra_identity() {
        let p = SystemParams {
            k_fric: 0.0,
            ..SystemParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let f = rng.random_range(-5000.0..5000.0);
            let t = tether_tension_unclamped(f, rng.random_range(-20.0..20.0), TetherMode::Traction, &p);
            let lhs = t * (2.0 * p.m * p.drum_radius + p.drum_mass * p.drum_radius);
            let rhs = p.drum_mass * f * p.drum_radius;
            assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn tension_clamped_when_pushing() {
        let t = tether_tension(-300.0, 0.0, TetherMode::Traction, &p());
        assert_eq!(t, 0.0);
        let s = KiteState::at_rest(0.3, 0.0, 20.0);
        let ev = evaluate_forces(
            &s,
            &ControlAngles::new(0.0, 0.0),
            &Vec3::zeros(),
            TetherMode::Traction,
            &p(),
            &AeroPolar::placeholder(),
        )
        .unwrap();
        assert!(ev.slack);
        assert_eq!(ev.forces.tension, 0.0);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_angle(&Vec3::new(0.0, 5.0, 0.0)).unwrap(), 0.0);
        assert!((beta_angle(&Vec3::new(0.0, 0.0, 7.0)).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((beta_angle(&Vec3::new(3.0, 0.0, 3.0)).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!(beta_angle(&Vec3::zeros()).is_err());
    }

    #[test]
    fn total_force_composition() {
        let s = KiteState {
            theta: 0.9,
            phi: 0.3,
            r: 40.0,
            theta_dot: 0.2,
            phi_dot: -0.4,
            r_dot: 3.0,
        };
        let ev = evaluate_forces(
            &s,
            &ControlAngles::new(8.0, -2.0),
            &Vec3::new(10.0, 0.0, 0.0),
            TetherMode::Traction,
            &p(),
            &AeroPolar::placeholder(),
        )
        .unwrap();
        let f = ev.forces;
        let manual = f.gravity + f.centrifugal + f.lift + f.drag - Vec3::new(0.0, 0.0, f.tension);
        assert_eq!(ev.total(), manual);
        assert!(f.tension >= 0.0);
    }
}
