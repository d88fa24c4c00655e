//! Per-phase reward and penalty functions. Each is a pure function of its
//! arguments.

use super::Status;

/// Failure penalty scaled down with the step index, `-100 / k^0.2`.
pub fn penalty_schedule(k: usize) -> f64 {
    let k = k.max(1) as f64;
    -100.0 / k.powf(0.2)
}

/// `1` for strictly positive arguments, `0` otherwise (including at zero).
pub fn indicator(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Energy produced over the step in kWh; a fixed -0.1 on failure.
pub fn reward_traction(delta_e_kwh: f64, status: Status) -> f64 {
    match status {
        Status::Failed(_) => -0.1,
        _ => delta_e_kwh,
    }
}

pub fn reward_t2r(theta: f64, r_dot: f64, status: Status, k: usize) -> f64 {
    match status {
        Status::Running => theta.cos() / 2.0 - r_dot / 10.0,
        Status::Goal => 100.0,
        Status::Failed(_) => penalty_schedule(k),
    }
}

/// Retraction reward. `w_rel_speed` is the relative wind magnitude (m/s),
/// `horizon` and `motor_force` enter the goal bonus for finishing early.
pub fn reward_retraction(
    r_dot: f64,
    w_rel_speed: f64,
    r: f64,
    k: usize,
    status: Status,
    horizon: usize,
    motor_force: f64,
) -> f64 {
    match status {
        Status::Running => {
            -(w_rel_speed / 100.0) * indicator(r_dot)
                + (-r_dot / 10.0 + (100.0 - w_rel_speed) / 200.0) * indicator(-r_dot)
        }
        Status::Failed(_) => 20.0 - r,
        Status::Goal => {
            let spent: f64 = (1..=k).map(|_| motor_force).sum();
            (horizon as f64 * motor_force - spent) / 100.0
        }
    }
}

/// Second transitory phase. Bank angles in radians; `phi0` is the kite azimuth
/// when the phase began.
pub fn reward_r2t(
    r_dot: f64,
    psi_prev: f64,
    psi_now: f64,
    phi0: f64,
    k: usize,
    status: Status,
) -> f64 {
    match status {
        Status::Running => {
            if phi0 * psi_now >= 0.0 {
                -0.2 * sign(r_dot) + 5.0 * (psi_prev - psi_now) * sign(psi_now)
            } else {
                -indicator(r_dot) / 2.0 - indicator(-r_dot) / 10.0
            }
        }
        Status::Goal => 600.0,
        Status::Failed(_) => penalty_schedule(k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FailReason;
    use std::f64::consts::PI;

    const CRASH: Status = Status::Failed(FailReason::GroundContact);

    #[test]
    fn penalty_values() {
        assert_eq!(penalty_schedule(1), -100.0);
        assert!((penalty_schedule(32) + 50.0).abs() < 1e-12);
        assert!((penalty_schedule(100_000) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn traction_rows() {
        // 3000 N at 3 m/s for 0.1 s
        let e = 3000.0 * 3.0 * 0.1 / 3.6e6;
        assert!((reward_traction(e, Status::Running) - 2.5e-4).abs() < 1e-18);
        assert_eq!(reward_traction(e, Status::Goal), e);
        assert_eq!(reward_traction(0.0, Status::Running), 0.0);
        assert_eq!(reward_traction(e, CRASH), -0.1);
    }

    #[test]
    fn t2r_rows() {
        assert!(reward_t2r(PI / 2.0, 0.0, Status::Running, 5).abs() < 1e-16);
        assert!((reward_t2r(0.0, -1.0, Status::Running, 5) - 0.6).abs() < 1e-15);
        assert_eq!(reward_t2r(0.3, 0.1, Status::Goal, 5), 100.0);
        assert!((reward_t2r(0.3, 0.1, CRASH, 32) + 50.0).abs() < 1e-12);
    }

    #[test]
    fn retraction_rows() {
        let run = |rd, w| reward_retraction(rd, w, 50.0, 10, Status::Running, 3000, 1200.0);
        assert!((run(-2.0, 10.0) - 0.65).abs() < 1e-15);
        assert!((run(1.0, 10.0) + 0.1).abs() < 1e-15);
        assert_eq!(run(0.0, 10.0), 0.0);
        assert_eq!(reward_retraction(-1.0, 10.0, 27.0, 260, Status::Goal, 3000, 1200.0), 32880.0);
        assert_eq!(reward_retraction(-1.0, 10.0, 87.5, 260, CRASH, 3000, 1200.0), -67.5);
    }

    #[test]
    fn r2t_rows() {
        let r = reward_r2t(-1.0, 0.30, 0.28, 0.5, 3, Status::Running);
        assert!((r - 0.3).abs() < 1e-12);
        assert_eq!(reward_r2t(2.0, 0.01, 0.02, -0.5, 3, Status::Running), -0.5);
        assert_eq!(reward_r2t(-2.0, 0.01, 0.02, -0.5, 3, Status::Running), -0.1);
        assert_eq!(reward_r2t(-2.0, 0.01, 0.02, -0.5, 3, Status::Goal), 600.0);
        assert_eq!(reward_r2t(-2.0, 0.01, 0.02, -0.5, 1, CRASH), -100.0);
    }

    #[test]
    fn indicator_zero() {
        assert_eq!(indicator(0.0), 0.0);
        assert_eq!(indicator(-0.0), 0.0);
        assert_eq!(indicator(1e-300), 1.0);
    }
}
