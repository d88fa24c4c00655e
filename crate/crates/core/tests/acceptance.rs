//! Acceptance suite. Each criterion prints one PASS/FAIL line.
//!
//! Criteria 5 and 6 train full agents and belong to the long tier:
//! `cargo test --release -p awe-core --test acceptance -- --ignored --nocapture`.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use awe_core::dynamics::{
    aero_force, centrifugal_force, derivatives, evaluate_forces, gravity_force,
    local_frame, rk4_step, tether_tension_unclamped, wind_frame, AeroPolar, ControlAngles, KiteState,
    SystemParams, TetherMode, Vec3,
};
use awe_core::env::{
    penalty_schedule, reward_r2t, reward_retraction, reward_t2r, reward_traction, Action, AweEnv,
    FailReason, Phase, Policy, Status,
};
use awe_core::harness::{
    checkpoint_path, derive_seed, evaluate, train, AgentPolicy, EvaluateOptions, RunConfig, TrainOptions,
    WindSpec,
};
use awe_core::td3::{grad_check, Batch, Mlp, OutputActivation, ReplayBuffer, Td3Agent, Td3Config, Transition};
use awe_core::wind::{load_gridded, write_gridded, ConstantField, GriddedField, WindField};
use nalgebra::{Matrix2, Vector2};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Bypasses libtest output capture.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn run_criterion(id: u32, title: &str, f: impl FnOnce() -> Check) -> bool {
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match &res {
        Ok(()) => report(&format!("criterion {id} [{title}]: PASS")),
        Err(e) => report(&format!("criterion {id} [{title}]: FAIL: {e}")),
    }
    res.is_ok()
}

// ---------- 1: physics invariants ----------

fn spherical(theta: f64, phi: f64, r: f64) -> Vec3 {
    Vec3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos())
}

fn physics_invariants() -> Check {
    let p = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let theta = rng.random_range(0.01..3.13);
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let f = local_frame(theta, phi);
        let basis = [f.e_theta, f.e_phi, f.e_r];
        for i in 0..3 {
            for j in 0..3 {
                let d = basis[i].dot(&basis[j]) - if i == j { 1.0 } else { 0.0 };
                ensure(d.abs() < 1e-10, || format!("local frame dot({i},{j}) off by {d:e}"))?;
            }
        }
        // directions of the coordinate lines, by central differences
        let h = 1e-6;
        let d_theta = (spherical(theta + h, phi, 1.0) - spherical(theta - h, phi, 1.0)).normalize();
        let d_phi = (spherical(theta, phi + h, 1.0) - spherical(theta, phi - h, 1.0)).normalize();
        ensure((d_theta - f.e_theta).norm() < 1e-8, || "e_theta is not along increasing theta".into())?;
        ensure((d_phi - f.e_phi).norm() < 1e-8, || "e_phi is not along increasing phi".into())?;
        ensure((spherical(theta, phi, 1.0) - f.e_r).norm() < 1e-12, || "e_r is not radial".into())?;

        let g_world = f.to_world(&gravity_force(&KiteState::at_rest(theta, phi, 50.0), &p));
        ensure((g_world - Vec3::new(0.0, 0.0, -p.m * p.g)).norm() < 1e-12, || format!("gravity in world axes {g_world:?}"))?;

        let w_rel = Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-5.0..5.0));
        let psi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let Ok(wf) = wind_frame(&w_rel, psi) else { continue };
        let axes = [wf.x_w, wf.y_w, wf.z_w];
        for i in 0..3 {
            for j in 0..3 {
                let d = axes[i].dot(&axes[j]) - if i == j { 1.0 } else { 0.0 };
                ensure(d.abs() < 1e-10, || format!("wind frame dot({i},{j}) off by {d:e}"))?;
            }
        }
        let (cl, cd) = (rng.random_range(0.2..1.0), rng.random_range(0.05..0.2));
        let (lift, drag) = aero_force(&w_rel, &wf, (cl, cd), &p);
        let cos_d = drag.dot(&w_rel) / (drag.norm() * w_rel.norm());
        ensure(cos_d > 1.0 - 1e-10, || format!("drag not along relative wind, cos {cos_d}"))?;
        let cos_l = lift.dot(&w_rel) / (lift.norm() * w_rel.norm());
        ensure(cos_l.abs() < 1e-8, || format!("lift not normal to relative wind, cos {cos_l:e}"))?;
        let q = 0.5 * p.rho * p.area * w_rel.norm_squared();
        ensure((lift.norm() - cl * q).abs() < 1e-9 * cl * q, || "lift magnitude".into())?;
        ensure((drag.norm() - cd * q).abs() < 1e-9 * cd * q, || "drag magnitude".into())?;

        let s: f64 = rng.random_range(0.5..3.0);
        let wf_s = wind_frame(&(w_rel * s), psi).map_err(|e| e.to_string())?;
        let (lift_s, drag_s) = aero_force(&(w_rel * s), &wf_s, (cl, cd), &p);
        ensure((lift_s - lift * (s * s)).norm() <= 1e-12 * lift_s.norm(), || "lift does not scale with s^2".into())?;
        ensure((drag_s - drag * (s * s)).norm() <= 1e-12 * drag_s.norm(), || "drag does not scale with s^2".into())?;
    }

    // drum and kite share the radial acceleration; solve the 2x2 system directly
    for _ in 0..1000 {
        let q = SystemParams {
            k_fric: rng.random_range(0.0..3.0),
            ..p
        };
        let f_r = rng.random_range(-500.0..5000.0);
        let r_dot = rng.random_range(-10.0..10.0);
        let torque = rng.random_range(0.0..500.0);
        for (mode, tq) in [(TetherMode::Traction, 0.0), (TetherMode::Retraction { torque }, torque)] {
            // m a + T = F_r ;  (M/2) a - T = -k r_dot / R^2 - torque / R
            let a = Matrix2::new(q.m, 1.0, 0.5 * q.drum_mass, -1.0);
            let b = Vector2::new(
                f_r,
                -q.k_fric * r_dot / (q.drum_radius * q.drum_radius) - tq / q.drum_radius,
            );
            let sol = a.lu().solve(&b).ok_or("singular drum system")?;
            let t = tether_tension_unclamped(f_r, r_dot, mode, &q);
            ensure((t - sol[1]).abs() <= 1e-9 * sol[1].abs().max(1.0), || format!("tension {t} vs {}", sol[1]))?;
        }
        let frictionless = SystemParams { k_fric: 0.0, ..q };
        let t = tether_tension_unclamped(f_r, r_dot, TetherMode::Traction, &frictionless);
        let (m, mm, rr) = (q.m, q.drum_mass, q.drum_radius);
        let resid = t * (2.0 * m * rr + mm * rr) - mm * f_r * rr;
        ensure(resid.abs() <= 1e-12 * (mm * f_r * rr).abs().max(1.0), || format!("tension identity residual {resid:e}"))?;
    }

    for _ in 0..1000 {
        let s = KiteState::at_rest(rng.random_range(0.1..1.5), rng.random_range(-1.5..1.5), rng.random_range(5.0..120.0));
        ensure(centrifugal_force(&s, &p) == Vec3::zeros(), || "centrifugal force at rest is not zero".into())?;
    }
    Ok(())
}

// ---------- 2: integrator ----------

// zero wing area switches the aerodynamic force off exactly
fn inert_params() -> SystemParams {
    SystemParams { area: 0.0, ..SystemParams::default() }
}

fn pendulum_rhs(p: SystemParams, polar: AeroPolar) -> impl FnMut(&KiteState, f64) -> Result<(awe_core::dynamics::StateDerivative, f64), String> {
    move |s: &KiteState, _| {
        let ev = evaluate_forces(s, &ControlAngles::new(0.0, 0.0), &Vec3::zeros(), TetherMode::Locked, &p, &polar)
            .map_err(|e| e.to_string())?;
        Ok((derivatives(s, &ev.total(), p.m).map_err(|e| e.to_string())?, 0.0))
    }
}

fn swing(h: f64, t_end: f64) -> Result<KiteState, String> {
    let p = inert_params();
    let mut f = pendulum_rhs(p, AeroPolar::default());
    let mut s = KiteState { theta: 2.4, phi: 0.2, r: 20.0, theta_dot: 0.0, phi_dot: 0.35, r_dot: 0.0 };
    let n = (t_end / h).round() as usize;
    for _ in 0..n {
        s = rk4_step(&s, h, &mut f)?.0;
    }
    Ok(s)
}

fn pendulum_energy(s: &KiteState, p: &SystemParams) -> f64 {
    let v2 = (s.r * s.theta_dot).powi(2) + (s.r * s.theta.sin() * s.phi_dot).powi(2) + s.r_dot.powi(2);
    0.5 * p.m * v2 + p.m * p.g * s.r * s.theta.cos()
}

fn dist(a: &KiteState, b: &KiteState) -> f64 {
    [a.theta - b.theta, a.phi - b.phi, a.theta_dot - b.theta_dot, a.phi_dot - b.phi_dot]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

fn integrator() -> Check {
    let reference = swing(1e-5, 1.0)?;
    let e1 = dist(&swing(0.05, 1.0)?, &reference);
    let e2 = dist(&swing(0.025, 1.0)?, &reference);
    let order = (e1 / e2).log2();
    ensure((3.5..=4.5).contains(&order), || format!("observed order {order:.3} (errors {e1:e}, {e2:e})"))?;

    // hanging below the pivot, so the swing stays clear of the singular axis
    let p = inert_params();
    let mut f = pendulum_rhs(p, AeroPolar::default());
    let mut s = KiteState { theta: 2.4, phi: 0.2, r: 20.0, theta_dot: 0.1, phi_dot: 0.35, r_dot: 0.0 };
    let e0 = pendulum_energy(&s, &p);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        s = rk4_step(&s, 1e-3, &mut f)?.0;
        worst = worst.max(((pendulum_energy(&s, &p) - e0) / e0).abs());
    }
    ensure(worst < 1e-3, || format!("energy drift {worst:e}"))?;
    ensure((s.r - 20.0).abs() < 1e-9, || "tether length drifted".into())
}

// ---------- 3: rewards ----------

fn rewards() -> Check {
    let crash = Status::Failed(FailReason::GroundContact);
    let e = 3000.0 * 3.0 * 0.1 / 3.6e6;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let rows = [
        ("traction energy", reward_traction(e, Status::Running), 2.5e-4),
        ("traction crash", reward_traction(e, crash), -0.1),
        ("traction idle", reward_traction(0.0, Status::Running), 0.0),
        ("t2r horizontal", reward_t2r(std::f64::consts::FRAC_PI_2, 0.0, Status::Running, 3), 0.0),
        ("t2r overhead reeling in", reward_t2r(0.0, -1.0, Status::Running, 3), 0.6),
        ("t2r goal", reward_t2r(0.4, 0.1, Status::Goal, 3), 100.0),
        ("t2r failure k=32", reward_t2r(0.4, 0.1, crash, 32), -50.0),
        ("retraction reeling in", reward_retraction(-2.0, 10.0, 50.0, 10, Status::Running, 3000, 1200.0), 0.65),
        ("retraction reeling out", reward_retraction(1.0, 10.0, 50.0, 10, Status::Running, 3000, 1200.0), -0.1),
        ("retraction still", reward_retraction(0.0, 10.0, 50.0, 10, Status::Running, 3000, 1200.0), 0.0),
        ("retraction goal k=260", reward_retraction(-1.0, 10.0, 27.0, 260, Status::Goal, 3000, 1200.0), 32880.0),
        ("retraction failure", reward_retraction(-1.0, 10.0, 87.5, 260, crash, 3000, 1200.0), 20.0 - 87.5),
        ("r2t same side", reward_r2t(-1.0, 0.30, 0.28, 0.5, 3, Status::Running), 0.3),
        ("r2t opposite side out", reward_r2t(2.0, 0.01, 0.02, -0.5, 3, Status::Running), -0.5),
        ("r2t opposite side in", reward_r2t(-2.0, 0.01, 0.02, -0.5, 3, Status::Running), -0.1),
        ("r2t goal", reward_r2t(-2.0, 0.01, 0.02, -0.5, 3, Status::Goal), 600.0),
        ("r2t failure k=1", reward_r2t(-2.0, 0.01, 0.02, -0.5, 1, crash), -100.0),
        ("penalty k=1", penalty_schedule(1), -100.0),
        ("penalty k=32", penalty_schedule(32), -50.0),
    ];
    for (name, got, want) in rows {
        ensure(close(got, want), || format!("{name}: {got} != {want}"))?;
    }
    ensure(penalty_schedule(1) == -100.0, || "P(1) not exact".into())?;
    ensure(reward_retraction(-1.0, 10.0, 27.0, 260, Status::Goal, 3000, 1200.0) == 32880.0, || "goal formula not exact".into())
}

// ---------- 4: TD3 ----------

fn td3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for out in [OutputActivation::Tanh, OutputActivation::Identity] {
        let net: Mlp<f64> = Mlp::new(&[5, 16, 12, 2], out, &mut rng);
        let x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let err = grad_check(&net, x.view(), 1e-5);
        ensure(err < 1e-4, || format!("gradient check error {err:e}"))?;
    }

    // combined replay: newest always present, the rest uniform
    let cap = 50;
    let mut buf = ReplayBuffer::new(cap, 1, 1);
    for i in 0..cap + 7 {
        buf.push(&Transition { obs: vec![i as f32], action: vec![0.0], reward: i as f32, next_obs: vec![0.0], done: false });
    }
    let newest = buf.newest_slot().unwrap();
    let mut counts = vec![0u64; cap];
    let batch = cap;
    let batches = 100_000 / batch;
    for _ in 0..batches {
        let slots = buf.sample_slots(batch, &mut rng);
        ensure(slots.contains(&newest), || "batch without the newest transition".into())?;
        for &s in &slots[..batch - 1] {
            counts[s] += 1;
        }
    }
    let n = (batches * (batch - 1)) as f64;
    let expected = n / cap as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 49 degrees of freedom
    ensure(chi2 < 74.919, || format!("uniformity chi-square {chi2:.2}"))?;

    // overfit one batch with gamma = 0
    let cfg = Td3Config { gamma: 0.0, hidden: vec![64, 64], batch_size: 32, warmup_steps: 0, ..Td3Config::default() };
    let mut agent = Td3Agent::new(Phase::Traction, 3, 2, cfg, 9).map_err(|e| e.to_string())?;
    let frozen = Batch {
        obs: Array2::from_shape_fn((32, 3), |_| rng.random_range(-1.0..1.0)),
        actions: Array2::from_shape_fn((32, 2), |_| rng.random_range(-1.0..1.0)),
        rewards: Array1::from_shape_fn(32, |_| rng.random_range(-1.0..1.0)),
        next_obs: Array2::from_shape_fn((32, 3), |_| rng.random_range(-1.0..1.0)),
        done: Array1::zeros(32),
    };
    let mut prev = [f64::INFINITY; 2];
    for k in 0..200 {
        let info = agent.update(&frozen).map_err(|e| e.to_string())?;
        let now = [info.critic1_loss, info.critic2_loss];
        ensure(now[0] < prev[0] && now[1] < prev[1], || format!("critic loss rose at update {k}: {prev:?} -> {now:?}"))?;
        prev = now;
    }

    // policy delay and soft update
    let tau = 0.37;
    let cfg = Td3Config { tau, hidden: vec![16, 16], batch_size: 8, warmup_steps: 0, ..Td3Config::default() };
    let mut agent = Td3Agent::new(Phase::Traction, 3, 2, cfg, 4).map_err(|e| e.to_string())?;
    let small = Batch {
        obs: frozen.obs.slice(ndarray::s![..8, ..]).to_owned(),
        actions: frozen.actions.slice(ndarray::s![..8, ..]).to_owned(),
        rewards: frozen.rewards.slice(ndarray::s![..8]).to_owned(),
        next_obs: frozen.next_obs.slice(ndarray::s![..8, ..]).to_owned(),
        done: Array1::zeros(8),
    };
    for _ in 0..6 {
        let actor_before = agent.actor().flat_params();
        let target_before = agent.actor_target().flat_params();
        let critic_target_before = agent.critic_targets().0.flat_params();
        let info = agent.update(&small).map_err(|e| e.to_string())?;
        let actor_after = agent.actor().flat_params();
        if info.update % 2 == 1 {
            ensure(actor_before == actor_after, || format!("actor moved on update {}", info.update))?;
            ensure(target_before == agent.actor_target().flat_params(), || "target moved off schedule".into())?;
            ensure(info.actor_loss.is_none(), || "actor loss on an odd update".into())?;
        } else {
            ensure(actor_before != actor_after, || "actor did not move on an even update".into())?;
            let tau = tau as f32;
            let expect: Vec<f32> = target_before.iter().zip(&actor_after).map(|(t, o)| (1.0 - tau) * t + tau * o).collect();
            ensure(expect == agent.actor_target().flat_params(), || "actor target is not the exact blend".into())?;
            let c_now = agent.critics().0.flat_params();
            let expect: Vec<f32> = critic_target_before.iter().zip(&c_now).map(|(t, o)| (1.0 - tau) * t + tau * o).collect();
            ensure(expect == agent.critic_targets().0.flat_params(), || "critic target is not the exact blend".into())?;
        }
    }
    let cfg = Td3Config { tau: 1.0, policy_delay: 1, hidden: vec![16, 16], batch_size: 8, warmup_steps: 0, ..Td3Config::default() };
    let mut agent = Td3Agent::new(Phase::Traction, 3, 2, cfg, 4).map_err(|e| e.to_string())?;
    agent.update(&small).map_err(|e| e.to_string())?;
    ensure(agent.actor().flat_params() == agent.actor_target().flat_params(), || "tau = 1 did not copy the actor".into())?;
    let (c1, c2) = agent.critics();
    let (t1, t2) = agent.critic_targets();
    ensure(c1.flat_params() == t1.flat_params() && c2.flat_params() == t2.flat_params(), || "tau = 1 did not copy the critics".into())
}

// ---------- 7: wind field ----------

fn wind() -> Check {
    let (nx, ny, nz, nt) = (6, 5, 4, 3);
    let (lx, ly, lz, dt) = (60.0, 50.0, 90.0, 2.0);
    let node_value = |x: f64, y: f64, z: f64, t: f64| {
        [
            10.0 + (0.3 * x).sin() + 0.01 * z + 0.2 * t,
            (0.2 * y).cos() - 0.05 * x,
            0.1 * (x - y) + 0.03 * z * t,
        ]
    };
    let field = GriddedField::from_fn(nx, ny, nz, nt, lx, ly, lz, dt, node_value).map_err(|e| e.to_string())?;
    let (dx, dy, dz) = (lx / nx as f64, ly / ny as f64, lz / (nz - 1) as f64);
    for it in 0..nt {
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let (x, y, z, t) = (ix as f64 * dx, iy as f64 * dy, iz as f64 * dz, it as f64 * dt);
                    let got = field.sample(x, y, z, t).map_err(|e| e.to_string())?;
                    let want = node_value(x, y, z, t).map(|c| c as f32 as f64);
                    ensure([got.u, got.v, got.w] == want, || format!("node ({ix},{iy},{iz},{it}) not exact"))?;
                    let wrapped = field.sample(x + lx, y - 2.0 * ly, z, t).map_err(|e| e.to_string())?;
                    ensure(wrapped == got, || "periodic wrap is not exact".into())?;
                }
            }
        }
    }
    for ix in 0..nx {
        let (x0, x1) = (ix as f64 * dx, ((ix + 1) % nx) as f64 * dx);
        let (y, z) = (2.0 * dy, dz);
        let a = node_value(x0, y, z, 0.0).map(|c| c as f32 as f64);
        let b = node_value(x1, y, z, 0.0).map(|c| c as f32 as f64);
        let mid = field.sample(ix as f64 * dx + 0.5 * dx, y, z, 0.0).map_err(|e| e.to_string())?;
        for (k, got) in [mid.u, mid.v, mid.w].into_iter().enumerate() {
            let want = 0.5 * (a[k] + b[k]);
            ensure((got - want).abs() <= 1e-12, || format!("midpoint component {k}: {got} vs {want}"))?;
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("field.awew");
    write_gridded(&path, &field).map_err(|e| e.to_string())?;
    let back = load_gridded(&path).map_err(|e| e.to_string())?;
    ensure(back == field, || "file round trip changed the field".into())?;
    ensure(
        back.data().iter().zip(field.data()).all(|(a, b)| a.to_bits() == b.to_bits()),
        || "payload bits differ".into(),
    )
}

// ---------- 8: determinism ----------

fn small_run_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig { seed: 17, out_dir: out.to_path_buf(), trajectory_every: 4, checkpoint_every: 5, ..RunConfig::default() };
    let t = cfg.agents.get_mut(Phase::Traction);
    t.episodes = 12;
    t.warmup_steps = 150;
    t.hidden = vec![24, 24];
    t.batch_size = 16;
    cfg
}

fn files_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = TrainOptions { phase: Some(Phase::Traction), ..Default::default() };
    train(&small_run_config(a.path()), &opts).map_err(|e| e.to_string())?;
    train(&small_run_config(b.path()), &opts).map_err(|e| e.to_string())?;
    let outputs = |d: &Path| -> Vec<std::path::PathBuf> {
        files_under(d).into_iter().filter(|p| !p.starts_with("manifest-train.json")).collect()
    };
    let compared = outputs(a.path());
    ensure(compared.iter().filter(|p| p.starts_with("trajectories")).count() == 3, || format!("unexpected outputs {compared:?}"))?;
    ensure(compared == outputs(b.path()), || "different file sets".into())?;
    for rel in &compared {
        let x = std::fs::read(a.path().join(rel)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(rel)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{} differs between runs", rel.display()))?;
    }
    Ok(())
}

#[test]
fn acceptance_suite() {
    let mut ok = true;
    ok &= run_criterion(1, "physics invariants", physics_invariants);
    ok &= run_criterion(2, "integrator order and energy drift", integrator);
    ok &= run_criterion(3, "reward conformance", rewards);
    ok &= run_criterion(4, "TD3 correctness", td3);
    report("criterion 5 [desk-scale traction learning]: NOT RUN in the default tier (long tier, --ignored)");
    report("criterion 6 [full-cycle reproduction]: NOT RUN in the default tier (long tier, --ignored)");
    ok &= run_criterion(7, "wind field", wind);
    ok &= run_criterion(8, "end-to-end determinism", determinism);
    assert!(ok, "acceptance criteria failed");
}

// ---------- long tier ----------

fn crosswind_crossings(env: &mut AweEnv, agent: &Td3Agent, seed: u64) -> Result<(usize, Status), String> {
    let mut obs = env.reset(Phase::Traction, seed, None).map_err(|e| e.to_string())?;
    let mut policy = AgentPolicy(agent);
    let mut side = env.state().position().y.signum();
    let mut crossings = 0;
    loop {
        let r = env.step(policy.act(&obs)).map_err(|e| e.to_string())?;
        let y = env.state().position().y;
        if y != 0.0 && y.signum() != side {
            crossings += 1;
            side = y.signum();
        }
        obs = r.obs;
        if r.status.is_terminal() {
            return Ok((crossings, r.status));
        }
    }
}

fn desk_scale_learning() -> Check {
    let dir = std::env::var("AWE_ACCEPTANCE_DIR").map(std::path::PathBuf::from).unwrap_or_else(|_| std::env::temp_dir().join("awe-criterion-5"));
    let cfg = RunConfig { seed: 5, out_dir: dir.clone(), wind: WindSpec::Constant { speed: 10.0 }, ..RunConfig::default() };
    ensure(cfg.agents.traction.episodes <= 1600, || "episode budget exceeded".into())?;
    let opts = TrainOptions { phase: Some(Phase::Traction), resume: true, verbose: true, ..Default::default() };
    train(&cfg, &opts).map_err(|e| e.to_string())?;

    let metrics = std::fs::read_to_string(dir.join("metrics/traction.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = metrics.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let last = &rows[rows.len().saturating_sub(100)..];
    let crash_rate = last.iter().filter(|r| r[6] == "1").count() as f64 / last.len() as f64;
    let energy = last.iter().map(|r| r[3].parse::<f64>().unwrap()).sum::<f64>() / last.len() as f64;

    let agent = Td3Agent::load(&checkpoint_path(&dir, Phase::Traction)).map_err(|e| e.to_string())?;
    let mut env = AweEnv::new(cfg.env.clone(), Arc::new(ConstantField::new(10.0))).map_err(|e| e.to_string())?;
    let mut total = 0usize;
    let runs = 20;
    for i in 0..runs {
        total += crosswind_crossings(&mut env, &agent, derive_seed(cfg.seed, &[0xC5, i]))?.0;
    }
    let mean_crossings = total as f64 / runs as f64;
    println!(
        "last 100 training episodes: crash rate {crash_rate:.3}, mean energy {energy:.6} kWh; learned policy: {mean_crossings:.2} crosswind crossings per episode"
    );
    ensure(crash_rate < 0.2, || format!("crash rate {crash_rate:.3} >= 0.2"))?;
    ensure(energy > 0.0, || format!("mean energy {energy:e} kWh"))?;
    ensure(mean_crossings >= 4.0, || format!("{mean_crossings:.2} crossings per episode"))
}

#[test]
#[ignore = "long tier: trains a traction agent for up to 1600 episodes"]
fn criterion_5_desk_scale_learning() {
    assert!(run_criterion(5, "desk-scale traction learning", desk_scale_learning));
}

fn full_cycle() -> Check {
    let dir = std::env::var("AWE_ACCEPTANCE_DIR").map(std::path::PathBuf::from).unwrap_or_else(|_| std::env::temp_dir().join("awe-criterion-6"));
    let cfg = RunConfig { seed: 6, out_dir: dir.clone(), ..RunConfig::default() };
    train(&cfg, &TrainOptions { phase: None, resume: true, verbose: true, ..Default::default() }).map_err(|e| e.to_string())?;
    let report = evaluate(
        &cfg,
        &EvaluateOptions { checkpoints: dir.join("checkpoints"), episodes: 100, wind: None, out: None },
    )
    .map_err(|e| e.to_string())?;
    print!("{}", report.to_text());
    let v = &report.all_episodes;
    let row = |p: Phase| &v.rows[p.index()];
    ensure(v.total.energy_kwh > 0.0, || format!("net cycle energy {}", v.total.energy_kwh))?;
    let consumed = (row(Phase::Retraction).energy_kwh + row(Phase::R2T).energy_kwh).abs();
    let ratio = row(Phase::Traction).energy_kwh / consumed;
    ensure(ratio >= 1.5, || format!("traction / reel-in energy ratio {ratio:.2}"))?;
    let dur = row(Phase::Retraction).duration_s / row(Phase::Traction).duration_s;
    let reference = 26.01 / 8.08;
    ensure(
        dur > 1.0 && (dur / reference - 1.0).abs() <= 0.5,
        || format!("retraction / traction duration ratio {dur:.2}, reference {reference:.2}"),
    )
}

#[test]
#[ignore = "long tier: trains all four agents with the full episode budgets"]
fn criterion_6_full_cycle() {
    assert!(run_criterion(6, "full-cycle reproduction", full_cycle));
}

#[test]
fn actions_move_controls_by_one_degree() {
    let mut env = AweEnv::new(Default::default(), Arc::new(ConstantField::new(10.0))).unwrap();
    env.reset(Phase::Traction, 3, None).unwrap();
    let before = env.controls();
    env.step(Action::new(2.0, 0.0)).unwrap();
    let after = env.controls();
    assert!((after.alpha - (before.alpha + 1.0).min(18.0)).abs() < 1e-12);
    assert_eq!(after.psi, before.psi);
}
