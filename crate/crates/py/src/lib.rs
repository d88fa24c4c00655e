//! Python bindings: environment stepping, agents, wind sampling, rewards and
//! the run commands.

use std::path::PathBuf;
use std::sync::Arc;

use awe_core::env::{self, Action, AweEnv, EntryState, Phase, Status};
use awe_core::harness::{self, EvaluateOptions, HarnessError, RunConfig, SimulationScript, TrainOptions, WindSpec};
use awe_core::td3::{Td3Agent, Td3Config};
use awe_core::wind::WindField;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_phase(s: &str) -> PyResult<Phase> {
    s.parse().map_err(value_err)
}

fn run_config(config: Option<&str>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::from_json(config.unwrap_or("{}")).map_err(harness_err)?;
    cfg.finalize().map_err(harness_err)?;
    Ok(cfg)
}

fn status_str(s: Status) -> String {
    s.label()
}

/// One pumping-cycle environment.
#[pyclass(name = "Env")]
struct PyEnv {
    inner: AweEnv,
}

#[pymethods]
impl PyEnv {
    /// `config` is a JSON run configuration (only `env` and `wind` are used);
    /// `wind` overrides it with the command-line short form.
    #[new]
    #[pyo3(signature = (config=None, wind=None))]
    fn new(config: Option<&str>, wind: Option<&str>) -> PyResult<Self> {
        let cfg = run_config(config)?;
        let spec = match wind {
            Some(w) => WindSpec::parse_override(w).map_err(harness_err)?,
            None => cfg.wind.clone(),
        };
        let field = spec.build().map_err(harness_err)?;
        Ok(PyEnv {
            inner: AweEnv::new(cfg.env, field).map_err(value_err)?,
        })
    }

    /// Starts an episode and returns the observation as a dict. `entry` is a
    /// dict as returned by `entry_state()`.
    #[pyo3(signature = (phase, seed=0, entry=None))]
    fn reset<'py>(&mut self, py: Python<'py>, phase: &str, seed: u64, entry: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
        let entry: Option<EntryState> = entry.map(serde_json::from_str).transpose().map_err(value_err)?;
        let obs = self.inner.reset(parse_phase(phase)?, seed, entry).map_err(value_err)?;
        to_py(py, &obs)
    }

    /// Applies control increments in degrees; returns
    /// `(observation, reward, status, energy_kwh)`.
    fn step<'py>(&mut self, py: Python<'py>, d_alpha: f64, d_psi: f64) -> PyResult<(Bound<'py, PyAny>, f64, String, f64)> {
        let r = self.inner.step(Action::new(d_alpha, d_psi)).map_err(value_err)?;
        Ok((to_py(py, &r.obs)?, r.reward, status_str(r.status), r.energy_kwh))
    }

    /// Network input for the current observation.
    fn normalized_observation(&self) -> Vec<f32> {
        self.inner.observation().normalized()
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.state())
    }

    /// `(alpha, psi)` in degrees.
    fn controls(&self) -> (f64, f64) {
        let c = self.inner.controls();
        (c.alpha, c.psi)
    }

    fn position(&self) -> (f64, f64, f64) {
        let p = self.inner.state().position();
        (p.x, p.y, p.z)
    }

    /// JSON text that `reset` accepts as `entry`.
    fn entry_state(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.entry_state()).map_err(value_err)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn phase(&self) -> String {
        self.inner.phase().name().into()
    }

    #[getter]
    fn status(&self) -> String {
        status_str(self.inner.status())
    }

    /// `(energy_kwh, duration_s)` since the phase began.
    fn phase_totals(&self) -> (f64, f64) {
        let (j, s) = self.inner.phase_totals();
        (j / 3.6e6, s)
    }
}

/// A TD3 agent for one phase.
#[pyclass(name = "Agent")]
struct PyAgent {
    inner: Td3Agent,
}

#[pymethods]
impl PyAgent {
    /// Fresh agent with the phase defaults, optionally overridden by a JSON
    /// object of agent settings.
    #[new]
    #[pyo3(signature = (phase, seed=0, config=None))]
    fn new(phase: &str, seed: u64, config: Option<&str>) -> PyResult<Self> {
        let phase = parse_phase(phase)?;
        let mut base = serde_json::to_value(Td3Config::default_for(phase)).map_err(value_err)?;
        if let Some(c) = config {
            let overlay: serde_json::Value = serde_json::from_str(c).map_err(value_err)?;
            let serde_json::Value::Object(o) = overlay else {
                return Err(PyValueError::new_err("agent config must be a JSON object"));
            };
            for (k, v) in o {
                base[k] = v;
            }
        }
        let cfg: Td3Config = serde_json::from_value(base).map_err(value_err)?;
        let inner = Td3Agent::new(phase, phase.obs_dim(), 2, cfg, seed).map_err(value_err)?;
        Ok(PyAgent { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyAgent {
            inner: Td3Agent::load(&path).map_err(value_err)?,
        })
    }

    #[pyo3(signature = (path, with_replay=false))]
    fn save(&self, path: PathBuf, with_replay: bool) -> PyResult<()> {
        self.inner.save(&path, with_replay).map_err(value_err)
    }

    /// Deterministic action in `[-1, 1]^2` for a normalized observation.
    fn act(&self, obs: Vec<f32>) -> PyResult<Vec<f32>> {
        if obs.len() != self.inner.obs_dim() {
            return Err(PyValueError::new_err(format!("expected {} inputs", self.inner.obs_dim())));
        }
        Ok(self.inner.act(&obs))
    }

    /// Stores a transition; returns the critic losses when an update ran.
    fn observe(&mut self, obs: Vec<f32>, action: Vec<f32>, reward: f32, next_obs: Vec<f32>, done: bool) -> PyResult<Option<(f64, f64)>> {
        let (o, a) = (self.inner.obs_dim(), self.inner.act_dim());
        if obs.len() != o || next_obs.len() != o || action.len() != a {
            return Err(PyValueError::new_err("transition has the wrong width"));
        }
        let info = self
            .inner
            .observe(&awe_core::td3::Transition { obs, action, reward, next_obs, done })
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(info.map(|i| (i.critic1_loss, i.critic2_loss)))
    }

    /// Exploratory action: uniform during warmup, noisy actor afterwards.
    fn explore(&mut self, obs: Vec<f32>) -> Vec<f32> {
        self.inner.explore(&obs)
    }

    #[getter]
    fn phase(&self) -> String {
        self.inner.phase().name().into()
    }

    #[getter]
    fn updates(&self) -> u64 {
        self.inner.updates()
    }

    #[getter]
    fn env_steps(&self) -> u64 {
        self.inner.env_steps()
    }
}

/// Wind velocity `(u, v, w)` of a wind spec such as `constant:10`.
#[pyfunction]
fn wind_sample(spec: &str, x: f64, y: f64, z: f64, t: f64) -> PyResult<(f64, f64, f64)> {
    let field: Arc<dyn WindField> = WindSpec::parse_override(spec).and_then(|s| s.build()).map_err(harness_err)?;
    let s = field.sample(x, y, z, t).map_err(value_err)?;
    Ok((s.u, s.v, s.w))
}

#[pyfunction]
fn penalty_schedule(k: usize) -> f64 {
    env::penalty_schedule(k)
}

fn parse_status(s: &str) -> PyResult<Status> {
    s.parse().map_err(value_err)
}

#[pyfunction]
fn reward_traction(delta_e_kwh: f64, status: &str) -> PyResult<f64> {
    Ok(env::reward_traction(delta_e_kwh, parse_status(status)?))
}

#[pyfunction]
fn reward_t2r(theta: f64, r_dot: f64, status: &str, k: usize) -> PyResult<f64> {
    Ok(env::reward_t2r(theta, r_dot, parse_status(status)?, k))
}

#[pyfunction]
fn reward_retraction(r_dot: f64, w_rel: f64, r: f64, k: usize, status: &str, horizon: usize, motor_force: f64) -> PyResult<f64> {
    Ok(env::reward_retraction(r_dot, w_rel, r, k, parse_status(status)?, horizon, motor_force))
}

#[pyfunction]
fn reward_r2t(r_dot: f64, psi_prev: f64, psi_now: f64, phi0: f64, k: usize, status: &str) -> PyResult<f64> {
    Ok(env::reward_r2t(r_dot, psi_prev, psi_now, phi0, k, parse_status(status)?))
}

/// Runs a JSON simulation script in memory and returns
/// `(summary, trajectory_csv_text)`.
#[pyfunction]
#[pyo3(signature = (script, config=None))]
fn simulate<'py>(py: Python<'py>, script: &str, config: Option<&str>) -> PyResult<(Bound<'py, PyAny>, String)> {
    let cfg = run_config(config)?;
    let script: SimulationScript = serde_json::from_str(script).map_err(value_err)?;
    let run = script.run(&cfg).map_err(harness_err)?;
    Ok((to_py(py, &run.summary)?, env::trajectory_to_string(&run.rows)))
}

/// Trains from a config file; returns one summary dict per phase trained.
#[pyfunction]
#[pyo3(signature = (config_path, phase=None, resume=false))]
fn train<'py>(py: Python<'py>, config_path: PathBuf, phase: Option<&str>, resume: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = RunConfig::load(&config_path).map_err(harness_err)?;
    let opts = TrainOptions {
        phase: phase.map(parse_phase).transpose()?,
        resume,
        ..Default::default()
    };
    let out = harness::train(&cfg, &opts).map_err(harness_err)?;
    to_py(py, &out)
}

/// Evaluates four checkpoints and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (config_path, checkpoints, episodes=100, wind=None))]
fn evaluate<'py>(py: Python<'py>, config_path: PathBuf, checkpoints: PathBuf, episodes: usize, wind: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = RunConfig::load(&config_path).map_err(harness_err)?;
    let wind = wind.map(WindSpec::parse_override).transpose().map_err(harness_err)?;
    let report = harness::evaluate(&cfg, &EvaluateOptions { checkpoints, episodes, wind, out: None }).map_err(harness_err)?;
    to_py(py, &report)
}

/// Writes SVG charts for trajectory files; returns the written paths.
#[pyfunction]
fn plot(trajectories: Vec<PathBuf>, out: PathBuf) -> PyResult<Vec<PathBuf>> {
    harness::plot(&trajectories, &out).map_err(harness_err)
}

/// The full default run configuration as JSON text.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_json()
}

#[pymodule]
fn awe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(wind_sample, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(reward_traction, m)?)?;
    m.add_function(wrap_pyfunction!(reward_t2r, m)?)?;
    m.add_function(wrap_pyfunction!(reward_retraction, m)?)?;
    m.add_function(wrap_pyfunction!(reward_r2t, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(plot, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
