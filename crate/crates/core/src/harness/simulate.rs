use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, write_manifest, HarnessError, RunConfig};
use crate::env::{trajectory_row, write_trajectory, Action, AweEnv, EntryState, Phase, Status, TrajectoryRow};

/// A constant control increment held for a number of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSegment {
    /// `None` holds the increment until the episode ends.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub d_alpha: f64,
    #[serde(default)]
    pub d_psi: f64,
}

/// Open-loop control of one phase episode.
///
/// With neither `segments` nor `actions_file` the controls are held fixed
/// until the episode ends. `actions_file` replays an `actions.csv` written by
/// an earlier run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScript {
    #[serde(default = "traction")]
    pub phase: Phase,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub entry: Option<EntryState>,
    #[serde(default)]
    pub segments: Vec<ScriptSegment>,
    #[serde(default)]
    pub actions_file: Option<PathBuf>,
    /// Output directory, defaults to `<out_dir>/simulate`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn traction() -> Phase {
    Phase::Traction
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub phase: Phase,
    pub steps: usize,
    pub status: String,
    pub energy_kwh: f64,
    pub duration_s: f64,
    pub total_reward: f64,
    /// Steps whose requested increment exceeded one degree.
    pub increments_clamped: usize,
    /// Steps where a control angle hit its bound.
    pub angles_clamped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedAction {
    pub action: Action,
    pub increment_clamped: bool,
    pub angle_clamped: bool,
}

pub const ACTIONS_HEADER: &str = "step,d_alpha,d_psi,increment_clamped,angle_clamped";

pub fn read_actions(path: &Path) -> Result<Vec<Action>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(ACTIONS_HEADER) {
        return Err(HarnessError::Config(format!("{}: not an action log", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| -> Result<f64, HarnessError> {
                f.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| HarnessError::Config(format!("{}: bad line `{l}`", path.display())))
            };
            Ok(Action::new(num(1)?, num(2)?))
        })
        .collect()
}

pub fn actions_to_string(log: &[LoggedAction]) -> String {
    let mut s = format!("{ACTIONS_HEADER}\n");
    for (i, a) in log.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            i + 1,
            a.action.d_alpha,
            a.action.d_psi,
            u8::from(a.increment_clamped),
            u8::from(a.angle_clamped)
        );
    }
    s
}

/// Result of running a script in memory.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub rows: Vec<TrajectoryRow>,
    pub actions: Vec<LoggedAction>,
    pub summary: SimulationSummary,
}

impl SimulationScript {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut s: SimulationScript =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &mut s.actions_file {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(s)
    }

    fn action_sequence(&self) -> Result<Box<dyn Iterator<Item = Action>>, HarnessError> {
        if let Some(p) = &self.actions_file {
            if !self.segments.is_empty() {
                return Err(HarnessError::Config("give either segments or actions_file, not both".into()));
            }
            return Ok(Box::new(read_actions(p)?.into_iter()));
        }
        if self.segments.is_empty() {
            return Ok(Box::new(std::iter::repeat(Action::ZERO)));
        }
        let segs = self.segments.clone();
        Ok(Box::new(segs.into_iter().flat_map(|s| {
            let a = Action::new(s.d_alpha, s.d_psi);
            std::iter::repeat_n(a, s.steps.unwrap_or(usize::MAX))
        })))
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<SimulationRun, HarnessError> {
        let mut env = AweEnv::new(cfg.env.clone(), cfg.wind.build()?)?;
        env.reset(self.phase, self.seed, self.entry)?;
        let mut rows = vec![trajectory_row(&env, 0.0, Status::Running)];
        let mut actions = Vec::new();
        let mut total_reward = 0.0;
        for a in self.action_sequence()? {
            let before = env.controls();
            let r = env.step(a)?;
            let inc = a.clamped();
            let after = env.controls();
            let angle_clamped = after.alpha != before.alpha + inc.d_alpha || after.psi != before.psi + inc.d_psi;
            actions.push(LoggedAction {
                action: a,
                increment_clamped: r.action_clamped,
                angle_clamped,
            });
            total_reward += r.reward;
            rows.push(trajectory_row(&env, r.reward, r.status));
            if r.status.is_terminal() {
                break;
            }
        }
        let (energy_j, duration_s) = env.phase_totals();
        let summary = SimulationSummary {
            phase: self.phase,
            steps: actions.len(),
            status: env.status().label(),
            energy_kwh: energy_j / 3.6e6,
            duration_s,
            total_reward,
            increments_clamped: actions.iter().filter(|a| a.increment_clamped).count(),
            angles_clamped: actions.iter().filter(|a| a.angle_clamped).count(),
        };
        Ok(SimulationRun { rows, actions, summary })
    }
}

/// Runs the script and writes `trajectory.csv`, `actions.csv` and
/// `summary.json`.
pub fn simulate(cfg: &RunConfig, script_path: &Path) -> Result<SimulationSummary, HarnessError> {
    let script = SimulationScript::load(script_path)?;
    let out = script.out.clone().unwrap_or_else(|| cfg.out_dir.join("simulate"));
    write_manifest(&out, "simulate", cfg, serde_json::to_value(&script).unwrap())?;
    let run = script.run(cfg)?;
    write_trajectory(&out.join("trajectory.csv"), &run.rows)?;
    write_atomic(&out.join("actions.csv"), actions_to_string(&run.actions).as_bytes())?;
    write_atomic(&out.join("summary.json"), serde_json::to_string_pretty(&run.summary).unwrap().as_bytes())?;
    Ok(run.summary)
}
