use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{derive_seed, write_atomic, write_manifest, AgentPolicy, HarnessError, RunConfig};
use crate::env::{
    write_trajectory, Action, AweEnv, EntryState, Phase, Policy, Status, TrajectoryRow,
};
use crate::td3::{Td3Agent, Td3Config, Transition};

pub const METRICS_HEADER: &str = "episode,steps,return,energy_kwh,duration_s,status,crash,crossings,env_steps,updates,mean_critic_loss,rolling_return,rolling_crash_rate,rolling_energy_kwh";

const ROLLING: usize = 100;
const ACT_DIM: usize = 2;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Train only this phase; earlier phases must already have checkpoints.
    pub phase: Option<Phase>,
    pub resume: bool,
    /// Progress lines on stderr.
    pub verbose: bool,
    /// Stop once this many episodes of the phase are done, leaving a
    /// resumable checkpoint.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    pub ret: f64,
    pub energy_kwh: f64,
    pub duration_s: f64,
    pub status: Status,
    /// Sign changes of the crosswind coordinate.
    pub crossings: usize,
    pub env_steps: u64,
    pub updates: u64,
    /// Absent when no gradient update happened during the episode.
    pub mean_critic_loss: Option<f64>,
}

impl EpisodeStats {
    pub fn crashed(&self) -> bool {
        matches!(self.status, Status::Failed(r) if r.is_crash())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub episodes: usize,
    pub rolling_return: f64,
    pub rolling_crash_rate: f64,
    pub rolling_energy_kwh: f64,
    pub checkpoint: PathBuf,
    /// False when training stopped early.
    pub finished: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Progress {
    episodes_done: usize,
    metrics_bytes: u64,
    recent: Vec<EpisodeStats>,
}

pub fn checkpoint_path(out_dir: &Path, phase: Phase) -> PathBuf {
    out_dir.join("checkpoints").join(format!("{phase}.td3c"))
}

fn partial_path(out_dir: &Path, phase: Phase) -> PathBuf {
    out_dir.join("checkpoints").join(format!("{phase}.partial.td3c"))
}

fn progress_path(out_dir: &Path, phase: Phase) -> PathBuf {
    out_dir.join("checkpoints").join(format!("{phase}.progress.json"))
}

fn metrics_path(out_dir: &Path, phase: Phase) -> PathBuf {
    out_dir.join("metrics").join(format!("{phase}.csv"))
}

fn rolling(recent: &VecDeque<EpisodeStats>) -> (f64, f64, f64) {
    let n = recent.len().max(1) as f64;
    let ret = recent.iter().map(|s| s.ret).sum::<f64>() / n;
    let crash = recent.iter().filter(|s| s.crashed()).count() as f64 / n;
    let energy = recent.iter().map(|s| s.energy_kwh).sum::<f64>() / n;
    (ret, crash, energy)
}

fn metrics_line(s: &EpisodeStats, roll: (f64, f64, f64)) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.episode,
        s.steps,
        s.ret,
        s.energy_kwh,
        s.duration_s,
        s.status.label(),
        u8::from(s.crashed()),
        s.crossings,
        s.env_steps,
        s.updates,
        s.mean_critic_loss.map(|l| l.to_string()).unwrap_or_default(),
        roll.0,
        roll.1,
        roll.2
    )
}

pub(crate) fn load_agent(path: &Path, phase: Phase) -> Result<Td3Agent, HarnessError> {
    if !path.exists() {
        return Err(HarnessError::Config(format!("missing checkpoint {}", path.display())));
    }
    let agent = Td3Agent::load(path)?;
    if agent.phase() != phase || agent.obs_dim() != phase.obs_dim() || agent.act_dim() != ACT_DIM {
        return Err(HarnessError::Config(format!(
            "{} holds a {} agent with dims ({}, {}), expected {phase}",
            path.display(),
            agent.phase(),
            agent.obs_dim(),
            agent.act_dim()
        )));
    }
    Ok(agent)
}

/// Drives the frozen earlier agents until `target` can begin. A retry draws a
/// new traction start.
pub(crate) fn reach_entry(
    env: &mut AweEnv,
    frozen: &[Td3Agent],
    target: Phase,
    seed: u64,
    attempts: usize,
) -> Result<EntryState, HarnessError> {
    'attempt: for a in 0..attempts {
        let mut entry = None;
        for phase in &Phase::ALL[..target.index()] {
            let mut policy = AgentPolicy(&frozen[phase.index()]);
            let mut obs = env.reset(*phase, derive_seed(seed, &[a as u64]), entry)?;
            let status = loop {
                let r = env.step(policy.act(&obs))?;
                obs = r.obs;
                if r.status.is_terminal() {
                    break r.status;
                }
            };
            if status != Status::Goal {
                continue 'attempt;
            }
            entry = Some(env.entry_state());
        }
        let e = entry.expect("target is not the first phase");
        if target == Phase::R2T && env.config().thresholds.well_positioned(e.state.theta, e.state.phi) {
            continue;
        }
        return Ok(e);
    }
    Err(HarnessError::Run(format!(
        "earlier agents did not reach the start of {target} in {attempts} attempts"
    )))
}

fn crosswind_sign(y: f64, prev: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        prev
    }
}

struct Episode {
    stats: EpisodeStats,
    rows: Vec<TrajectoryRow>,
}

fn run_training_episode(
    env: &mut AweEnv,
    agent: &mut Td3Agent,
    phase: Phase,
    episode: usize,
    seed: u64,
    entry: Option<EntryState>,
    keep_rows: bool,
) -> Result<Episode, HarnessError> {
    let mut obs = env.reset(phase, seed, entry)?;
    let mut rows = Vec::new();
    if keep_rows {
        rows.push(crate::env::trajectory_row(env, 0.0, Status::Running));
    }
    let mut side = crosswind_sign(env.state().position().y, 0.0);
    let (mut steps, mut ret, mut crossings) = (0usize, 0.0, 0usize);
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    let status = loop {
        let o = obs.normalized();
        let a = agent.explore(&o);
        let r = env.step(Action::from_normalized(&a))?;
        let next = r.obs.normalized();
        if let Some(info) = agent.observe(&Transition {
            obs: o,
            action: a,
            reward: r.reward as f32,
            next_obs: next,
            done: r.status.cuts_bootstrap(),
        })? {
            loss_sum += 0.5 * (info.critic1_loss + info.critic2_loss);
            loss_n += 1;
        }
        steps += 1;
        ret += r.reward;
        let now = crosswind_sign(env.state().position().y, side);
        if side != 0.0 && now != side {
            crossings += 1;
        }
        side = now;
        if keep_rows {
            rows.push(crate::env::trajectory_row(env, r.reward, r.status));
        }
        obs = r.obs;
        if r.status.is_terminal() {
            break r.status;
        }
    };
    let (energy_j, duration_s) = env.phase_totals();
    Ok(Episode {
        stats: EpisodeStats {
            episode,
            steps,
            ret,
            energy_kwh: energy_j / 3.6e6,
            duration_s,
            status,
            crossings,
            env_steps: agent.env_steps(),
            updates: agent.updates(),
            mean_critic_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
        },
        rows,
    })
}

fn train_phase(
    cfg: &RunConfig,
    env: &mut AweEnv,
    frozen: &[Td3Agent],
    phase: Phase,
    opts: &TrainOptions,
) -> Result<PhaseSummary, HarnessError> {
    let out = &cfg.out_dir;
    let agent_cfg = cfg.agents.get(phase).clone();
    let partial = partial_path(out, phase);
    let progress_file = progress_path(out, phase);
    let metrics_file = metrics_path(out, phase);
    std::fs::create_dir_all(metrics_file.parent().unwrap())?;
    std::fs::create_dir_all(partial.parent().unwrap())?;

    let (mut agent, start, mut recent) = if opts.resume && partial.exists() && progress_file.exists() {
        let progress: Progress = serde_json::from_str(&std::fs::read_to_string(&progress_file)?)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", progress_file.display())))?;
        let agent = load_agent(&partial, phase)?;
        let comparable = Td3Config { episodes: agent.config().episodes, ..agent_cfg.clone() };
        if agent.config() != &comparable {
            return Err(HarnessError::Config(format!(
                "{phase} settings changed since the partial checkpoint was written"
            )));
        }
        let f = OpenOptions::new().write(true).open(&metrics_file)?;
        f.set_len(progress.metrics_bytes)?;
        (agent, progress.episodes_done, progress.recent.into_iter().collect())
    } else {
        let agent = Td3Agent::new(phase, phase.obs_dim(), ACT_DIM, agent_cfg.clone(), derive_seed(cfg.seed, &[phase.index() as u64, 0xA6]))?;
        std::fs::write(&metrics_file, format!("{METRICS_HEADER}\n"))?;
        (agent, 0, VecDeque::new())
    };

    let mut metrics = BufWriter::new(OpenOptions::new().append(true).open(&metrics_file)?);
    let traj_dir = out.join("trajectories").join(phase.name());
    for e in start..agent_cfg.episodes {
        let seed = derive_seed(cfg.seed, &[phase.index() as u64, e as u64]);
        let entry = if phase == Phase::Traction {
            None
        } else {
            Some(reach_entry(env, frozen, phase, derive_seed(seed, &[0xE7]), cfg.entry_attempts)?)
        };
        let keep = cfg.trajectory_every > 0 && (e + 1) % cfg.trajectory_every == 0;
        let ep = run_training_episode(env, &mut agent, phase, e, seed, entry, keep)?;
        if keep {
            std::fs::create_dir_all(&traj_dir)?;
            write_trajectory(&traj_dir.join(format!("episode-{e:06}.csv")), &ep.rows)?;
        }
        recent.push_back(ep.stats);
        if recent.len() > ROLLING {
            recent.pop_front();
        }
        writeln!(metrics, "{}", metrics_line(&ep.stats, rolling(&recent)))?;

        let done = e + 1;
        let stopping = opts.stop_after.is_some_and(|n| done >= n) && done < agent_cfg.episodes;
        if (done % cfg.checkpoint_every == 0 && done < agent_cfg.episodes) || stopping {
            metrics.flush()?;
            agent.save(&partial, true)?;
            let progress = Progress {
                episodes_done: done,
                metrics_bytes: std::fs::metadata(&metrics_file)?.len(),
                recent: recent.iter().copied().collect(),
            };
            write_atomic(&progress_file, serde_json::to_string(&progress).unwrap().as_bytes())?;
            if opts.verbose {
                let (r, c, en) = rolling(&recent);
                eprintln!("{phase} {done}/{}: return {r:.4} crash {c:.2} energy {en:.5} kWh", agent_cfg.episodes);
            }
        }
        if stopping {
            let (r, c, en) = rolling(&recent);
            return Ok(PhaseSummary {
                phase,
                episodes: done,
                rolling_return: r,
                rolling_crash_rate: c,
                rolling_energy_kwh: en,
                checkpoint: partial,
                finished: false,
            });
        }
    }
    metrics.flush()?;
    let final_path = checkpoint_path(out, phase);
    agent.save(&final_path, false)?;
    for p in [&partial, &progress_file] {
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    let (r, c, en) = rolling(&recent);
    Ok(PhaseSummary {
        phase,
        episodes: agent_cfg.episodes,
        rolling_return: r,
        rolling_crash_rate: c,
        rolling_energy_kwh: en,
        checkpoint: final_path,
        finished: true,
    })
}

/// Trains the phases in cycle order, each later phase starting from states
/// produced by the frozen earlier agents.
pub fn train(cfg: &RunConfig, opts: &TrainOptions) -> Result<Vec<PhaseSummary>, HarnessError> {
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    write_manifest(
        out,
        "train",
        cfg,
        serde_json::json!({ "phase": opts.phase.map(|p| p.name()), "resume": opts.resume }),
    )?;
    let mut env = AweEnv::new(cfg.env.clone(), cfg.wind.build()?)?;
    let phases: Vec<Phase> = match opts.phase {
        Some(p) => vec![p],
        None => Phase::ALL.to_vec(),
    };
    let mut frozen: Vec<Td3Agent> = Vec::new();
    for q in &Phase::ALL[..phases[0].index()] {
        frozen.push(load_agent(&checkpoint_path(out, *q), *q)?);
    }
    let mut summaries = Vec::new();
    for phase in phases {
        let final_path = checkpoint_path(out, phase);
        if opts.resume && opts.phase.is_none() && final_path.exists() {
            frozen.push(load_agent(&final_path, phase)?);
            continue;
        }
        let summary = train_phase(cfg, &mut env, &frozen, phase, opts)?;
        let finished = summary.finished;
        summaries.push(summary);
        if !finished {
            break;
        }
        frozen.push(load_agent(&final_path, phase)?);
    }
    Ok(summaries)
}
