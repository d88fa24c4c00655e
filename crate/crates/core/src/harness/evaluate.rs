use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use super::train::{checkpoint_path, load_agent};
use super::{derive_seed, sha256_file, write_atomic, write_manifest, AgentPolicy, HarnessError, RunConfig, WindSpec};
use crate::env::{run_cycle, write_trajectory, AweEnv, EnergyLedger, Phase, Policy};

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    /// Directory holding `<phase>.td3c` for all four phases.
    pub checkpoints: PathBuf,
    pub episodes: usize,
    pub wind: Option<WindSpec>,
    /// Defaults to `<out_dir>/evaluate`.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub label: String,
    pub duration_s: f64,
    pub energy_kwh: f64,
    pub power_kw: f64,
}

impl PhaseRow {
    fn new(label: &str, duration_s: f64, energy_kwh: f64) -> Self {
        PhaseRow {
            label: label.to_string(),
            duration_s,
            energy_kwh,
            power_kw: if duration_s > 0.0 { energy_kwh * 3600.0 / duration_s } else { 0.0 },
        }
    }
}

/// Means over a set of episodes. Phases an episode never reached contribute
/// zero, so the total row is the mean per-episode total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportVariant {
    pub episodes: usize,
    pub rows: Vec<PhaseRow>,
    pub total: PhaseRow,
}

impl ReportVariant {
    fn from_ledgers<'a>(ledgers: impl Iterator<Item = &'a EnergyLedger>) -> Self {
        let mut n = 0usize;
        let mut sums = [(0.0, 0.0); 4];
        for l in ledgers {
            n += 1;
            for p in Phase::ALL {
                sums[p.index()].0 += l.get(p).duration_s;
                sums[p.index()].1 += l.get(p).energy_kwh;
            }
        }
        let d = n.max(1) as f64;
        let rows: Vec<PhaseRow> = Phase::ALL
            .iter()
            .map(|p| PhaseRow::new(p.name(), sums[p.index()].0 / d, sums[p.index()].1 / d))
            .collect();
        let total = PhaseRow::new(
            "total",
            rows.iter().map(|r| r.duration_s).sum(),
            rows.iter().map(|r| r.energy_kwh).sum(),
        );
        ReportVariant { episodes: n, rows, total }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseOutcomes {
    pub phase: String,
    pub visits: usize,
    pub skips: usize,
    pub crashes: usize,
    pub failures: usize,
    pub crash_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub episodes: usize,
    pub wind: WindSpec,
    /// Every episode, crashed or not.
    pub all_episodes: ReportVariant,
    /// Only cycles that finished without any failure.
    pub completed_only: ReportVariant,
    pub outcomes: Vec<PhaseOutcomes>,
    pub checkpoint_sha256: Vec<(Phase, String)>,
}

impl CycleReport {
    pub fn from_ledgers(wind: WindSpec, ledgers: &[(EnergyLedger, Option<(Phase, bool)>)]) -> Self {
        let mut outcomes: Vec<PhaseOutcomes> = Phase::ALL
            .iter()
            .map(|p| PhaseOutcomes {
                phase: p.name().into(),
                ..Default::default()
            })
            .collect();
        for (l, fail) in ledgers {
            for p in Phase::ALL {
                let o = &mut outcomes[p.index()];
                o.visits += usize::from(l.get(p).visited);
                o.skips += usize::from(l.get(p).skipped);
            }
            if let Some((p, crash)) = fail {
                outcomes[p.index()].failures += 1;
                outcomes[p.index()].crashes += usize::from(*crash);
            }
        }
        for o in &mut outcomes {
            o.crash_rate = if o.visits > 0 { o.crashes as f64 / o.visits as f64 } else { 0.0 };
        }
        CycleReport {
            episodes: ledgers.len(),
            wind,
            all_episodes: ReportVariant::from_ledgers(ledgers.iter().map(|(l, _)| l)),
            completed_only: ReportVariant::from_ledgers(ledgers.iter().filter(|(_, f)| f.is_none()).map(|(l, _)| l)),
            outcomes,
            checkpoint_sha256: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, v) in [("all episodes", &self.all_episodes), ("completed cycles", &self.completed_only)] {
            let _ = writeln!(s, "{name} ({} of {})", v.episodes, self.episodes);
            let _ = writeln!(s, "{:<12}{:>14}{:>14}{:>14}", "phase", "duration_s", "energy_kwh", "power_kw");
            for r in v.rows.iter().chain(std::iter::once(&v.total)) {
                let _ = writeln!(s, "{:<12}{:>14.4}{:>14.6}{:>14.4}", r.label, r.duration_s, r.energy_kwh, r.power_kw);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{:<12}{:>8}{:>8}{:>10}{:>10}{:>12}", "phase", "visits", "skips", "crashes", "failures", "crash_rate");
        for o in &self.outcomes {
            let _ = writeln!(
                s,
                "{:<12}{:>8}{:>8}{:>10}{:>10}{:>12.3}",
                o.phase, o.visits, o.skips, o.crashes, o.failures, o.crash_rate
            );
        }
        s
    }
}

/// Runs full cycles with the deterministic actors and writes the report and
/// every trajectory. Checkpoint files are hashed before and after.
pub fn evaluate(cfg: &RunConfig, opts: &EvaluateOptions) -> Result<CycleReport, HarnessError> {
    if opts.episodes == 0 {
        return Err(HarnessError::Config("episodes must be positive".into()));
    }
    let wind_spec = opts.wind.clone().unwrap_or_else(|| cfg.wind.clone());
    let out = opts.out.clone().unwrap_or_else(|| cfg.out_dir.join("evaluate"));
    let paths: Vec<PathBuf> = Phase::ALL.iter().map(|p| checkpoint_path_in(&opts.checkpoints, *p)).collect();
    let agents = Phase::ALL
        .iter()
        .zip(&paths)
        .map(|(p, path)| load_agent(path, *p))
        .collect::<Result<Vec<_>, _>>()?;
    let before = paths.iter().map(|p| sha256_file(p)).collect::<Result<Vec<_>, _>>()?;

    write_manifest(
        &out,
        "evaluate",
        cfg,
        serde_json::json!({
            "checkpoints": opts.checkpoints,
            "episodes": opts.episodes,
            "wind": wind_spec,
            "checkpoint_sha256": before,
        }),
    )?;
    let traj_dir = out.join("trajectories");
    std::fs::create_dir_all(&traj_dir)?;
    let mut env = AweEnv::new(cfg.env.clone(), wind_spec.build()?)?;
    let mut ledgers = Vec::with_capacity(opts.episodes);
    let mut episodes_csv = String::from("episode,completed,failed_phase,failure");
    for p in Phase::ALL {
        let _ = write!(episodes_csv, ",{p}_duration_s,{p}_energy_kwh");
    }
    episodes_csv.push('\n');
    for i in 0..opts.episodes {
        let mut pol: Vec<AgentPolicy> = agents.iter().map(AgentPolicy).collect();
        let [a, b, c, d] = &mut pol[..] else { unreachable!() };
        let mut refs: [&mut dyn Policy; 4] = [a, b, c, d];
        let outcome = run_cycle(&mut env, &mut refs, derive_seed(cfg.seed, &[0xE7A1, i as u64]))?;
        write_trajectory(&traj_dir.join(format!("episode-{i:04}.csv")), &outcome.trajectory)?;
        let fail = outcome.failure.map(|f| (f.phase, f.reason.is_crash()));
        let _ = write!(
            episodes_csv,
            "{i},{},{},{}",
            u8::from(outcome.completed()),
            outcome.failure.map(|f| f.phase.name()).unwrap_or(""),
            outcome.failure.map(|f| f.reason.name()).unwrap_or("")
        );
        for p in Phase::ALL {
            let l = outcome.ledger.get(p);
            let _ = write!(episodes_csv, ",{},{}", l.duration_s, l.energy_kwh);
        }
        episodes_csv.push('\n');
        ledgers.push((outcome.ledger, fail));
    }
    let mut report = CycleReport::from_ledgers(wind_spec, &ledgers);
    let after = paths.iter().map(|p| sha256_file(p)).collect::<Result<Vec<_>, _>>()?;
    if before != after {
        return Err(HarnessError::Run("checkpoint files changed during evaluation".into()));
    }
    report.checkpoint_sha256 = Phase::ALL.iter().copied().zip(after).collect();
    write_atomic(&out.join("episodes.csv"), episodes_csv.as_bytes())?;
    write_atomic(&out.join("report.json"), serde_json::to_string_pretty(&report).unwrap().as_bytes())?;
    write_atomic(&out.join("report.txt"), report.to_text().as_bytes())?;
    Ok(report)
}

fn checkpoint_path_in(dir: &std::path::Path, phase: Phase) -> PathBuf {
    // accept either a run directory or its checkpoints/ subdirectory
    let direct = dir.join(format!("{phase}.td3c"));
    if direct.exists() {
        direct
    } else {
        checkpoint_path(dir, phase)
    }
}
