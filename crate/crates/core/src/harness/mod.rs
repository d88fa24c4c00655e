//! Run orchestration: configuration, training, evaluation campaigns, scripted
//! simulation and plotting. Every command leaves a manifest in its output
//! directory.

mod config;
mod evaluate;
mod plot;
mod simulate;
mod train;

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{Action, EnvError, Observation, Policy};
use crate::td3::{Td3Agent, Td3Error};

pub use config::{AgentConfigs, RunConfig, WindSpec, SEED_ENV_VAR};
pub use evaluate::{evaluate, CycleReport, EvaluateOptions, PhaseOutcomes, PhaseRow, ReportVariant};
pub use plot::{plot, plot_rows};
pub use simulate::{
    actions_to_string, read_actions, simulate, LoggedAction, ScriptSegment, SimulationRun, SimulationScript,
    SimulationSummary, ACTIONS_HEADER,
};
pub use train::{checkpoint_path, train, EpisodeStats, PhaseSummary, TrainOptions, METRICS_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) | HarnessError::Run(_) => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<Td3Error> for HarnessError {
    fn from(e: Td3Error) -> Self {
        match e {
            Td3Error::NumericalDivergence { .. } => HarnessError::Numerical(e.to_string()),
            Td3Error::Io(m) => HarnessError::Io(m),
            Td3Error::Format(_) | Td3Error::Shape(_) => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Run(other.to_string()),
        }
    }
}

/// Mixes a master seed with a path of indices (splitmix64 finalizer per word).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(mix(acc).wrapping_add(p)))
}

/// Deterministic controller backed by a trained actor.
pub struct AgentPolicy<'a>(pub &'a Td3Agent);

impl Policy for AgentPolicy<'_> {
    fn act(&mut self, obs: &Observation) -> Action {
        Action::from_normalized(&self.0.act(&obs.normalized()))
    }
}

pub fn build_id() -> String {
    format!(
        "{}-{} ({})",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        if cfg!(debug_assertions) { "debug" } else { "release" }
    )
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    build: String,
    seed: u64,
    config: &'a RunConfig,
    details: serde_json::Value,
}

/// Writes `manifest-<command>.json` with the effective config, seed and build.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    details: serde_json::Value,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let m = Manifest {
        command,
        build: build_id(),
        seed: cfg.seed,
        config: cfg,
        details,
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| HarnessError::Io(e.to_string()))?;
    write_atomic(&dir.join(format!("manifest-{command}.json")), text.as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
