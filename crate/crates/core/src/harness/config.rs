use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::dynamics::AeroPolar;
use crate::env::{EnvConfig, Phase};
use crate::td3::Td3Config;
use crate::wind::{load_gridded, synth_shear, ConstantField, WindField};

pub const SEED_ENV_VAR: &str = "AWE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindSpec {
    Constant {
        speed: f64,
    },
    Gridded {
        path: PathBuf,
        #[serde(default)]
        frozen_snapshot: Option<usize>,
    },
    Synthetic {
        seed: u64,
        modes: usize,
    },
}

impl Default for WindSpec {
    fn default() -> Self {
        WindSpec::Constant { speed: 10.0 }
    }
}

impl WindSpec {
    /// Short form used on the command line: `constant:<speed>`,
    /// `gridded:<path>[@snapshot]` or `synthetic:<seed>:<modes>`. Full JSON is
    /// accepted as well.
    pub fn parse_override(s: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Config(format!("cannot parse wind override `{s}`"));
        if s.trim_start().starts_with('{') {
            return serde_json::from_str(s).map_err(|e| HarnessError::Config(format!("wind override: {e}")));
        }
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "constant" => Ok(WindSpec::Constant {
                speed: rest.parse().map_err(|_| bad())?,
            }),
            "gridded" => {
                let (path, frozen) = match rest.rsplit_once('@') {
                    Some((p, k)) => (p, Some(k.parse().map_err(|_| bad())?)),
                    None => (rest, None),
                };
                Ok(WindSpec::Gridded {
                    path: PathBuf::from(path),
                    frozen_snapshot: frozen,
                })
            }
            "synthetic" => {
                let (seed, modes) = rest.split_once(':').ok_or_else(bad)?;
                Ok(WindSpec::Synthetic {
                    seed: seed.parse().map_err(|_| bad())?,
                    modes: modes.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn WindField>, HarnessError> {
        Ok(match self {
            WindSpec::Constant { speed } => {
                if !speed.is_finite() {
                    return Err(HarnessError::Config("wind speed must be finite".into()));
                }
                Arc::new(ConstantField::new(*speed))
            }
            WindSpec::Gridded { path, frozen_snapshot } => {
                let field = load_gridded(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                match frozen_snapshot {
                    Some(k) if *k >= field.nt => {
                        return Err(HarnessError::Config(format!("snapshot {k} out of range (file has {})", field.nt)))
                    }
                    Some(k) => Arc::new(field.frozen(*k)),
                    None => Arc::new(field),
                }
            }
            WindSpec::Synthetic { seed, modes } => Arc::new(synth_shear(*seed, *modes)),
        })
    }
}

/// Per-phase agent settings, keyed by phase name in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfigs {
    pub traction: Td3Config,
    pub t2r: Td3Config,
    pub retraction: Td3Config,
    pub r2t: Td3Config,
}

impl Default for AgentConfigs {
    fn default() -> Self {
        AgentConfigs {
            traction: Td3Config::default_for(Phase::Traction),
            t2r: Td3Config::default_for(Phase::T2R),
            retraction: Td3Config::default_for(Phase::Retraction),
            r2t: Td3Config::default_for(Phase::R2T),
        }
    }
}

impl AgentConfigs {
    pub fn get(&self, phase: Phase) -> &Td3Config {
        match phase {
            Phase::Traction => &self.traction,
            Phase::T2R => &self.t2r,
            Phase::Retraction => &self.retraction,
            Phase::R2T => &self.r2t,
        }
    }

    pub fn get_mut(&mut self, phase: Phase) -> &mut Td3Config {
        match phase {
            Phase::Traction => &mut self.traction,
            Phase::T2R => &mut self.t2r,
            Phase::Retraction => &mut self.retraction,
            Phase::R2T => &mut self.r2t,
        }
    }
}

/// Everything a run needs. Omitted keys take their defaults, nested objects
/// are merged key by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub wind: WindSpec,
    /// Polar file replacing `env.polar` when set.
    pub polar_path: Option<PathBuf>,
    pub env: EnvConfig,
    pub agents: AgentConfigs,
    /// Episodes between resumable checkpoints.
    pub checkpoint_every: usize,
    /// Tries to reach a phase's entry state with the frozen earlier agents.
    pub entry_attempts: usize,
    /// Write a trajectory of every n-th training episode (0 = never).
    pub trajectory_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            wind: WindSpec::default(),
            polar_path: None,
            env: EnvConfig::default(),
            agents: AgentConfigs::default(),
            checkpoint_every: 100,
            entry_attempts: 1000,
            trajectory_every: 0,
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // a different wind kind has different fields
                    Some(slot) if k != "wind" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let overlay: Value = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config is not valid JSON: {e}")))?;
        if !overlay.is_object() {
            return Err(HarnessError::Config("config must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        merge(&mut base, overlay);
        let cfg: RunConfig = serde_json::from_value(base).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads, resolves relative paths against the config's directory, applies the
    /// seed override from the environment and validates.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(dir);
        cfg.apply_seed_override(std::env::var(SEED_ENV_VAR).ok().as_deref())?;
        cfg.finalize()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let WindSpec::Gridded { path, .. } = &mut self.wind {
            fix(path);
        }
        if let Some(p) = &mut self.polar_path {
            fix(p);
        }
    }

    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<(), HarnessError> {
        if let Some(v) = value {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("{SEED_ENV_VAR}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    /// Loads the polar file, if any, and checks every section.
    pub fn finalize(&mut self) -> Result<(), HarnessError> {
        if let Some(p) = &self.polar_path {
            self.env.polar = AeroPolar::load(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            self.polar_path = None;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg_err = |what: &str, e: String| HarnessError::Config(format!("{what}: {e}"));
        AeroPolar::new(self.env.polar.knots().to_vec()).map_err(|e| cfg_err("polar", e.to_string()))?;
        self.env.validate().map_err(|e| cfg_err("env", e))?;
        for p in Phase::ALL {
            self.agents.get(p).validate().map_err(|e| cfg_err(&format!("agents.{p}"), e))?;
        }
        if let WindSpec::Gridded { path, .. } = &self.wind {
            if !path.exists() {
                return Err(cfg_err("wind", format!("{} does not exist", path.display())));
            }
        }
        if self.checkpoint_every == 0 || self.entry_attempts == 0 {
            return Err(HarnessError::Config("checkpoint_every and entry_attempts must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
