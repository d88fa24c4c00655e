//! Twin-delayed deep deterministic policy gradient (TD3) with combined
//! experience replay, written directly on `ndarray`.

mod adam;
mod agent;
mod checkpoint;
mod mlp;
mod replay;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Phase;

pub use adam::Adam;
pub use agent::{Td3Agent, UpdateInfo};
pub use checkpoint::{read_checkpoint_header, CheckpointHeader, CHECKPOINT_VERSION};
pub use mlp::{grad_check, Dense, Mlp, OutputActivation, Scalar, Trace};
pub use replay::{Batch, ReplayBuffer, Transition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Td3Error {
    #[error("non-finite values in {what} after update {update}")]
    NumericalDivergence { what: &'static str, update: u64 },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl From<std::io::Error> for Td3Error {
    fn from(e: std::io::Error) -> Self {
        Td3Error::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Exploration noise standard deviation, in normalized action units.
    pub action_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub batch_size: usize,
    /// Environment steps of uniform random actions before learning starts.
    pub warmup_steps: u64,
    pub episodes: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Factor applied to the initial weights of the actor's last layer.
    pub actor_final_scale: f64,
}

impl Td3Config {
    pub fn default_for(phase: Phase) -> Self {
        let (episodes, lr, noise, warmup, gamma) = match phase {
            Phase::Traction => (1600, 1e-4, 0.225, 5000, 1.0),
            Phase::T2R => (3000, 5e-4, 0.25, 25000, 1.0),
            Phase::Retraction => (90000, 8e-5, 0.25, 25000, 0.99),
            Phase::R2T => (20000, 9e-5, 0.25, 25000, 0.99),
        };
        Td3Config {
            actor_lr: lr,
            critic_lr: lr,
            gamma,
            tau: 0.005,
            policy_delay: 2,
            action_noise: noise,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            batch_size: 100,
            warmup_steps: warmup,
            episodes,
            buffer_capacity: 100_000,
            hidden: vec![400, 300],
            actor_final_scale: 0.01,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.actor_lr, self.critic_lr, self.tau];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err("learning rates and tau must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) || self.tau > 1.0 {
            return Err("gamma and tau must lie in [0, 1]".into());
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err("policy_delay and batch_size must be positive, capacity >= batch_size".into());
        }
        if [self.action_noise, self.target_noise, self.target_noise_clip].iter().any(|v| !(*v >= 0.0)) {
            return Err("noise parameters must be non-negative".into());
        }
        if self.hidden.contains(&0) {
            return Err("hidden widths must be positive".into());
        }
        Ok(())
    }
}

impl Default for Td3Config {
    fn default() -> Self {
        Self::default_for(Phase::Traction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_defaults() {
        let t = Td3Config::default_for(Phase::Traction);
        assert_eq!((t.episodes, t.actor_lr, t.action_noise, t.warmup_steps, t.gamma), (1600, 1e-4, 0.225, 5000, 1.0));
        let episodes: Vec<usize> = Phase::ALL.iter().map(|&p| Td3Config::default_for(p).episodes).collect();
        assert_eq!(episodes, vec![1600, 3000, 90000, 20000]);
        assert_eq!(Td3Config::default_for(Phase::R2T).critic_lr, 9e-5);
        for p in Phase::ALL {
            Td3Config::default_for(p).validate().unwrap();
        }
    }
}
