use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::adam::Adam;
use super::mlp::{Mlp, OutputActivation};
use super::replay::{Batch, ReplayBuffer, Transition};
use super::{Td3Config, Td3Error};
use crate::env::Phase;

/// Losses of one gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub update: u64,
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    /// Present on iterations that also moved the actor and the targets.
    pub actor_loss: Option<f64>,
}

/// Actor, twin critics, their targets, optimizers and replay memory.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub(crate) cfg: Td3Config,
    pub(crate) phase: Phase,
    pub(crate) actor: Mlp<f32>,
    pub(crate) actor_target: Mlp<f32>,
    pub(crate) critic1: Mlp<f32>,
    pub(crate) critic2: Mlp<f32>,
    pub(crate) critic1_target: Mlp<f32>,
    pub(crate) critic2_target: Mlp<f32>,
    pub(crate) actor_opt: Adam<f32>,
    pub(crate) critic1_opt: Adam<f32>,
    pub(crate) critic2_opt: Adam<f32>,
    pub(crate) buffer: ReplayBuffer,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) env_steps: u64,
    pub(crate) updates: u64,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

impl Td3Agent {
    pub fn new(phase: Phase, obs_dim: usize, act_dim: usize, cfg: Td3Config, seed: u64) -> Result<Self, Td3Error> {
        cfg.validate().map_err(Td3Error::Shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor = Mlp::new(&sizes(obs_dim, &cfg.hidden, act_dim), OutputActivation::Tanh, &mut rng);
        actor.scale_last_layer(cfg.actor_final_scale as f32);
        let critic_sizes = sizes(obs_dim + act_dim, &cfg.hidden, 1);
        let critic1 = Mlp::new(&critic_sizes, OutputActivation::Identity, &mut rng);
        let critic2 = Mlp::new(&critic_sizes, OutputActivation::Identity, &mut rng);
        Ok(Td3Agent {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic1_opt: Adam::new(&critic1, cfg.critic_lr),
            critic2_opt: Adam::new(&critic2, cfg.critic_lr),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim),
            rng,
            env_steps: 0,
            updates: 0,
            cfg,
            phase,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn actor(&self) -> &Mlp<f32> {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp<f32> {
        &mut self.actor
    }

    pub fn actor_target(&self) -> &Mlp<f32> {
        &self.actor_target
    }

    pub fn critics(&self) -> (&Mlp<f32>, &Mlp<f32>) {
        (&self.critic1, &self.critic2)
    }

    pub fn critic_targets(&self) -> (&Mlp<f32>, &Mlp<f32>) {
        (&self.critic1_target, &self.critic2_target)
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn in_warmup(&self) -> bool {
        self.env_steps < self.cfg.warmup_steps
    }

    pub fn set_learning_rates(&mut self, actor: f64, critic: f64) {
        self.cfg.actor_lr = actor;
        self.cfg.critic_lr = critic;
        self.actor_opt.lr = actor;
        self.critic1_opt.lr = critic;
        self.critic2_opt.lr = critic;
    }

    /// Deterministic policy output in `[-1, 1]^act_dim`.
    pub fn act(&self, obs: &[f32]) -> Vec<f32> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("observation row");
        self.actor.forward(x).into_raw_vec_and_offset().0
    }

    /// Policy output plus Gaussian exploration noise, clipped to `[-1, 1]`.
    pub fn act_noisy<R: Rng + ?Sized>(&self, obs: &[f32], rng: &mut R) -> Vec<f32> {
        let noise = Normal::new(0.0, self.cfg.action_noise).expect("finite noise");
        self.act(obs)
            .into_iter()
            .map(|a| (a as f64 + noise.sample(rng)).clamp(-1.0, 1.0) as f32)
            .collect()
    }

    /// Training-time action: uniform during warmup, noisy policy afterwards.
    pub fn explore(&mut self, obs: &[f32]) -> Vec<f32> {
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let a = if self.in_warmup() {
            (0..self.act_dim()).map(|_| rng.random_range(-1.0f32..=1.0)).collect()
        } else {
            self.act_noisy(obs, &mut rng)
        };
        self.rng = rng;
        a
    }

    pub fn q_values(&self, obs: ArrayView2<f32>, actions: ArrayView2<f32>) -> (Array1<f32>, Array1<f32>) {
        let sa = concatenate(Axis(1), &[obs, actions]).expect("matching rows");
        (
            self.critic1.forward(sa.view()).column(0).to_owned(),
            self.critic2.forward(sa.view()).column(0).to_owned(),
        )
    }

    /// Stores a transition and, once warmup is over and the buffer holds a
    /// batch, performs one gradient iteration.
    pub fn observe(&mut self, t: &Transition) -> Result<Option<UpdateInfo>, Td3Error> {
        self.buffer.push(t);
        self.env_steps += 1;
        if self.in_warmup() || self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng);
        self.update(&batch).map(Some)
    }

    /// Bellman targets `r + gamma (1 - done) min(Q1', Q2')` with smoothed
    /// target actions.
    pub fn targets(&mut self, batch: &Batch) -> Array1<f32> {
        let mut next_a = self.actor_target.forward(batch.next_obs.view());
        let noise = Normal::new(0.0, self.cfg.target_noise).expect("finite noise");
        let clip = self.cfg.target_noise_clip;
        for a in next_a.iter_mut() {
            let eps = noise.sample(&mut self.rng).clamp(-clip, clip);
            *a = (*a as f64 + eps).clamp(-1.0, 1.0) as f32;
        }
        let sa = concatenate(Axis(1), &[batch.next_obs.view(), next_a.view()]).expect("rows");
        let q1 = self.critic1_target.forward(sa.view());
        let q2 = self.critic2_target.forward(sa.view());
        let gamma = self.cfg.gamma as f32;
        Array1::from_shape_fn(batch.len(), |i| {
            batch.rewards[i] + gamma * (1.0 - batch.done[i]) * q1[[i, 0]].min(q2[[i, 0]])
        })
    }

    pub fn update(&mut self, batch: &Batch) -> Result<UpdateInfo, Td3Error> {
        if batch.obs.ncols() != self.obs_dim() || batch.actions.ncols() != self.act_dim() {
            return Err(Td3Error::Shape(format!(
                "batch has {}+{} columns, agent expects {}+{}",
                batch.obs.ncols(),
                batch.actions.ncols(),
                self.obs_dim(),
                self.act_dim()
            )));
        }
        let n = batch.len() as f32;
        let y = self.targets(batch);
        let sa = concatenate(Axis(1), &[batch.obs.view(), batch.actions.view()]).expect("rows");

        let mut losses = [0.0f64; 2];
        for (k, loss) in losses.iter_mut().enumerate() {
            let (critic, opt) = if k == 0 {
                (&mut self.critic1, &mut self.critic1_opt)
            } else {
                (&mut self.critic2, &mut self.critic2_opt)
            };
            let trace = critic.forward_trace(sa.view());
            let q = trace.output().column(0);
            let err: Array1<f32> = &q - &y;
            *loss = err.iter().map(|e| (*e as f64).powi(2)).sum::<f64>() / n as f64;
            let grad = (err * (2.0 / n)).insert_axis(Axis(1));
            let (grads, _) = critic.backward(&trace, grad.view());
            opt.step(critic, &grads);
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates.is_multiple_of(self.cfg.policy_delay) {
            let obs_dim = self.obs_dim();
            let a_trace = self.actor.forward_trace(batch.obs.view());
            let sa_pi = concatenate(Axis(1), &[batch.obs.view(), a_trace.output().view()]).expect("rows");
            let q_trace = self.critic1.forward_trace(sa_pi.view());
            actor_loss = Some(-(q_trace.output().sum() as f64) / n as f64);
            let dq = Array2::from_elem((batch.len(), 1), -1.0 / n);
            let (_, grad_in) = self.critic1.backward(&q_trace, dq.view());
            let grad_a = grad_in.slice(s![.., obs_dim..]);
            let (grads, _) = self.actor.backward(&a_trace, grad_a);
            self.actor_opt.step(&mut self.actor, &grads);

            let tau = self.cfg.tau as f32;
            self.actor_target.soft_update_from(&self.actor, tau);
            self.critic1_target.soft_update_from(&self.critic1, tau);
            self.critic2_target.soft_update_from(&self.critic2, tau);
        }

        let update = self.updates;
        let check = |ok: bool, what| if ok { Ok(()) } else { Err(Td3Error::NumericalDivergence { what, update }) };
        check(losses.iter().all(|l| l.is_finite()), "critic loss")?;
        check(actor_loss.is_none_or(f64::is_finite), "actor loss")?;
        check(self.critic1.is_finite() && self.critic2.is_finite(), "critic parameters")?;
        check(self.actor.is_finite(), "actor parameters")?;
        Ok(UpdateInfo {
            update,
            critic1_loss: losses[0],
            critic2_loss: losses[1],
            actor_loss,
        })
    }
}
