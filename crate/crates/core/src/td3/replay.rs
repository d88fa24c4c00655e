use ndarray::{Array1, Array2};
use rand::Rng;

/// One environment transition in network units.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    /// Cut the bootstrap from `next_obs`.
    pub done: bool,
}

/// Stacked transitions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f32>,
    pub actions: Array2<f32>,
    pub rewards: Array1<f32>,
    pub next_obs: Array2<f32>,
    /// 1.0 where the transition was terminal.
    pub done: Array1<f32>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer over flat storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    pub(crate) capacity: usize,
    pub(crate) obs_dim: usize,
    pub(crate) act_dim: usize,
    pub(crate) obs: Vec<f32>,
    pub(crate) actions: Vec<f32>,
    pub(crate) rewards: Vec<f32>,
    pub(crate) next_obs: Vec<f32>,
    pub(crate) done: Vec<bool>,
    pub(crate) cursor: usize,
    pub(crate) len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            obs: vec![0.0; capacity * obs_dim],
            actions: vec![0.0; capacity * act_dim],
            rewards: vec![0.0; capacity],
            next_obs: vec![0.0; capacity * obs_dim],
            done: vec![false; capacity],
            cursor: 0,
            len: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.obs_dim, self.act_dim)
    }

    /// Slot the next insertion will write.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Slot of the most recent insertion.
    pub fn newest_slot(&self) -> Option<usize> {
        (self.len > 0).then(|| (self.cursor + self.capacity - 1) % self.capacity)
    }

    pub fn push(&mut self, t: &Transition) {
        assert_eq!(t.obs.len(), self.obs_dim, "observation width");
        assert_eq!(t.next_obs.len(), self.obs_dim, "next observation width");
        assert_eq!(t.action.len(), self.act_dim, "action width");
        let i = self.cursor;
        self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.obs);
        self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.next_obs);
        self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(&t.action);
        self.rewards[i] = t.reward;
        self.done[i] = t.done;
        self.cursor = (self.cursor + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    pub fn get(&self, slot: usize) -> Option<Transition> {
        if slot >= self.len {
            return None;
        }
        let (o, a) = (self.obs_dim, self.act_dim);
        Some(Transition {
            obs: self.obs[slot * o..(slot + 1) * o].to_vec(),
            action: self.actions[slot * a..(slot + 1) * a].to_vec(),
            reward: self.rewards[slot],
            next_obs: self.next_obs[slot * o..(slot + 1) * o].to_vec(),
            done: self.done[slot],
        })
    }

    /// Transitions oldest first.
    pub fn iter_ordered(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.len < self.capacity { 0 } else { self.cursor };
        (0..self.len).map(move |k| self.get((start + k) % self.capacity).unwrap())
    }

    /// `batch_size - 1` uniform draws with replacement plus the newest slot last.
    pub fn sample_slots<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        assert!(batch_size >= 1 && self.len >= batch_size, "not enough transitions to sample");
        let mut slots: Vec<usize> = (0..batch_size - 1).map(|_| rng.random_range(0..self.len)).collect();
        slots.push(self.newest_slot().unwrap());
        slots
    }

    pub fn gather(&self, slots: &[usize]) -> Batch {
        let (o, a, n) = (self.obs_dim, self.act_dim, slots.len());
        let mut obs = Array2::zeros((n, o));
        let mut next_obs = Array2::zeros((n, o));
        let mut actions = Array2::zeros((n, a));
        let mut rewards = Array1::zeros(n);
        let mut done = Array1::zeros(n);
        for (row, &s) in slots.iter().enumerate() {
            for k in 0..o {
                obs[[row, k]] = self.obs[s * o + k];
                next_obs[[row, k]] = self.next_obs[s * o + k];
            }
            for k in 0..a {
                actions[[row, k]] = self.actions[s * a + k];
            }
            rewards[row] = self.rewards[s];
            done[row] = if self.done[s] { 1.0 } else { 0.0 };
        }
        Batch {
            obs,
            actions,
            rewards,
            next_obs,
            done,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Batch {
        self.gather(&self.sample_slots(batch_size, rng))
    }
}
