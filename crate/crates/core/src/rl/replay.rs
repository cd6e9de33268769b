use ndarray::Array2;
use rand::Rng;

use crate::{Error, Result};

/// One `(s, a, r, s', done)` tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// A sampled minibatch, one row per transition.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub action: Array2<f64>,
    pub reward: Vec<f64>,
    pub next_obs: Array2<f64>,
    pub done: Vec<bool>,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    obs: Vec<f64>,
    action: Vec<f64>,
    reward: Vec<f64>,
    next_obs: Vec<f64>,
    done: Vec<bool>,
    head: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            obs: Vec::new(),
            action: Vec::new(),
            reward: Vec::new(),
            next_obs: Vec::new(),
            done: Vec::new(),
            head: 0,
            len: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim || t.next_obs.len() != self.obs_dim || t.action.len() != self.action_dim {
            return Err(Error::InvalidInput("transition dimensions do not match buffer".into()));
        }
        if self.len < self.capacity {
            self.obs.extend_from_slice(&t.obs);
            self.action.extend_from_slice(&t.action);
            self.reward.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.done.push(t.done);
            self.len += 1;
        } else {
            let (o, a) = (self.head * self.obs_dim, self.head * self.action_dim);
            self.obs[o..o + self.obs_dim].copy_from_slice(&t.obs);
            self.next_obs[o..o + self.obs_dim].copy_from_slice(&t.next_obs);
            self.action[a..a + self.action_dim].copy_from_slice(&t.action);
            self.reward[self.head] = t.reward;
            self.done[self.head] = t.done;
        }
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    /// Uniform sample of `size` distinct transitions.
    pub fn sample<R: Rng>(&self, size: usize, rng: &mut R) -> Result<Batch> {
        if size == 0 || size > self.len {
            return Err(Error::InvalidInput(format!("cannot sample {size} of {} transitions", self.len)));
        }
        let idx = rand::seq::index::sample(rng, self.len, size);
        let mut batch = Batch {
            obs: Array2::zeros((size, self.obs_dim)),
            action: Array2::zeros((size, self.action_dim)),
            reward: Vec::with_capacity(size),
            next_obs: Array2::zeros((size, self.obs_dim)),
            done: Vec::with_capacity(size),
        };
        for (row, i) in idx.iter().enumerate() {
            let (o, a) = (i * self.obs_dim, i * self.action_dim);
            for j in 0..self.obs_dim {
                batch.obs[[row, j]] = self.obs[o + j];
                batch.next_obs[[row, j]] = self.next_obs[o + j];
            }
            for j in 0..self.action_dim {
                batch.action[[row, j]] = self.action[a + j];
            }
            batch.reward.push(self.reward[i]);
            batch.done.push(self.done[i]);
        }
        Ok(batch)
    }
}
