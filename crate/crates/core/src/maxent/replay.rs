use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded FIFO of `(s, a, s', reward, terminal)`. Only rewards can be rewritten
/// after insertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    /// Slot that the next push overwrites once the buffer is full.
    head: usize,
}

/// Column-major view of a sampled minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            next_states: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], next_state: &[f64], reward: f64, done: bool) -> Result<()> {
        for (ctx, got, want) in [
            ("replay state", state.len(), self.state_dim),
            ("replay action", action.len(), self.action_dim),
            ("replay next state", next_state.len(), self.state_dim),
        ] {
            if got != want {
                return Err(Error::DimensionMismatch {
                    context: ctx,
                    expected: want,
                    actual: got,
                });
            }
        }
        if self.len() < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.next_states.extend_from_slice(next_state);
            self.rewards.push(reward);
            self.dones.push(done);
        } else {
            let i = self.head;
            self.states[i * self.state_dim..(i + 1) * self.state_dim].copy_from_slice(state);
            self.actions[i * self.action_dim..(i + 1) * self.action_dim].copy_from_slice(action);
            self.next_states[i * self.state_dim..(i + 1) * self.state_dim].copy_from_slice(next_state);
            self.rewards[i] = reward;
            self.dones[i] = done;
            self.head = (self.head + 1) % self.capacity;
        }
        Ok(())
    }

    /// Storage slot of the `k`-th oldest transition.
    fn slot(&self, k: usize) -> usize {
        if self.len() < self.capacity {
            k
        } else {
            (self.head + k) % self.capacity
        }
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let i = self.slot(k);
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, k: usize) -> &[f64] {
        let i = self.slot(k);
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }

    pub fn next_state(&self, k: usize) -> &[f64] {
        let i = self.slot(k);
        &self.next_states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn reward(&self, k: usize) -> f64 {
        self.rewards[self.slot(k)]
    }

    pub fn done(&self, k: usize) -> bool {
        self.dones[self.slot(k)]
    }

    /// Storage-ordered `(state, action)` rows, for batched relabelling.
    pub fn state_action_matrix(&self) -> Array2<f64> {
        let width = self.state_dim + self.action_dim;
        let mut x = Array2::zeros((self.len(), width));
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let s = &self.states[i * self.state_dim..(i + 1) * self.state_dim];
            let a = &self.actions[i * self.action_dim..(i + 1) * self.action_dim];
            row.iter_mut().zip(s.iter().chain(a)).for_each(|(dst, v)| *dst = *v);
        }
        x
    }

    /// Replaces every reward in storage order; returns the count written.
    pub fn overwrite_rewards(&mut self, rewards: &[f64]) -> Result<usize> {
        if rewards.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "relabelled rewards",
                expected: self.len(),
                actual: rewards.len(),
            });
        }
        self.rewards.copy_from_slice(rewards);
        Ok(rewards.len())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<ReplayBatch> {
        if self.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..self.len())).collect();
        Ok(self.gather(&idx))
    }

    /// Batch of storage slots `idx`.
    pub fn gather(&self, idx: &[usize]) -> ReplayBatch {
        let (ds, da) = (self.state_dim, self.action_dim);
        let mut out = ReplayBatch {
            states: Array2::zeros((idx.len(), ds)),
            actions: Array2::zeros((idx.len(), da)),
            rewards: Array1::zeros(idx.len()),
            next_states: Array2::zeros((idx.len(), ds)),
            dones: Array1::zeros(idx.len()),
        };
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..ds {
                out.states[[r, c]] = self.states[i * ds + c];
                out.next_states[[r, c]] = self.next_states[i * ds + c];
            }
            for c in 0..da {
                out.actions[[r, c]] = self.actions[i * da + c];
            }
            out.rewards[r] = self.rewards[i];
            out.dones[r] = if self.dones[i] { 1.0 } else { 0.0 };
        }
        out
    }
}
