//! From-first-principles DQN building blocks: a dense ReLU Q-network with
//! manual backpropagation, a FIFO replay buffer, double-DQN targets, Adam
//! and soft target updates.
//!
//! Defaults follow the relay hyperparameters: hidden layers 128/256/128 with
//! ReLU activations and a linear head, replay capacity 2000, target update
//! rate 0.005, double DQN on, Adam at 1e-4.

mod learn;
mod net;
pub mod policy;

pub use learn::{
    adam_step, argmax, finite_difference_gradients, select_action, soft_update, td_gradients,
    td_targets, AdamState, GradientBuffers,
};
pub use net::QNetwork;
pub use policy::{GreedyNetPolicy, NullPolicy, Policy, ScriptedPolicy};

use crate::env::{InputMode, ACTION_COUNT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}; training aborted")]
    NonFinite(String),
    #[error("weights file error: {0}")]
    Weights(String),
}

/// One experienced transition (s, a, R, s').
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// FIFO ring of transitions; sampling is uniform with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

pub const REPLAY_CAPACITY: usize = 2000;

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            data: Vec::with_capacity(capacity),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Push a transition, evicting the oldest once at capacity.
    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    /// Uniform sample with replacement; `None` until the buffer holds at
    /// least `batch` transitions (the trainer skips the gradient step).
    pub fn sample(&self, batch: usize, rng: &mut crate::seed::Rng) -> Option<Vec<&Transition>> {
        use rand::Rng as _;
        if self.data.len() < batch {
            return None;
        }
        Some(
            (0..batch)
                .map(|_| &self.data[rng.gen_range(0..self.data.len())])
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }
}

/// DQN training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Soft target-network update rate.
    pub tau: f64,
    pub discount: f64,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of training episodes over which epsilon anneals linearly.
    pub epsilon_anneal_fraction: f64,
    pub double_dqn: bool,
    pub replay_capacity: usize,
    /// Gradient steps start once the buffer holds this many transitions.
    pub warmup_transitions: usize,
    pub hidden_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            tau: 0.005,
            discount: 0.9,
            batch_size: 32,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_fraction: 0.6,
            double_dqn: true,
            replay_capacity: REPLAY_CAPACITY,
            warmup_transitions: 200,
            hidden_layers: vec![128, 256, 128],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(AgentError::Dimension(format!("{name}={v} must be in (0,1)")))
            }
        };
        unit("learning_rate", self.learning_rate)?;
        unit("tau", self.tau)?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(AgentError::Dimension("discount must be in [0,1)".into()));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(AgentError::Dimension(format!("{name} must be in [0,1]")));
            }
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(AgentError::Dimension("batch and replay sizes must be positive".into()));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.iter().any(|&h| h == 0) {
            return Err(AgentError::Dimension("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    /// Linearly annealed exploration rate for an episode index.
    pub fn epsilon_for_episode(&self, episode: usize, total_episodes: usize) -> f64 {
        let anneal = (total_episodes as f64 * self.epsilon_anneal_fraction).max(1.0);
        let frac = (episode as f64 / anneal).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Full network dimensions for a given observation length.
    pub fn dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(ACTION_COUNT);
        dims
    }
}

/// On-disk weight format: JSON with dims, row-major layer matrices and the
/// observation settings the network was trained with. Round-trips bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub format_version: u32,
    pub input_mode: InputMode,
    pub m: usize,
    pub dims: Vec<usize>,
    pub layers: Vec<WeightsLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsLayer {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

impl WeightsFile {
    pub fn from_network(net: &QNetwork, input_mode: InputMode, m: usize) -> Self {
        let dims = net.dims().to_vec();
        let layers = (0..net.layer_count())
            .map(|l| {
                let (rows, cols) = (dims[l + 1], dims[l]);
                let flat = net.layer_weights(l);
                WeightsLayer {
                    w: (0..rows)
                        .map(|r| flat[r * cols..(r + 1) * cols].to_vec())
                        .collect(),
                    b: net.layer_biases(l).to_vec(),
                }
            })
            .collect();
        Self {
            format_version: WEIGHTS_FORMAT_VERSION,
            input_mode,
            m,
            dims,
            layers,
        }
    }

    pub fn into_network(self) -> Result<QNetwork, AgentError> {
        if self.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(AgentError::Weights(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.layers.len() + 1 != self.dims.len() {
            return Err(AgentError::Weights("layer count does not match dims".into()));
        }
        let mut net = QNetwork::zeros(&self.dims);
        for (l, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = (self.dims[l + 1], self.dims[l]);
            if layer.w.len() != rows || layer.w.iter().any(|r| r.len() != cols) {
                return Err(AgentError::Weights(format!("layer {l} weight shape mismatch")));
            }
            if layer.b.len() != rows {
                return Err(AgentError::Weights(format!("layer {l} bias shape mismatch")));
            }
            let flat = net.layer_weights_mut(l);
            for (r, row) in layer.w.iter().enumerate() {
                flat[r * cols..(r + 1) * cols].copy_from_slice(row);
            }
            net.layer_biases_mut(l).copy_from_slice(&layer.b);
        }
        if !net.is_finite() {
            return Err(AgentError::Weights("non-finite parameters".into()));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, AgentError> {
        serde_json::from_str(s).map_err(|e| AgentError::Weights(e.to_string()))
    }
}

#[cfg(test)]
mod tests;
