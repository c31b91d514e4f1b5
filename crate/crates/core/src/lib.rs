//! Training and evaluation of reinforcement-learning protective relays on
//! simulated radial distribution feeders.
//!
//! The crate is organised around the simulation pipeline:
//!
//! - [`feeder`] — radial network model, configuration parsing, protection
//!   zones and the post-order training order.
//! - [`powerflow`] — unbalanced three-phase backward/forward-sweep solver
//!   with shunt faults, plus sequence-component utilities.
//! - [`env`] — episodic environment: Monte Carlo scenario sampling,
//!   countdown-timer breaker actions, observations and rewards.
//! - [`agent`] — from-scratch DQN: dense network, replay buffer, double-DQN
//!   targets, Adam, soft target updates.
//! - [`trainer`] — nested sequential training of relays in post-order.
//! - [`harness`] — failure-rate / robustness / response-time evaluation and
//!   report formatting.

pub mod agent;
pub mod env;
pub mod feeder;
pub mod harness;
pub mod powerflow;
pub mod seed;
pub mod trainer;
