//! Episode traces: everything the evaluation harness needs to classify an
//! episode, plus JSON Lines dumps (one step per line).

use super::{EpisodeScenario, RelayState};
use crate::feeder::FeederNetwork;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::io::Write;

/// One environment step as recorded in a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Action index per relay.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub global_reward: f64,
    pub breaker_closed: Vec<bool>,
    /// Relays whose decrement would have opened the breaker this step.
    pub attempted: Vec<bool>,
    /// Whether an active fault was energized during this step.
    pub fault_active_energized: bool,
    pub observation_hashes: Vec<String>,
}

/// Complete record of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub relay_ids: Vec<String>,
    /// Faulted bus index, if the scenario contains a fault.
    pub fault_bus: Option<usize>,
    pub fault_onset: usize,
    pub fault_phases: Option<crate::feeder::PhaseSet>,
    /// Deactivation flags actually in effect this episode.
    pub deactivated: Vec<bool>,
    pub steps: Vec<StepRecord>,
    pub first_trip: Vec<Option<usize>>,
    pub first_attempt: Vec<Option<usize>>,
    pub complete: bool,
}

impl EpisodeTrace {
    pub(super) fn new(
        network: &FeederNetwork,
        scenario: &EpisodeScenario,
        honored: &BTreeSet<usize>,
    ) -> Self {
        let n = network.relays().len();
        Self {
            seed: scenario.seed,
            relay_ids: network.relays().iter().map(|r| r.id.clone()).collect(),
            fault_bus: scenario.fault.map(|f| f.bus),
            fault_onset: scenario.fault_onset,
            fault_phases: scenario.fault.map(|f| f.phases),
            deactivated: (0..n)
                .map(|r| honored.contains(&r) && scenario.deactivated[r])
                .collect(),
            steps: Vec::new(),
            first_trip: vec![None; n],
            first_attempt: vec![None; n],
            complete: false,
        }
    }

    pub(super) fn record(&mut self, step: StepRecord) {
        for r in 0..self.relay_ids.len() {
            if step.attempted[r] && self.first_attempt[r].is_none() {
                self.first_attempt[r] = Some(step.t);
            }
            if !step.breaker_closed[r] && self.first_trip[r].is_none() {
                self.first_trip[r] = Some(step.t);
            }
        }
        self.steps.push(step);
    }

    pub(super) fn finish(&mut self, _states: &[RelayState]) {
        self.complete = true;
    }

    /// Placeholder trace for an episode aborted by a non-convergent solve.
    pub(crate) fn aborted() -> Self {
        Self {
            seed: 0,
            relay_ids: Vec::new(),
            fault_bus: None,
            fault_onset: 0,
            fault_phases: None,
            deactivated: Vec::new(),
            steps: Vec::new(),
            first_trip: Vec::new(),
            first_attempt: Vec::new(),
            complete: false,
        }
    }

    /// Did the fault stay energized through the last recorded step?
    pub fn fault_energized_at_end(&self) -> bool {
        self.steps
            .last()
            .map(|s| s.fault_active_energized)
            .unwrap_or(false)
    }

    pub fn has_fault(&self) -> bool {
        self.fault_bus.is_some()
    }

    /// Dump the per-step records as JSON Lines.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for step in &self.steps {
            let line = serde_json::to_string(step).expect("step record serializes");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Short content hash of an observation vector (first 8 bytes of SHA-256
/// over the little-endian f64 encoding).
pub fn hash_observation(obs: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in obs {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
