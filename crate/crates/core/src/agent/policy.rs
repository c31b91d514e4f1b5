//! Action-selection policies over observations.

use super::{argmax, QNetwork};
use crate::env::{RelayAction, ACTION_RESET};

/// A per-relay controller: observation in, action index out.
pub trait Policy {
    fn act(&mut self, obs: &[f64]) -> RelayAction;
}

/// Greedy policy over a frozen Q-network.
pub struct GreedyNetPolicy {
    net: QNetwork,
}

impl GreedyNetPolicy {
    pub fn new(net: QNetwork) -> Self {
        Self { net }
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }
}

impl Policy for GreedyNetPolicy {
    fn act(&mut self, obs: &[f64]) -> RelayAction {
        let q = self.net.forward(obs).expect("observation matches network input");
        RelayAction(argmax(&q))
    }
}

/// Always the null action (reset); what untrained relays do.
pub struct NullPolicy;

impl Policy for NullPolicy {
    fn act(&mut self, _obs: &[f64]) -> RelayAction {
        ACTION_RESET
    }
}

/// Replays a fixed action sequence, then holds on the null action. Used for
/// hand-labelled harness fixtures.
pub struct ScriptedPolicy {
    actions: Vec<RelayAction>,
    cursor: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<RelayAction>) -> Self {
        Self { actions, cursor: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn act(&mut self, _obs: &[f64]) -> RelayAction {
        let a = self.actions.get(self.cursor).copied().unwrap_or(ACTION_RESET);
        self.cursor += 1;
        a
    }
}
