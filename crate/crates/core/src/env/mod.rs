//! Episodic MDP environment for relay control.
//!
//! One environment instance simulates one episode on a fixed network: a
//! randomized [`EpisodeScenario`] sets loads, DG and the fault; each step is
//! one quasi-static power-flow solve at the current breaker/fault topology.
//! Relays act through a countdown timer — set it, decrement it, or reset it —
//! and the breaker opens when an active counter is decremented from one.
//! Observations stack the past `m` local measurements plus breaker status
//! and the normalized counter value.

pub mod scenario;
pub mod trace;

pub use scenario::{
    generate_disturbance_scenario, generate_scenario, DgPlacement, Disturbance, EpisodeScenario,
};
pub use trace::{EpisodeTrace, StepRecord};

use crate::feeder::{FeederNetwork, Phase};
use crate::powerflow::{
    measure, sequence_components, solve, ActiveGenerator, OperatingCondition, PowerFlowError,
    PowerFlowSolution,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

/// Which measurement representation feeds the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Per-phase voltage/current magnitudes and angles (12 features/step).
    Phase,
    /// Zero/positive/negative sequence magnitudes (6 features/step).
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    LossOfLoad,
    LossOfDg,
}

/// Environment parameters. Defaults follow the experiment setup: 0.002 s
/// steps, load multipliers in (0.7, 1.3) global and (0.9, 1.1) per load, DG
/// sized at 50-125% of its bus load, fault impedance in [0.001, 20] ohms and
/// asymmetric faults favoured over symmetric ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Measurement window length m, steps.
    pub m: usize,
    /// Episode length T, steps.
    pub episode_steps: usize,
    /// Fault onset window [t_lo, t_hi], steps.
    pub fault_window: (usize, usize),
    pub input_mode: InputMode,
    pub global_multiplier_range: (f64, f64),
    pub load_multiplier_range: (f64, f64),
    pub dg_count_range: (usize, usize),
    /// DG capacity as a fraction of the bus load.
    pub dg_sizing_range: (f64, f64),
    /// Sampling weights for SLG, LL, LLG, 3PH (must sum to 1).
    pub fault_type_weights: [f64; 4],
    pub fault_impedance_range: (f64, f64),
    pub step_seconds: f64,
    pub discount: f64,
    /// Probability that a relay's primary-failure coin comes up "failed".
    pub deactivation_probability: f64,
    /// Phase-mode agents respond only to faults involving this phase.
    pub assigned_phase: Phase,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            m: 8,
            episode_steps: 50,
            fault_window: (15, 35),
            input_mode: InputMode::Sequence,
            global_multiplier_range: (0.7, 1.3),
            load_multiplier_range: (0.9, 1.1),
            dg_count_range: (0, 3),
            dg_sizing_range: (0.5, 1.25),
            fault_type_weights: [0.40, 0.20, 0.25, 0.15],
            fault_impedance_range: (0.001, 20.0),
            step_seconds: 0.002,
            discount: 0.9,
            deactivation_probability: 0.5,
            assigned_phase: Phase::A,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.m == 0 || self.m > self.episode_steps {
            return Err(EnvError::Config(format!(
                "window m={} must satisfy 1 <= m <= T={}",
                self.m, self.episode_steps
            )));
        }
        let (lo, hi) = self.fault_window;
        if !(0 < lo && lo < hi && hi < self.episode_steps) {
            return Err(EnvError::Config(format!(
                "fault window [{lo}, {hi}] must satisfy 0 < t_lo < t_hi < T"
            )));
        }
        for (name, (a, b)) in [
            ("global multiplier", self.global_multiplier_range),
            ("load multiplier", self.load_multiplier_range),
            ("dg sizing", self.dg_sizing_range),
            ("fault impedance", self.fault_impedance_range),
        ] {
            if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
                return Err(EnvError::Config(format!("{name} range ({a}, {b}) not ordered")));
            }
        }
        if self.dg_count_range.0 > self.dg_count_range.1 {
            return Err(EnvError::Config("dg count range not ordered".into()));
        }
        let total: f64 = self.fault_type_weights.iter().sum();
        if self.fault_type_weights.iter().any(|w| *w <= 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(EnvError::Config(
                "fault type weights must be positive and sum to 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.deactivation_probability) {
            return Err(EnvError::Config("deactivation probability outside [0,1]".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(EnvError::Config("discount must be in [0,1)".into()));
        }
        Ok(())
    }

    /// Features per measurement block.
    pub fn block_len(&self) -> usize {
        match self.input_mode {
            InputMode::Phase => 12,
            InputMode::Sequence => 6,
        }
    }

    /// Observation length: m blocks plus breaker status and counter value.
    pub fn observation_len(&self) -> usize {
        self.m * self.block_len() + 2
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("power flow failed to converge at step {step} (scenario seed {seed})")]
    NonConvergence { step: usize, seed: u64 },
    #[error("expected {expected} actions, got {got}")]
    ActionArity { expected: usize, got: usize },
    #[error("episode already finished")]
    EpisodeOver,
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Discrete relay action index: 0 = reset, 1..=9 = set counter, 10 = decrement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayAction(pub usize);

pub const ACTION_COUNT: usize = 11;
pub const ACTION_RESET: RelayAction = RelayAction(0);
pub const ACTION_DECREMENT: RelayAction = RelayAction(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Reset,
    Set(u8),
    Decrement,
}

impl RelayAction {
    pub fn set(value: u8) -> Self {
        assert!((1..=9).contains(&value));
        RelayAction(value as usize)
    }

    pub fn kind(self) -> ActionKind {
        match self.0 {
            0 => ActionKind::Reset,
            k @ 1..=9 => ActionKind::Set(k as u8),
            10 => ActionKind::Decrement,
            other => panic!("action index {other} out of range"),
        }
    }
}

/// Per-relay episode state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayState {
    pub breaker_closed: bool,
    /// Countdown value in 1..=9, None when inactive. Always None while the
    /// breaker is open.
    pub countdown: Option<u8>,
    /// Honoured primary-failure flag for this episode.
    pub deactivated: bool,
    /// Step of the first trip attempt (a decrement that would have opened
    /// the breaker), recorded whether or not the opening was suppressed.
    pub attempted_trip: Option<usize>,
}

impl RelayState {
    fn initial(deactivated: bool) -> Self {
        Self {
            breaker_closed: true,
            countdown: None,
            deactivated,
            attempted_trip: None,
        }
    }
}

/// Countdown-timer transition. Returns the next state and whether this
/// action opens the breaker (before any deactivation suppression). Open
/// breakers ignore actions entirely.
pub fn apply_action(state: RelayState, action: RelayAction) -> (RelayState, bool) {
    if !state.breaker_closed {
        return (state, false);
    }
    let mut next = state;
    let mut opens = false;
    match action.kind() {
        ActionKind::Reset => next.countdown = None,
        ActionKind::Set(k) => next.countdown = Some(k),
        ActionKind::Decrement => match state.countdown {
            None => {}
            Some(1) => {
                next.countdown = None;
                opens = true;
            }
            Some(k) => next.countdown = Some(k - 1),
        },
    }
    (next, opens)
}

/// Table III reward: the four cases partition (breaker effect x fault
/// context). Counter manipulation without opening counts as staying closed.
pub fn reward(opened_this_step: bool, fault_in_effective_region: bool) -> f64 {
    match (opened_this_step, fault_in_effective_region) {
        (true, true) => 100.0,
        (true, false) => -120.0,
        (false, false) => 5.0,
        (false, true) => -10.0,
    }
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub global_reward: f64,
    pub done: bool,
}

/// One live episode.
pub struct Env<'a> {
    network: &'a FeederNetwork,
    config: &'a EnvConfig,
    scenario: EpisodeScenario,
    t: usize,
    relay_states: Vec<RelayState>,
    windows: Vec<VecDeque<Vec<f64>>>,
    solution: PowerFlowSolution,
    trace: EpisodeTrace,
    done: bool,
}

impl<'a> Env<'a> {
    /// Start an episode: all breakers closed, counters inactive, pre-fault
    /// flow solved, windows padded with the first measurement.
    pub fn reset(
        network: &'a FeederNetwork,
        config: &'a EnvConfig,
        scenario: EpisodeScenario,
        honored_deactivation: BTreeSet<usize>,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        let relay_states: Vec<RelayState> = (0..network.relays().len())
            .map(|r| {
                RelayState::initial(
                    honored_deactivation.contains(&r) && scenario.deactivated[r],
                )
            })
            .collect();

        let condition = build_condition(network, &scenario, &relay_states, 0);
        let solution = solve(network, &condition)?;
        if !solution.converged {
            return Err(EnvError::NonConvergence {
                step: 0,
                seed: scenario.seed,
            });
        }

        let mut windows = Vec::with_capacity(network.relays().len());
        for r in network.relays() {
            let block = measurement_block(network, config, &solution, &r.id)?;
            let mut w = VecDeque::with_capacity(config.m);
            for _ in 0..config.m {
                w.push_back(block.clone());
            }
            windows.push(w);
        }

        let trace = EpisodeTrace::new(network, &scenario, &honored_deactivation);
        Ok(Self {
            network,
            config,
            scenario,
            t: 0,
            relay_states,
            windows,
            solution,
            trace,
            done: false,
        })
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.network.relays().len())
            .map(|r| self.observation(r))
            .collect()
    }

    pub fn relay_states(&self) -> &[RelayState] {
        &self.relay_states
    }

    pub fn scenario(&self) -> &EpisodeScenario {
        &self.scenario
    }

    pub fn current_step(&self) -> usize {
        self.t
    }

    pub fn solution(&self) -> &PowerFlowSolution {
        &self.solution
    }

    /// Advance one step: evaluate fault context, apply actions, re-solve the
    /// flow at the new topology, slide the windows.
    pub fn step(&mut self, actions: &[RelayAction]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let n = self.network.relays().len();
        if actions.len() != n {
            return Err(EnvError::ActionArity {
                expected: n,
                got: actions.len(),
            });
        }
        let step = self.t + 1;

        // Fault context before this step's actions take effect: attempts
        // from earlier steps open the backup window strictly after they
        // happen.
        let energized_pre = self.fault_energized();
        let contexts: Vec<bool> = (0..n)
            .map(|r| self.fault_in_effective_region(r, step, energized_pre))
            .collect();

        let mut opened = vec![false; n];
        let mut attempted = vec![false; n];
        for r in 0..n {
            let (mut next, opens) = apply_action(self.relay_states[r], actions[r]);
            if opens {
                if next.deactivated {
                    // Failed primary: the attempt is recorded, the breaker
                    // stays closed.
                    if next.attempted_trip.is_none() {
                        next.attempted_trip = Some(step);
                    }
                    attempted[r] = true;
                } else {
                    next.breaker_closed = false;
                    if next.attempted_trip.is_none() {
                        next.attempted_trip = Some(step);
                    }
                    opened[r] = true;
                    attempted[r] = true;
                }
            }
            self.relay_states[r] = next;
        }

        let rewards: Vec<f64> = (0..n).map(|r| reward(opened[r], contexts[r])).collect();
        let global_reward: f64 = rewards.iter().sum();

        self.t = step;
        let condition = build_condition(self.network, &self.scenario, &self.relay_states, step);
        let solution = solve(self.network, &condition)?;
        if !solution.converged {
            return Err(EnvError::NonConvergence {
                step,
                seed: self.scenario.seed,
            });
        }
        self.solution = solution;

        for (r, relay) in self.network.relays().iter().enumerate() {
            let block = measurement_block(self.network, self.config, &self.solution, &relay.id)?;
            let w = &mut self.windows[r];
            w.pop_front();
            w.push_back(block);
        }

        let observations = self.observations();
        self.done = step == self.config.episode_steps;

        self.trace.record(StepRecord {
            t: step,
            actions: actions.iter().map(|a| a.0).collect(),
            rewards: rewards.clone(),
            global_reward,
            breaker_closed: self.relay_states.iter().map(|s| s.breaker_closed).collect(),
            attempted: attempted.clone(),
            fault_active_energized: self.fault_active(step) && self.fault_energized(),
            observation_hashes: observations.iter().map(|o| trace::hash_observation(o)).collect(),
        });
        if self.done {
            self.trace.finish(&self.relay_states);
        }

        Ok(StepResult {
            observations,
            rewards,
            global_reward,
            done: self.done,
        })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EpisodeTrace {
        self.trace
    }

    fn observation(&self, relay: usize) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.config.observation_len());
        for block in &self.windows[relay] {
            obs.extend_from_slice(block);
        }
        let st = &self.relay_states[relay];
        obs.push(if st.breaker_closed { 1.0 } else { 0.0 });
        obs.push(st.countdown.map_or(0.0, |k| f64::from(k) / 9.0));
        debug_assert_eq!(obs.len(), self.config.observation_len());
        obs
    }

    fn fault_active(&self, step: usize) -> bool {
        self.scenario.fault.is_some() && step >= self.scenario.fault_onset
    }

    /// Is the faulted bus connected to the source through closed breakers?
    fn fault_energized(&self) -> bool {
        let Some(f) = &self.scenario.fault else {
            return false;
        };
        let mut bus = f.bus;
        loop {
            if let Some(li) = self.network.parent_line(bus) {
                if let Some(r) = self.network.relays().iter().position(|r| r.line == li) {
                    if !self.relay_states[r].breaker_closed {
                        return false;
                    }
                }
                bus = self.network.parent(bus).unwrap();
            } else {
                return true;
            }
        }
    }

    /// Fault context for rewards at `step` (pre-action): the fault is active
    /// and energized, lies in the relay's primary zone, or in its backup
    /// zone once the deactivated downstream relay has already attempted.
    fn fault_in_effective_region(&self, relay: usize, step: usize, energized: bool) -> bool {
        let Some(f) = &self.scenario.fault else {
            return false;
        };
        if step < self.scenario.fault_onset || !energized {
            return false;
        }
        if self.config.input_mode == InputMode::Phase
            && !f.phases.contains(self.config.assigned_phase)
        {
            return false;
        }
        match self.network.zone_owner(f.bus) {
            Some(owner) if owner == relay => true,
            Some(owner) => {
                self.network.upstream_relay(owner) == Some(relay)
                    && self.relay_states[owner].deactivated
                    && self.relay_states[owner].attempted_trip.is_some()
            }
            None => false,
        }
    }
}

/// Operating condition for one step of an episode.
fn build_condition(
    network: &FeederNetwork,
    scenario: &EpisodeScenario,
    relay_states: &[RelayState],
    step: usize,
) -> OperatingCondition {
    let disturbed = scenario
        .disturbance
        .as_ref()
        .filter(|d| step >= d.onset_step);

    let load_factor = match disturbed {
        Some(d) if d.kind == DisturbanceKind::LossOfLoad => 1.0 - d.magnitude,
        _ => 1.0,
    };
    let dropped: BTreeSet<usize> = match disturbed {
        Some(d) if d.kind == DisturbanceKind::LossOfDg => d.dropped_dgs.iter().copied().collect(),
        _ => BTreeSet::new(),
    };

    let generators = scenario
        .dgs
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, dg)| ActiveGenerator {
            bus: dg.bus,
            power_va: dg.power_va,
            fraction: 1.0,
        })
        .chain(network.generators().iter().map(|g| ActiveGenerator {
            bus: g.bus,
            power_va: g.power_va,
            fraction: 1.0,
        }))
        .collect();

    let open_breakers = relay_states
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.breaker_closed)
        .map(|(r, _)| r)
        .collect();

    let fault = scenario
        .fault
        .filter(|_| step >= scenario.fault_onset);

    OperatingCondition {
        global_multiplier: scenario.global_multiplier * load_factor,
        load_multipliers: scenario.load_multipliers.clone(),
        generators,
        open_breakers,
        fault,
    }
}

/// One per-step feature block for a relay.
fn measurement_block(
    network: &FeederNetwork,
    config: &EnvConfig,
    solution: &PowerFlowSolution,
    relay_id: &str,
) -> Result<Vec<f64>, EnvError> {
    let (v, i) = measure(network, solution, relay_id)?;
    let mut block = Vec::with_capacity(config.block_len());
    match config.input_mode {
        InputMode::Phase => {
            block.extend_from_slice(&v.magnitudes());
            block.extend_from_slice(&v.angles());
            block.extend_from_slice(&i.magnitudes());
            block.extend_from_slice(&i.angles());
        }
        InputMode::Sequence => {
            block.extend_from_slice(&sequence_components(&v).magnitudes());
            block.extend_from_slice(&sequence_components(&i).magnitudes());
        }
    }
    Ok(block)
}
