//! Evaluation and reporting: failure-rate tables, robustness sweeps and
//! response-time histograms over fresh seeded scenarios with frozen
//! policies.

mod classify;
pub mod report;

pub use classify::{
    classify_episode, classify_relay, EpisodeClassification, FailureCategory, RelayOutcome,
};
pub use report::{format_robustness_tables, format_text_report, response_histogram_csv};

use crate::agent::Policy;
use crate::env::{
    generate_disturbance_scenario, generate_scenario, DisturbanceKind, Env, EnvConfig, EnvError,
    EpisodeTrace, InputMode, RelayAction,
};
use crate::feeder::FeederNetwork;
use crate::seed::SeedLineage;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("missing policy for relay `{0}`")]
    MissingPolicy(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Failure occurrences by category (the union of the report row shapes).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub no_fault_trip: usize,
    pub local_fault_hold: usize,
    pub remote_fault_trip: usize,
    pub backup_hold: usize,
}

impl FailureCounts {
    pub fn total(&self) -> usize {
        self.no_fault_trip + self.local_fault_hold + self.remote_fault_trip + self.backup_hold
    }

    fn add(&mut self, category: FailureCategory) {
        match category {
            FailureCategory::NoFaultTrip => self.no_fault_trip += 1,
            FailureCategory::LocalFaultHold => self.local_fault_hold += 1,
            FailureCategory::RemoteFaultTrip => self.remote_fault_trip += 1,
            FailureCategory::BackupHold => self.backup_hold += 1,
        }
    }
}

/// Delay histogram for one relay: steps-from-onset -> episode count.
pub type DelayHistogram = BTreeMap<usize, usize>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResponseHistograms {
    /// Correct primary trips per relay.
    pub primary: BTreeMap<String, DelayHistogram>,
    /// Correct backup trips per relay.
    pub backup: BTreeMap<String, DelayHistogram>,
}

impl ResponseHistograms {
    pub fn total_trips(&self) -> usize {
        self.primary
            .values()
            .chain(self.backup.values())
            .flat_map(|h| h.values())
            .sum()
    }
}

/// Aggregated evaluation outcome in the shape of the failure-rate tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub feeder: String,
    pub input_mode: InputMode,
    pub relay_ids: Vec<String>,
    pub episodes: usize,
    /// Episodes excluded for power-flow non-convergence.
    pub aborted: usize,
    pub successes: usize,
    pub failures: FailureCounts,
    pub response: ResponseHistograms,
    pub seed: u64,
    /// Milliseconds per simulation step (for delay conversion).
    pub step_ms: f64,
}

impl EvaluationReport {
    pub fn failure_rate(&self) -> f64 {
        let counted = self.episodes - self.aborted;
        if counted == 0 {
            0.0
        } else {
            self.failures.total() as f64 / counted as f64
        }
    }

    pub fn multi_relay(&self) -> bool {
        self.relay_ids.len() > 1
    }

    /// Structural checks over the aggregate: category conservation and the
    /// two-step minimum response delay.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.successes + self.failures.total() + self.aborted != self.episodes {
            return Err(format!(
                "conservation: {} + {} + {} != {}",
                self.successes,
                self.failures.total(),
                self.aborted,
                self.episodes
            ));
        }
        for (relay, hist) in self.response.primary.iter().chain(self.response.backup.iter()) {
            if let Some(d) = hist.keys().next() {
                if *d < 2 {
                    return Err(format!("relay {relay} recorded a {d}-step trip delay"));
                }
            }
        }
        Ok(())
    }
}

/// What kind of episodes an evaluation samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalScenarioKind {
    /// Fresh fault scenarios from the environment config.
    Fault,
    /// Fault scenarios with the global load multiplier forced into a range
    /// above the training peak.
    PeakLoad { range: (f64, f64) },
    /// No-fault disturbance episodes; relays must hold closed.
    Disturbance(DisturbanceKind),
}

/// Evaluate frozen policies over `episodes` fresh seeded scenarios, greedily
/// (no exploration). Deactivation coins are honoured for every relay that
/// has an upstream backup.
pub fn evaluate(
    network: &FeederNetwork,
    env_cfg: &EnvConfig,
    policies: &mut BTreeMap<String, Box<dyn Policy>>,
    episodes: usize,
    lineage: &SeedLineage,
    feeder_label: &str,
    kind: EvalScenarioKind,
) -> Result<EvaluationReport, HarnessError> {
    evaluate_with(
        network,
        env_cfg,
        policies,
        episodes,
        lineage,
        feeder_label,
        kind,
        |_, _| {},
    )
}

/// [`evaluate`] with a per-episode callback receiving the trace and its
/// classification (for dumps and invariant tests).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_with(
    network: &FeederNetwork,
    env_cfg: &EnvConfig,
    policies: &mut BTreeMap<String, Box<dyn Policy>>,
    episodes: usize,
    lineage: &SeedLineage,
    feeder_label: &str,
    kind: EvalScenarioKind,
    mut on_episode: impl FnMut(&EpisodeTrace, &EpisodeClassification),
) -> Result<EvaluationReport, HarnessError> {
    for relay in network.relays() {
        if !policies.contains_key(&relay.id) {
            return Err(HarnessError::MissingPolicy(relay.id.clone()));
        }
    }

    let scenario_cfg = match kind {
        EvalScenarioKind::PeakLoad { range } => {
            let mut cfg = env_cfg.clone();
            cfg.global_multiplier_range = range;
            cfg
        }
        _ => env_cfg.clone(),
    };

    // Coins are honoured for relays that have someone upstream to back them
    // up; with a single relay this set is empty.
    let honored: BTreeSet<usize> = (0..network.relays().len())
        .filter(|&r| network.upstream_relay(r).is_some())
        .collect();

    let mut report = EvaluationReport {
        feeder: feeder_label.to_string(),
        input_mode: env_cfg.input_mode,
        relay_ids: network.relays().iter().map(|r| r.id.clone()).collect(),
        episodes,
        aborted: 0,
        successes: 0,
        failures: FailureCounts::default(),
        response: ResponseHistograms::default(),
        seed: lineage.master(),
        step_ms: env_cfg.step_seconds * 1000.0,
    };

    for episode in 0..episodes {
        let seed = lineage.derive("eval-scenario", episode as u64);
        let scenario = match kind {
            EvalScenarioKind::Fault | EvalScenarioKind::PeakLoad { .. } => {
                let mut s = generate_scenario(seed, &scenario_cfg, network);
                if let EvalScenarioKind::PeakLoad { range } = kind {
                    if range.0 >= range.1 {
                        s.global_multiplier = range.0; // control level
                    }
                }
                s
            }
            EvalScenarioKind::Disturbance(d) => {
                generate_disturbance_scenario(seed, &scenario_cfg, network, d)
            }
        };

        let mut env = match Env::reset(network, env_cfg, scenario, honored.clone()) {
            Ok(env) => env,
            Err(EnvError::NonConvergence { .. }) => {
                report.aborted += 1;
                continue;
            }
            Err(other) => return Err(other.into()),
        };
        let mut obs = env.observations();
        let trace = loop {
            let actions: Vec<RelayAction> = network
                .relays()
                .iter()
                .enumerate()
                .map(|(r, relay)| {
                    policies
                        .get_mut(&relay.id)
                        .expect("checked above")
                        .act(&obs[r])
                })
                .collect();
            match env.step(&actions) {
                Ok(res) => {
                    obs = res.observations;
                    if res.done {
                        break env.into_trace();
                    }
                }
                Err(EnvError::NonConvergence { .. }) => {
                    break EpisodeTrace::aborted();
                }
                Err(other) => return Err(other.into()),
            }
        };
        if !trace.complete {
            report.aborted += 1;
            continue;
        }

        let classification = classify_episode(&trace, network, env_cfg);
        if classification.success {
            report.successes += 1;
        } else {
            report
                .failures
                .add(classification.category.expect("failed episodes carry a category"));
        }
        for (r, delay) in &classification.primary_delays {
            *report
                .response
                .primary
                .entry(network.relays()[*r].id.clone())
                .or_default()
                .entry(*delay)
                .or_insert(0) += 1;
        }
        for (r, delay) in &classification.backup_delays {
            *report
                .response
                .backup
                .entry(network.relays()[*r].id.clone())
                .or_default()
                .entry(*delay)
                .or_insert(0) += 1;
        }
        on_episode(&trace, &classification);
    }

    Ok(report)
}

/// One row of the peak-load robustness table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakRobustnessRow {
    pub level_percent: f64,
    pub episodes: usize,
    pub failures: usize,
    pub failure_rate: f64,
}

/// Peak-load sweep: for level L the global multiplier is drawn strictly
/// above the training peak, in (peak, peak * (1 + L/100)]; policies are not
/// retrained.
pub fn robustness_peak(
    network: &FeederNetwork,
    env_cfg: &EnvConfig,
    policies: &mut BTreeMap<String, Box<dyn Policy>>,
    levels_percent: &[f64],
    episodes: usize,
    lineage: &SeedLineage,
    feeder_label: &str,
) -> Result<Vec<PeakRobustnessRow>, HarnessError> {
    let peak = env_cfg.global_multiplier_range.1;
    let mut rows = Vec::with_capacity(levels_percent.len());
    for (i, &level) in levels_percent.iter().enumerate() {
        let upper = peak * (1.0 + level / 100.0);
        let sub = SeedLineage::new(lineage.derive("peak-level", i as u64));
        let report = evaluate(
            network,
            env_cfg,
            policies,
            episodes,
            &sub,
            feeder_label,
            EvalScenarioKind::PeakLoad { range: (peak, upper) },
        )?;
        rows.push(PeakRobustnessRow {
            level_percent: level,
            episodes: report.episodes - report.aborted,
            failures: report.failures.total(),
            failure_rate: report.failure_rate(),
        });
    }
    Ok(rows)
}

/// One row of the loss-of-load / loss-of-DG robustness table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisturbanceRow {
    pub kind: DisturbanceKind,
    pub episodes: usize,
    /// Episodes where any relay tripped; the correct response is to hold.
    pub trips: usize,
    pub probability: f64,
}

pub fn robustness_disturbance(
    network: &FeederNetwork,
    env_cfg: &EnvConfig,
    policies: &mut BTreeMap<String, Box<dyn Policy>>,
    kind: DisturbanceKind,
    episodes: usize,
    lineage: &SeedLineage,
    feeder_label: &str,
) -> Result<DisturbanceRow, HarnessError> {
    let label = match kind {
        DisturbanceKind::LossOfLoad => "loss-of-load",
        DisturbanceKind::LossOfDg => "loss-of-dg",
    };
    let sub = SeedLineage::new(lineage.derive(label, 0));
    let report = evaluate(
        network,
        env_cfg,
        policies,
        episodes,
        &sub,
        feeder_label,
        EvalScenarioKind::Disturbance(kind),
    )?;
    let counted = report.episodes - report.aborted;
    let trips = report.failures.total();
    Ok(DisturbanceRow {
        kind,
        episodes: counted,
        trips,
        probability: if counted == 0 { 0.0 } else { trips as f64 / counted as f64 },
    })
}

/// Median of a delay histogram, if it holds any trips.
pub fn median_delay(hist: &DelayHistogram) -> Option<f64> {
    let total: usize = hist.values().sum();
    if total == 0 {
        return None;
    }
    let mut seen = 0usize;
    let mut values = Vec::new();
    for (&delay, &count) in hist {
        values.push((delay, count));
    }
    let lower_target = (total - 1) / 2;
    let upper_target = total / 2;
    let mut lower = None;
    let mut upper = None;
    for (delay, count) in values {
        if lower.is_none() && seen + count > lower_target {
            lower = Some(delay);
        }
        if upper.is_none() && seen + count > upper_target {
            upper = Some(delay);
        }
        seen += count;
    }
    Some((lower? as f64 + upper? as f64) / 2.0)
}
