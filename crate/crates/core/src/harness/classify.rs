//! Episode outcome classification.
//!
//! The optimal action set is re-derived from the fault's type, time and
//! location plus the deactivation flags — independently of the rewards the
//! environment handed out — and each relay's recorded behaviour is compared
//! against it.

use crate::env::{EnvConfig, EpisodeTrace, InputMode};
use crate::feeder::FeederNetwork;
use serde::{Deserialize, Serialize};

/// What one relay did in one episode, measured against its duty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayOutcome {
    /// Held when it should hold, or tripped its duty fault (delay in steps
    /// from fault onset, primary duty).
    CorrectHold,
    CorrectPrimaryTrip { delay: usize },
    /// Backup duty served: tripped after the deactivated downstream relay
    /// attempted.
    CorrectBackupTrip { delay: usize },
    /// Tripped while no fault was active anywhere.
    NoFaultTrip { step: usize },
    /// Tripped during a fault outside its effective region (remote fault,
    /// premature backup, or after the fault was already cleared).
    RemoteFaultTrip { step: usize },
    /// Fault in its primary zone persisted to episode end and it held.
    MissedPrimaryTrip,
    /// Backup window open to episode end and it held.
    MissedBackupTrip,
}

impl RelayOutcome {
    pub fn is_correct(self) -> bool {
        matches!(
            self,
            RelayOutcome::CorrectHold
                | RelayOutcome::CorrectPrimaryTrip { .. }
                | RelayOutcome::CorrectBackupTrip { .. }
        )
    }
}

/// Failure rows, the union of the single- and multi-relay report shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCategory {
    /// "No Fault / Trip"
    NoFaultTrip,
    /// "After Fault / Hold" (single relay) or "Local Fault / Hold".
    LocalFaultHold,
    /// "Remote Fault / Trip"
    RemoteFaultTrip,
    /// "Backup / Hold"
    BackupHold,
}

#[derive(Debug, Clone)]
pub struct EpisodeClassification {
    pub relay_outcomes: Vec<RelayOutcome>,
    /// An episode succeeds only if every relay behaved correctly.
    pub success: bool,
    /// Category of the earliest failure, if any.
    pub category: Option<FailureCategory>,
    /// (relay index, steps from onset) for correct primary trips.
    pub primary_delays: Vec<(usize, usize)>,
    /// (relay index, steps from onset) for correct backup trips.
    pub backup_delays: Vec<(usize, usize)>,
}

/// Classify one complete episode trace.
pub fn classify_episode(
    trace: &EpisodeTrace,
    network: &FeederNetwork,
    config: &EnvConfig,
) -> EpisodeClassification {
    let n = network.relays().len();
    let mut outcomes = Vec::with_capacity(n);
    for r in 0..n {
        outcomes.push(classify_relay(trace, network, config, r));
    }

    let mut primary_delays = Vec::new();
    let mut backup_delays = Vec::new();
    for (r, o) in outcomes.iter().enumerate() {
        match o {
            RelayOutcome::CorrectPrimaryTrip { delay } => primary_delays.push((r, *delay)),
            RelayOutcome::CorrectBackupTrip { delay } => backup_delays.push((r, *delay)),
            _ => {}
        }
    }

    // Earliest failure decides the episode row; hold failures materialise at
    // episode end. Ties break on relay index.
    let mut first: Option<(usize, usize, FailureCategory)> = None;
    for (r, o) in outcomes.iter().enumerate() {
        let entry = match o {
            RelayOutcome::NoFaultTrip { step } => Some((*step, FailureCategory::NoFaultTrip)),
            RelayOutcome::RemoteFaultTrip { step } => {
                Some((*step, FailureCategory::RemoteFaultTrip))
            }
            RelayOutcome::MissedPrimaryTrip => {
                Some((usize::MAX, FailureCategory::LocalFaultHold))
            }
            RelayOutcome::MissedBackupTrip => Some((usize::MAX, FailureCategory::BackupHold)),
            _ => None,
        };
        if let Some((step, cat)) = entry {
            let better = match &first {
                None => true,
                Some((s, ri, _)) => step < *s || (step == *s && r < *ri),
            };
            if better {
                first = Some((step, r, cat));
            }
        }
    }

    EpisodeClassification {
        success: first.is_none(),
        category: first.map(|(_, _, c)| c),
        relay_outcomes: outcomes,
        primary_delays,
        backup_delays,
    }
}

/// Classify a single relay's behaviour in a trace.
pub fn classify_relay(
    trace: &EpisodeTrace,
    network: &FeederNetwork,
    config: &EnvConfig,
    relay: usize,
) -> RelayOutcome {
    let trip = trace.first_trip[relay];
    let fault = FaultDuty::derive(trace, network, config);

    match trip {
        Some(step) => {
            let Some(duty) = &fault else {
                return RelayOutcome::NoFaultTrip { step };
            };
            if step < duty.onset {
                return RelayOutcome::NoFaultTrip { step };
            }
            if !duty.energized_before(step, trace) {
                // Fault already cleared by someone else.
                return RelayOutcome::RemoteFaultTrip { step };
            }
            if duty.owner == Some(relay) && duty.phase_match {
                return RelayOutcome::CorrectPrimaryTrip { delay: step - duty.onset };
            }
            if duty.backup_provider == Some(relay) && duty.phase_match {
                let owner = duty.owner.expect("backup implies an owner");
                let attempted_before = trace.deactivated[owner]
                    && trace.first_attempt[owner].is_some_and(|a| a < step);
                if attempted_before {
                    return RelayOutcome::CorrectBackupTrip { delay: step - duty.onset };
                }
            }
            RelayOutcome::RemoteFaultTrip { step }
        }
        None => {
            let Some(duty) = &fault else {
                return RelayOutcome::CorrectHold;
            };
            if !duty.persisted_to_end(trace) || !duty.phase_match {
                return RelayOutcome::CorrectHold;
            }
            if duty.owner == Some(relay) {
                // A deactivated primary that attempted did its part; the
                // suppressed opening is the simulated hardware failure.
                if trace.deactivated[relay] && trace.first_attempt[relay].is_some() {
                    return RelayOutcome::CorrectHold;
                }
                return RelayOutcome::MissedPrimaryTrip;
            }
            if duty.backup_provider == Some(relay) {
                let owner = duty.owner.expect("backup implies an owner");
                if trace.deactivated[owner] && trace.first_attempt[owner].is_some() {
                    return RelayOutcome::MissedBackupTrip;
                }
            }
            RelayOutcome::CorrectHold
        }
    }
}

/// Where the fault sits in the protection scheme.
struct FaultDuty {
    onset: usize,
    /// Relay owning the faulted bus's primary zone.
    owner: Option<usize>,
    /// That relay's backup provider.
    backup_provider: Option<usize>,
    /// Relays on the path source -> faulted bus; a trip by any of them
    /// de-energises the fault.
    path_relays: Vec<usize>,
    /// Phase-mode assignment check (always true in sequence mode).
    phase_match: bool,
}

impl FaultDuty {
    fn derive(trace: &EpisodeTrace, network: &FeederNetwork, config: &EnvConfig) -> Option<Self> {
        let bus = trace.fault_bus?;
        let owner = network.zone_owner(bus);
        let backup_provider = owner.and_then(|o| network.upstream_relay(o));
        let mut path_relays = Vec::new();
        let mut b = bus;
        while let Some(li) = network.parent_line(b) {
            if let Some(r) = network.relays().iter().position(|r| r.line == li) {
                path_relays.push(r);
            }
            b = network.parent(b).expect("non-root bus");
        }
        let phase_match = match config.input_mode {
            InputMode::Sequence => true,
            InputMode::Phase => trace
                .fault_phases
                .map(|p| p.contains(config.assigned_phase))
                .unwrap_or(false),
        };
        Some(Self {
            onset: trace.fault_onset,
            owner,
            backup_provider,
            path_relays,
            phase_match,
        })
    }

    /// Was the fault still energized when `step` began (no path relay had
    /// tripped strictly earlier)?
    fn energized_before(&self, step: usize, trace: &EpisodeTrace) -> bool {
        self.path_relays
            .iter()
            .all(|&r| trace.first_trip[r].is_none_or(|t| t >= step))
    }

    /// Did the fault stay energized through episode end?
    fn persisted_to_end(&self, trace: &EpisodeTrace) -> bool {
        self.path_relays.iter().all(|&r| trace.first_trip[r].is_none())
    }
}
