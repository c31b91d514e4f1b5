//! Unbalanced three-phase quasi-static power flow on radial networks.
//!
//! [`solve`] runs a backward/forward ladder sweep: the backward pass
//! aggregates constant-power load and generator injections (re-linearised at
//! the latest voltages) together with constant-impedance fault shunts into
//! Norton equivalents, the forward pass propagates voltages from the source
//! through the series impedances. Shunt faults are folded into the linear
//! part exactly, so bolted faults converge like any other case.
//!
//! [`oracle`] holds an independent dense nodal Newton solver used as a test
//! reference, and [`verify`] recomputes the power-balance certificate from a
//! solution's phasors alone.

pub mod linalg;
pub mod model;
pub mod oracle;
pub mod schema;
pub mod seq;
mod sweep;
pub mod verify;

#[cfg(test)]
mod tests;

pub use seq::{inverse_sequence, sequence_components};

use crate::feeder::{FeederNetwork, PhaseSet};
use linalg::{principal_angle, Vec3, ZERO_V};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Per-phase power base, VA. Together with the source nominal line-to-neutral
/// voltage this fixes the per-unit system for every solution.
pub const S_BASE_VA: f64 = 1.0e6;

/// Convergence tolerance on the per-unit complex-power mismatch.
pub const TOLERANCE_PU: f64 = 1e-8;

/// Iteration cap for the sweep.
pub const MAX_ITERATIONS: usize = 100;

pub const FAULT_IMPEDANCE_MIN_OHMS: f64 = 0.001;
pub const FAULT_IMPEDANCE_MAX_OHMS: f64 = 20.0;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("line {0} has a singular or zero impedance on its phases")]
    SingularLine(String),
    #[error("unknown relay id `{0}`")]
    UnknownRelay(String),
}

/// Shunt fault kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultType {
    #[serde(rename = "SLG")]
    Slg,
    #[serde(rename = "LL")]
    Ll,
    #[serde(rename = "LLG")]
    Llg,
    #[serde(rename = "3PH")]
    ThreePhase,
}

impl FaultType {
    pub fn phase_count(self) -> usize {
        match self {
            FaultType::Slg => 1,
            FaultType::Ll | FaultType::Llg => 2,
            FaultType::ThreePhase => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FaultType::Slg => "SLG",
            FaultType::Ll => "LL",
            FaultType::Llg => "LLG",
            FaultType::ThreePhase => "3PH",
        }
    }
}

/// A shunt fault at a bus: phase-to-ground for SLG/LLG (each faulted phase
/// through the fault impedance), phase-to-phase for LL, all three phases to
/// ground for 3PH.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub bus: usize,
    pub fault_type: FaultType,
    pub phases: PhaseSet,
    pub impedance_ohms: f64,
}

impl FaultSpec {
    pub fn validate(&self, network: &FeederNetwork) -> Result<(), PowerFlowError> {
        if self.bus >= network.buses().len() {
            return Err(PowerFlowError::Config(format!(
                "fault bus index {} out of range",
                self.bus
            )));
        }
        if !(FAULT_IMPEDANCE_MIN_OHMS..=FAULT_IMPEDANCE_MAX_OHMS).contains(&self.impedance_ohms) {
            return Err(PowerFlowError::Config(format!(
                "fault impedance {} ohm outside [{}, {}]",
                self.impedance_ohms, FAULT_IMPEDANCE_MIN_OHMS, FAULT_IMPEDANCE_MAX_OHMS
            )));
        }
        if self.phases.len() != self.fault_type.phase_count() {
            return Err(PowerFlowError::Config(format!(
                "{} fault needs {} phases, got {}",
                self.fault_type.label(),
                self.fault_type.phase_count(),
                self.phases
            )));
        }
        let bus_phases = network.buses()[self.bus].phases;
        if !self.phases.is_subset_of(bus_phases) {
            return Err(PowerFlowError::Config(format!(
                "fault phases {} not present at bus `{}`",
                self.phases,
                network.bus_id(self.bus)
            )));
        }
        Ok(())
    }
}

/// A generator active in one solve; `fraction` scales its rated power.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveGenerator {
    pub bus: usize,
    pub power_va: [Complex64; 3],
    pub fraction: f64,
}

/// Everything that varies between quasi-static steps on a fixed network.
#[derive(Debug, Clone, Default)]
pub struct OperatingCondition {
    /// Common multiplier applied to every load.
    pub global_multiplier: f64,
    /// Per-load multipliers aligned with `network.loads()`; empty means all 1.
    pub load_multipliers: Vec<f64>,
    /// Complete set of generators injecting this step.
    pub generators: Vec<ActiveGenerator>,
    /// Relay indices whose breakers are open.
    pub open_breakers: BTreeSet<usize>,
    pub fault: Option<FaultSpec>,
}

impl OperatingCondition {
    pub fn nominal() -> Self {
        Self {
            global_multiplier: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self, network: &FeederNetwork) -> Result<(), PowerFlowError> {
        if !(self.global_multiplier.is_finite() && self.global_multiplier > 0.0) {
            return Err(PowerFlowError::Config(
                "global multiplier must be positive and finite".into(),
            ));
        }
        if !self.load_multipliers.is_empty()
            && self.load_multipliers.len() != network.loads().len()
        {
            return Err(PowerFlowError::Config(format!(
                "{} load multipliers for {} loads",
                self.load_multipliers.len(),
                network.loads().len()
            )));
        }
        for m in &self.load_multipliers {
            if !(m.is_finite() && *m > 0.0) {
                return Err(PowerFlowError::Config(
                    "load multipliers must be positive and finite".into(),
                ));
            }
        }
        for g in &self.generators {
            if g.bus >= network.buses().len() {
                return Err(PowerFlowError::Config(format!(
                    "generator bus index {} out of range",
                    g.bus
                )));
            }
            if !(g.fraction.is_finite() && g.fraction >= 0.0) {
                return Err(PowerFlowError::Config(
                    "generator fraction must be finite and non-negative".into(),
                ));
            }
        }
        for r in &self.open_breakers {
            if *r >= network.relays().len() {
                return Err(PowerFlowError::Config(format!(
                    "breaker state for unknown relay index {r}"
                )));
            }
        }
        if let Some(f) = &self.fault {
            f.validate(network)?;
        }
        Ok(())
    }
}

/// Three per-phase complex values (phases A, B, C), per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasorTriple(pub [Complex64; 3]);

impl PhasorTriple {
    pub fn magnitudes(&self) -> [f64; 3] {
        [self.0[0].norm(), self.0[1].norm(), self.0[2].norm()]
    }

    /// Phase angles in (-pi, pi]; zero phasors report angle 0.
    pub fn angles(&self) -> [f64; 3] {
        let ang = |c: Complex64| {
            if c.norm() == 0.0 {
                0.0
            } else {
                principal_angle(c.arg())
            }
        };
        [ang(self.0[0]), ang(self.0[1]), ang(self.0[2])]
    }
}

/// Result of one quasi-static solve. Phasors are per-unit on the source
/// voltage base and [`S_BASE_VA`].
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Per-bus phase voltages, aligned with `network.buses()`.
    pub bus_voltage: Vec<Vec3>,
    /// Per-line phase currents flowing parent-to-child, aligned with
    /// `network.lines()`.
    pub line_current: Vec<Vec3>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
    /// Buses energised in this solve (connected to the source through
    /// closed breakers).
    pub energized: Vec<bool>,
}

/// Solve one quasi-static step. See the module docs for the method.
pub fn solve(
    network: &FeederNetwork,
    condition: &OperatingCondition,
) -> Result<PowerFlowSolution, PowerFlowError> {
    condition.validate(network)?;
    let sys = model::PuSystem::prepare(network, condition)?;
    Ok(sweep::solve(&sys))
}

/// Local measurements at a relay: voltage at its upstream bus and current
/// through its branch. Both are zero triples when the branch is de-energised.
pub fn measure(
    network: &FeederNetwork,
    solution: &PowerFlowSolution,
    relay_id: &str,
) -> Result<(PhasorTriple, PhasorTriple), PowerFlowError> {
    let ri = network
        .relay_index(relay_id)
        .ok_or_else(|| PowerFlowError::UnknownRelay(relay_id.to_string()))?;
    let line = network.relays()[ri].line;
    let from = network.lines()[line].from;
    let to = network.lines()[line].to;
    if solution.energized[to] {
        Ok((
            PhasorTriple(solution.bus_voltage[from]),
            PhasorTriple(solution.line_current[line]),
        ))
    } else {
        // De-energised branch: dead-line measurement, but the upstream bus
        // may still be live.
        let v = if solution.energized[from] {
            solution.bus_voltage[from]
        } else {
            ZERO_V
        };
        Ok((PhasorTriple(v), PhasorTriple(ZERO_V)))
    }
}
