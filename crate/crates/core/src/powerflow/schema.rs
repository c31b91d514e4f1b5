//! External JSON forms for operating conditions and solutions, using the
//! same conventions as feeder documents: complex numbers as [re, im] pairs,
//! elements referenced by id.

use super::{
    ActiveGenerator, FaultSpec, FaultType, OperatingCondition, PowerFlowError, PowerFlowSolution,
};
use crate::feeder::{FeederNetwork, PhaseSet};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

type Pair = [f64; 2];

fn c64(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(c: Complex64) -> Pair {
    [c.re, c.im]
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionDoc {
    pub global_multiplier: Option<f64>,
    /// Aligned with the feeder document's load order; empty means all 1.
    pub load_multipliers: Vec<f64>,
    pub generators: Vec<GeneratorDoc>,
    /// Relay ids whose breakers are open.
    pub open_breakers: Vec<String>,
    pub fault: Option<ConditionFaultDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeneratorDoc {
    pub bus: String,
    pub power_va: [Pair; 3],
    #[serde(default = "one")]
    pub fraction: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConditionFaultDoc {
    pub bus: String,
    #[serde(rename = "type")]
    pub fault_type: FaultType,
    pub phases: String,
    pub impedance_ohms: f64,
}

impl ConditionDoc {
    pub fn parse(text: &str) -> Result<Self, PowerFlowError> {
        serde_json::from_str(text).map_err(|e| PowerFlowError::Config(e.to_string()))
    }

    pub fn resolve(&self, network: &FeederNetwork) -> Result<OperatingCondition, PowerFlowError> {
        let bus = |id: &str| {
            network
                .bus_index(id)
                .ok_or_else(|| PowerFlowError::Config(format!("unknown bus `{id}`")))
        };
        let mut open_breakers = std::collections::BTreeSet::new();
        for id in &self.open_breakers {
            open_breakers.insert(
                network
                    .relay_index(id)
                    .ok_or_else(|| PowerFlowError::UnknownRelay(id.clone()))?,
            );
        }
        Ok(OperatingCondition {
            global_multiplier: self.global_multiplier.unwrap_or(1.0),
            load_multipliers: self.load_multipliers.clone(),
            generators: self
                .generators
                .iter()
                .map(|g| {
                    Ok(ActiveGenerator {
                        bus: bus(&g.bus)?,
                        power_va: [c64(g.power_va[0]), c64(g.power_va[1]), c64(g.power_va[2])],
                        fraction: g.fraction,
                    })
                })
                .collect::<Result<_, PowerFlowError>>()?,
            open_breakers,
            fault: self
                .fault
                .as_ref()
                .map(|f| -> Result<FaultSpec, PowerFlowError> {
                    Ok(FaultSpec {
                        bus: bus(&f.bus)?,
                        fault_type: f.fault_type,
                        phases: PhaseSet::parse(&f.phases).ok_or_else(|| {
                            PowerFlowError::Config(format!("bad fault phases `{}`", f.phases))
                        })?,
                        impedance_ohms: f.impedance_ohms,
                    })
                })
                .transpose()?,
        })
    }
}

/// Solution document: per-bus voltages and per-line currents in pu, phasors
/// as [re, im].
#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch_pu: f64,
    pub bus_voltages_pu: Vec<BusVoltageDoc>,
    pub line_currents_pu: Vec<LineCurrentDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BusVoltageDoc {
    pub bus: String,
    pub energized: bool,
    pub voltage: [Pair; 3],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LineCurrentDoc {
    pub from: String,
    pub to: String,
    pub current: [Pair; 3],
}

impl SolutionDoc {
    pub fn from_solution(network: &FeederNetwork, sol: &PowerFlowSolution) -> Self {
        Self {
            converged: sol.converged,
            iterations: sol.iterations,
            max_mismatch_pu: sol.max_mismatch,
            bus_voltages_pu: network
                .buses()
                .iter()
                .enumerate()
                .map(|(b, bus)| BusVoltageDoc {
                    bus: bus.id.clone(),
                    energized: sol.energized[b],
                    voltage: [
                        pair(sol.bus_voltage[b][0]),
                        pair(sol.bus_voltage[b][1]),
                        pair(sol.bus_voltage[b][2]),
                    ],
                })
                .collect(),
            line_currents_pu: network
                .lines()
                .iter()
                .enumerate()
                .map(|(li, line)| LineCurrentDoc {
                    from: network.bus_id(line.from).to_string(),
                    to: network.bus_id(line.to).to_string(),
                    current: [
                        pair(sol.line_current[li][0]),
                        pair(sol.line_current[li][1]),
                        pair(sol.line_current[li][2]),
                    ],
                })
                .collect(),
        }
    }

    /// Aligned-column text rendering (magnitudes and angles in degrees).
    pub fn to_table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(
            out,
            "converged: {}  iterations: {}  max mismatch: {:.3e} pu",
            self.converged, self.iterations, self.max_mismatch_pu
        )
        .unwrap();
        writeln!(out, "{:<8} {:>22} {:>22} {:>22}", "Bus", "Va (pu)", "Vb (pu)", "Vc (pu)").unwrap();
        let fmt = |p: Pair| {
            let c = c64(p);
            if c.norm() == 0.0 {
                "-".to_string()
            } else {
                format!("{:.4} @ {:>7.2}°", c.norm(), c.arg().to_degrees())
            }
        };
        for b in &self.bus_voltages_pu {
            writeln!(
                out,
                "{:<8} {:>22} {:>22} {:>22}",
                b.bus,
                fmt(b.voltage[0]),
                fmt(b.voltage[1]),
                fmt(b.voltage[2])
            )
            .unwrap();
        }
        writeln!(out, "{:<8} {:>22} {:>22} {:>22}", "Line", "Ia (pu)", "Ib (pu)", "Ic (pu)").unwrap();
        for l in &self.line_currents_pu {
            writeln!(
                out,
                "{:<8} {:>22} {:>22} {:>22}",
                format!("{}-{}", l.from, l.to),
                fmt(l.current[0]),
                fmt(l.current[1]),
                fmt(l.current[2])
            )
            .unwrap();
        }
        out
    }
}
