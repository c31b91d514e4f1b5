//! JSON feeder document parsing.
//!
//! A feeder document is a single JSON object with top-level keys `buses`,
//! `lines`, `loads`, `generators`, `source`, `relays`. Complex numbers are
//! two-element `[re, im]` arrays; impedance matrices are 3x3 nested arrays,
//! row-major, phases ordered A,B,C, with zero rows/columns for absent
//! phases.

use super::{Bus, FeederError, FeederNetwork, Generator, Line, Load, PhaseSet, Relay, Source};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub(crate) type Pair = [f64; 2];

pub(crate) fn c64(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub(crate) fn triple(ps: &[Pair; 3]) -> [Complex64; 3] {
    [c64(ps[0]), c64(ps[1]), c64(ps[2])]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeederDoc {
    buses: Vec<BusDoc>,
    lines: Vec<LineDoc>,
    loads: Vec<InjectionDoc>,
    generators: Vec<InjectionDoc>,
    source: SourceDoc,
    relays: Vec<RelayDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: String,
    nominal_voltage_v: f64,
    phases: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    from: String,
    to: String,
    impedance_ohms: [[Pair; 3]; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectionDoc {
    bus: String,
    power_va: [Pair; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceDoc {
    bus: String,
    voltage_v: [Pair; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelayDoc {
    id: String,
    from: String,
    to: String,
}

/// Parse and validate a feeder document.
pub fn parse_feeder(document: &str) -> Result<FeederNetwork, FeederError> {
    let doc: FeederDoc =
        serde_json::from_str(document).map_err(|e| FeederError::Schema(e.to_string()))?;

    let mut buses = Vec::with_capacity(doc.buses.len());
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for b in &doc.buses {
        let phases = PhaseSet::parse(&b.phases).ok_or_else(|| {
            FeederError::Schema(format!("bus `{}`: bad phase set `{}`", b.id, b.phases))
        })?;
        if phases.is_empty() {
            return Err(FeederError::Schema(format!("bus `{}`: empty phase set", b.id)));
        }
        if !(b.nominal_voltage_v.is_finite() && b.nominal_voltage_v > 0.0) {
            return Err(FeederError::Schema(format!(
                "bus `{}`: nominal voltage must be positive",
                b.id
            )));
        }
        if index.insert(b.id.clone(), buses.len()).is_some() {
            return Err(FeederError::DuplicateBus(b.id.clone()));
        }
        buses.push(Bus {
            id: b.id.clone(),
            nominal_voltage_v: b.nominal_voltage_v,
            phases,
        });
    }

    let look = |id: &str, element: String| -> Result<usize, FeederError> {
        index.get(id).copied().ok_or(FeederError::UnknownBus {
            element,
            bus: id.to_string(),
        })
    };

    let mut lines = Vec::with_capacity(doc.lines.len());
    for l in &doc.lines {
        let from = look(&l.from, format!("line {}--{}", l.from, l.to))?;
        let to = look(&l.to, format!("line {}--{}", l.from, l.to))?;
        let mut z = [[Complex64::new(0.0, 0.0); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                z[r][c] = c64(l.impedance_ohms[r][c]);
            }
        }
        lines.push(Line {
            from,
            to,
            impedance_ohms: z,
        });
    }

    let mut loads = Vec::with_capacity(doc.loads.len());
    for ld in &doc.loads {
        let bus = look(&ld.bus, format!("load at bus {}", ld.bus))?;
        loads.push(Load {
            bus,
            power_va: triple(&ld.power_va),
        });
    }
    let mut generators = Vec::with_capacity(doc.generators.len());
    for g in &doc.generators {
        let bus = look(&g.bus, format!("generator at bus {}", g.bus))?;
        generators.push(Generator {
            bus,
            power_va: triple(&g.power_va),
        });
    }

    let source = Source {
        bus: look(&doc.source.bus, "source".to_string())?,
        voltage_v: triple(&doc.source.voltage_v),
    };

    let mut relays = Vec::with_capacity(doc.relays.len());
    for r in &doc.relays {
        let from = look(&r.from, format!("relay `{}`", r.id))?;
        let to = look(&r.to, format!("relay `{}`", r.id))?;
        let line = lines
            .iter()
            .position(|l| (l.from == from && l.to == to) || (l.from == to && l.to == from))
            .ok_or_else(|| FeederError::UnknownBranch {
                relay: r.id.clone(),
                from: r.from.clone(),
                to: r.to.clone(),
            })?;
        relays.push(Relay {
            id: r.id.clone(),
            line,
        });
    }

    FeederNetwork::assemble(buses, lines, loads, generators, source, relays)
}
