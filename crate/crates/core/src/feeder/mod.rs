//! Radial feeder data model.
//!
//! A [`FeederNetwork`] is an immutable, validated snapshot of a radial
//! three-phase network: buses, series lines, spot loads, distributed
//! generators, one slack source and the protective relays sitting on
//! branches. Construction goes through [`parse_feeder`] (JSON document) or
//! the bundled feeders in [`bundled`]; both enforce the tree invariants, so
//! the rest of the crate can assume a well-formed radial graph.

mod schema;
mod zones;

pub mod bundled;

pub use schema::parse_feeder;
pub use zones::{protection_zones, training_order, ProtectionZone};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// One of the three phases, ordered A, B, C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A = 0,
    B = 1,
    C = 2,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'A',
            Phase::B => 'B',
            Phase::C => 'C',
        }
    }
}

/// Subset of {A, B, C} present at a bus or carried by a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);
    pub const EMPTY: PhaseSet = PhaseSet(0);

    pub fn from_phases(phases: &[Phase]) -> Self {
        let mut bits = 0u8;
        for p in phases {
            bits |= 1 << p.index();
        }
        PhaseSet(bits)
    }

    /// Parse a string like "ABC" or "AC". Repeated letters are rejected.
    pub fn parse(s: &str) -> Option<Self> {
        let mut bits = 0u8;
        for ch in s.chars() {
            let bit = match ch.to_ascii_uppercase() {
                'A' => 1u8,
                'B' => 2,
                'C' => 4,
                _ => return None,
            };
            if bits & bit != 0 {
                return None;
            }
            bits |= bit;
        }
        Some(PhaseSet(bits))
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl std::fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

/// Compare element ids numerically when both parse as integers, otherwise
/// lexicographically. Keeps "2" < "10" for the usual numeric bus names.
pub fn id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: String,
    /// Nominal line-to-neutral voltage, volts.
    pub nominal_voltage_v: f64,
    pub phases: PhaseSet,
}

/// Series line section. After validation lines are oriented `from` = parent
/// (towards the source), `to` = child.
#[derive(Debug, Clone)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// 3x3 series impedance in ohms, row-major A,B,C. Absent phases carry
    /// zero rows/columns.
    pub impedance_ohms: [[Complex64; 3]; 3],
}

#[derive(Debug, Clone)]
pub struct Load {
    pub bus: usize,
    /// Per-phase complex power in VA (constant-power model).
    pub power_va: [Complex64; 3],
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub bus: usize,
    /// Per-phase rated power in VA; injected as negative constant-power load.
    pub power_va: [Complex64; 3],
}

#[derive(Debug, Clone)]
pub struct Source {
    pub bus: usize,
    /// Per-phase voltage phasors in volts.
    pub voltage_v: [Complex64; 3],
}

#[derive(Debug, Clone)]
pub struct Relay {
    pub id: String,
    /// Index of the monitored line; the breaker opens this branch.
    pub line: usize,
}

/// Validated radial network. Immutable after construction; shared read-only
/// across episodes.
#[derive(Debug, Clone)]
pub struct FeederNetwork {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    loads: Vec<Load>,
    generators: Vec<Generator>,
    source: Source,
    relays: Vec<Relay>,

    // Derived topology, built once at construction.
    bus_index: BTreeMap<String, usize>,
    relay_index: BTreeMap<String, usize>,
    parent: Vec<Option<usize>>,
    parent_line: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    preorder: Vec<usize>,
    /// Relay owning each bus's primary zone (nearest relay on the path to
    /// the source), None for buses above the first relay.
    zone_owner: Vec<Option<usize>>,
    /// Immediate upstream relay of each relay (the one providing backup).
    upstream_relay: Vec<Option<usize>>,
}

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("invalid feeder document: {0}")]
    Schema(String),
    #[error("duplicate bus id `{0}`")]
    DuplicateBus(String),
    #[error("{element} references unknown bus `{bus}`")]
    UnknownBus { element: String, bus: String },
    #[error("non-tree topology: {0}")]
    NonTree(String),
    #[error("{element}: phases {phases} not present at bus `{bus}`")]
    PhaseMismatch {
        element: String,
        bus: String,
        phases: String,
    },
    #[error("relay `{relay}` references unknown branch {from}--{to}")]
    UnknownBranch {
        relay: String,
        from: String,
        to: String,
    },
    #[error("relays `{first}` and `{second}` monitor the same branch")]
    DuplicateRelayBranch { first: String, second: String },
    #[error("duplicate relay id `{0}`")]
    DuplicateRelay(String),
}

impl FeederNetwork {
    /// Assemble and validate a network from its parts. `lines` may be given
    /// in either orientation; they are re-oriented parent-to-child here.
    pub(crate) fn assemble(
        buses: Vec<Bus>,
        mut lines: Vec<Line>,
        loads: Vec<Load>,
        generators: Vec<Generator>,
        source: Source,
        relays: Vec<Relay>,
    ) -> Result<Self, FeederError> {
        let n = buses.len();
        if n == 0 {
            return Err(FeederError::Schema("no buses".into()));
        }
        let mut bus_index = BTreeMap::new();
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id.clone(), i).is_some() {
                return Err(FeederError::DuplicateBus(b.id.clone()));
            }
        }

        if lines.len() != n - 1 {
            return Err(FeederError::NonTree(format!(
                "{} buses require {} lines, found {}",
                n,
                n - 1,
                lines.len()
            )));
        }

        // BFS from the source orients every line parent -> child and proves
        // reachability; with |lines| = n - 1 that also excludes cycles.
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (li, l) in lines.iter().enumerate() {
            adj[l.from].push((l.to, li));
            adj[l.to].push((l.from, li));
        }
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut parent_line: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[source.bus] = true;
        let mut queue = std::collections::VecDeque::from([source.bus]);
        while let Some(u) = queue.pop_front() {
            for &(v, li) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    parent_line[v] = Some(li);
                    queue.push_back(v);
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| !seen[i]) {
            return Err(FeederError::NonTree(format!(
                "bus `{}` unreachable from source `{}`",
                buses[i].id, buses[source.bus].id
            )));
        }
        for (v, pl) in parent_line.iter().enumerate() {
            if let Some(li) = pl {
                let l = &mut lines[*li];
                if l.to != v {
                    // flip orientation, transposing the impedance is a no-op
                    // for symmetric matrices but done anyway for correctness
                    std::mem::swap(&mut l.from, &mut l.to);
                    let z = l.impedance_ohms;
                    for r in 0..3 {
                        for c in 0..3 {
                            l.impedance_ohms[r][c] = z[c][r];
                        }
                    }
                }
            }
        }

        // Children ordered by natural id for deterministic traversals.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for v in 0..n {
            if let Some(u) = parent[v] {
                children[u].push(v);
            }
        }
        for ch in &mut children {
            ch.sort_by(|&a, &b| id_cmp(&buses[a].id, &buses[b].id));
        }
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![source.bus];
        while let Some(u) = stack.pop() {
            preorder.push(u);
            for &c in children[u].iter().rev() {
                stack.push(c);
            }
        }

        // Phase consistency: line phases are the child bus phases and must
        // exist at the parent; injections must sit on present phases.
        for l in &lines {
            if !buses[l.to].phases.is_subset_of(buses[l.from].phases) {
                return Err(FeederError::PhaseMismatch {
                    element: format!("line {}--{}", buses[l.from].id, buses[l.to].id),
                    bus: buses[l.from].id.clone(),
                    phases: buses[l.to].phases.to_string(),
                });
            }
        }
        for (what, bus, power) in loads
            .iter()
            .map(|ld| ("load", ld.bus, &ld.power_va))
            .chain(generators.iter().map(|g| ("generator", g.bus, &g.power_va)))
        {
            let used = PhaseSet::from_phases(
                &Phase::ALL
                    .into_iter()
                    .filter(|p| power[p.index()] != Complex64::new(0.0, 0.0))
                    .collect::<Vec<_>>(),
            );
            if !used.is_subset_of(buses[bus].phases) {
                return Err(FeederError::PhaseMismatch {
                    element: format!("{what} at bus `{}`", buses[bus].id),
                    bus: buses[bus].id.clone(),
                    phases: used.to_string(),
                });
            }
        }

        let mut relay_index = BTreeMap::new();
        let mut line_relay: BTreeMap<usize, usize> = BTreeMap::new();
        for (ri, r) in relays.iter().enumerate() {
            if relay_index.insert(r.id.clone(), ri).is_some() {
                return Err(FeederError::DuplicateRelay(r.id.clone()));
            }
            if let Some(&other) = line_relay.get(&r.line) {
                return Err(FeederError::DuplicateRelayBranch {
                    first: relays[other].id.clone(),
                    second: r.id.clone(),
                });
            }
            line_relay.insert(r.line, ri);
        }

        // Nearest upstream relay per bus gives the primary-zone owner; the
        // same walk yields each relay's backup provider.
        let mut zone_owner: Vec<Option<usize>> = vec![None; n];
        for &u in &preorder {
            if let Some(li) = parent_line[u] {
                zone_owner[u] = match line_relay.get(&li) {
                    Some(&r) => Some(r),
                    None => zone_owner[parent[u].unwrap()],
                };
            }
        }
        let mut upstream_relay = vec![None; relays.len()];
        for (ri, r) in relays.iter().enumerate() {
            let top = lines[r.line].from;
            upstream_relay[ri] = zone_owner[top];
        }

        Ok(Self {
            buses,
            lines,
            loads,
            generators,
            source,
            relays,
            bus_index,
            relay_index,
            parent,
            parent_line,
            children,
            preorder,
            zone_owner,
            upstream_relay,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn relays(&self) -> &[Relay] {
        &self.relays
    }

    pub fn bus_id(&self, index: usize) -> &str {
        &self.buses[index].id
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    pub fn relay_index(&self, id: &str) -> Option<usize> {
        self.relay_index.get(id).copied()
    }

    pub fn parent(&self, bus: usize) -> Option<usize> {
        self.parent[bus]
    }

    pub fn parent_line(&self, bus: usize) -> Option<usize> {
        self.parent_line[bus]
    }

    pub fn children(&self, bus: usize) -> &[usize] {
        &self.children[bus]
    }

    /// Buses in pre-order from the source (parents before children).
    pub fn preorder(&self) -> &[usize] {
        &self.preorder
    }

    /// Relay owning the primary zone that contains `bus`, if any.
    pub fn zone_owner(&self, bus: usize) -> Option<usize> {
        self.zone_owner[bus]
    }

    /// The relay immediately upstream of `relay` (its backup provider).
    pub fn upstream_relay(&self, relay: usize) -> Option<usize> {
        self.upstream_relay[relay]
    }

    /// Relays immediately downstream of `relay` (the ones it backs up).
    pub fn downstream_relays(&self, relay: usize) -> Vec<usize> {
        (0..self.relays.len())
            .filter(|&r| self.upstream_relay[r] == Some(relay))
            .collect()
    }

    /// Buses in the primary zone of `relay`, ascending by index.
    pub fn primary_zone(&self, relay: usize) -> BTreeSet<usize> {
        (0..self.buses.len())
            .filter(|&b| self.zone_owner[b] == Some(relay))
            .collect()
    }

    /// Same network with only the named relays retained; zones are
    /// recomputed for the reduced relay set.
    pub fn retain_relays(&self, ids: &[&str]) -> Result<FeederNetwork, FeederError> {
        let keep: BTreeSet<&str> = ids.iter().copied().collect();
        for id in &keep {
            if !self.relay_index.contains_key(*id) {
                return Err(FeederError::Schema(format!("unknown relay `{id}`")));
            }
        }
        let relays = self
            .relays
            .iter()
            .filter(|r| keep.contains(r.id.as_str()))
            .cloned()
            .collect();
        Self::assemble(
            self.buses.clone(),
            self.lines.clone(),
            self.loads.clone(),
            self.generators.clone(),
            self.source.clone(),
            relays,
        )
    }
}
