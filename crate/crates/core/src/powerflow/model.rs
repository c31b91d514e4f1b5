//! Shared problem setup: per-unit conversion, topology reduction behind open
//! breakers, fault-shunt stamps and the injection (load) model.
//!
//! Both the sweep solver and the Newton oracle consume a [`PuSystem`]; they
//! share the problem definition but nothing of the solution path.

use super::linalg::{Mask, Mat3, Vec3, ZERO_M, ZERO_V};
use super::{FaultType, FeederNetwork, OperatingCondition, PowerFlowError, S_BASE_VA};
use crate::feeder::Phase;
use num_complex::Complex64;

/// Below this per-unit voltage magnitude a constant-power injection reverts
/// to the constant-impedance characteristic anchored at the threshold, so
/// the drawn current goes to zero with the voltage instead of diverging.
/// The current is continuous across the threshold.
pub const V_CONST_POWER_MIN_PU: f64 = 0.5;

/// Current drawn by a constant-power injection `s` (per-unit) at voltage `v`.
pub fn injection_current(s: Complex64, v: Complex64) -> Complex64 {
    if s == Complex64::default() {
        return Complex64::default();
    }
    let vm = v.norm();
    if vm >= V_CONST_POWER_MIN_PU {
        (s / v).conj()
    } else {
        s.conj() * v / (V_CONST_POWER_MIN_PU * V_CONST_POWER_MIN_PU)
    }
}

/// Complex power actually drawn by the injection model at voltage `v`.
pub fn injection_power(s: Complex64, v: Complex64) -> Complex64 {
    let vm = v.norm();
    if vm >= V_CONST_POWER_MIN_PU {
        s
    } else {
        s * (vm * vm) / (V_CONST_POWER_MIN_PU * V_CONST_POWER_MIN_PU)
    }
}

/// Network + operating condition reduced to per-unit arrays over bus and
/// line indices. Buses behind open breakers are marked de-energised and
/// excluded from the equations.
pub struct PuSystem<'a> {
    pub network: &'a FeederNetwork,
    pub v_base: f64,
    pub z_base: f64,
    /// Source voltage, pu.
    pub source_v: Vec3,
    pub source_bus: usize,
    /// Per-bus energised flag.
    pub energized: Vec<bool>,
    /// Per-bus phase mask.
    pub bus_mask: Vec<Mask>,
    /// Per-line series impedance (pu) and phase mask; `None` when the line
    /// is open or feeds a de-energised subtree.
    pub line_z: Vec<Option<Mat3>>,
    pub line_mask: Vec<Mask>,
    /// Net constant-power injection per bus and phase, pu (loads positive,
    /// generation negative).
    pub injection_s: Vec<Vec3>,
    /// Fault shunt admittance per bus, pu.
    pub shunt_y: Vec<Mat3>,
}

impl<'a> PuSystem<'a> {
    pub fn prepare(
        network: &'a FeederNetwork,
        condition: &OperatingCondition,
    ) -> Result<Self, PowerFlowError> {
        let n = network.buses().len();
        let source_bus = network.source().bus;
        let v_base = network.buses()[source_bus].nominal_voltage_v;
        let z_base = v_base * v_base / S_BASE_VA;

        let mut source_v = ZERO_V;
        for p in 0..3 {
            source_v[p] = network.source().voltage_v[p] / v_base;
        }

        // Energisation: walk the tree, stopping at open relay branches.
        let mut open_lines = vec![false; network.lines().len()];
        for &r in &condition.open_breakers {
            open_lines[network.relays()[r].line] = true;
        }
        let mut energized = vec![false; n];
        energized[source_bus] = true;
        for &u in network.preorder() {
            if u == source_bus {
                continue;
            }
            let li = network.parent_line(u).expect("non-root bus has parent");
            let parent = network.parent(u).expect("non-root bus has parent");
            energized[u] = energized[parent] && !open_lines[li];
        }

        let bus_mask: Vec<Mask> = network
            .buses()
            .iter()
            .map(|b| {
                let mut m = [false; 3];
                for p in Phase::ALL {
                    m[p.index()] = b.phases.contains(p);
                }
                m
            })
            .collect();

        let zc = Complex64::new(z_base, 0.0);
        let mut line_z = Vec::with_capacity(network.lines().len());
        let mut line_mask = Vec::with_capacity(network.lines().len());
        for (li, l) in network.lines().iter().enumerate() {
            let mask = bus_mask[l.to];
            line_mask.push(mask);
            if !energized[l.to] {
                line_z.push(None);
                continue;
            }
            let mut z = ZERO_M;
            for r in 0..3 {
                for c in 0..3 {
                    z[r][c] = l.impedance_ohms[r][c] / zc;
                }
            }
            // Reject zero/singular impedance on the carried phases.
            if super::linalg::invert_masked(&z, mask).is_none() {
                return Err(PowerFlowError::SingularLine(format!(
                    "{}--{}",
                    network.bus_id(l.from),
                    network.bus_id(l.to)
                )));
            }
            let _ = li;
            line_z.push(Some(z));
        }

        let mut injection_s = vec![ZERO_V; n];
        for (i, load) in network.loads().iter().enumerate() {
            let mult = condition.global_multiplier
                * condition.load_multipliers.get(i).copied().unwrap_or(1.0);
            for p in 0..3 {
                injection_s[load.bus][p] += load.power_va[p] * mult / S_BASE_VA;
            }
        }
        for g in &condition.generators {
            for p in 0..3 {
                injection_s[g.bus][p] -= g.power_va[p] * g.fraction / S_BASE_VA;
            }
        }

        let mut shunt_y = vec![ZERO_M; n];
        if let Some(f) = &condition.fault {
            let y = Complex64::new(1.0, 0.0) / (Complex64::new(f.impedance_ohms, 0.0) / zc);
            let ph: Vec<usize> = f.phases.iter().map(|p| p.index()).collect();
            let stamp = &mut shunt_y[f.bus];
            match f.fault_type {
                FaultType::Slg | FaultType::Llg | FaultType::ThreePhase => {
                    // Each faulted phase to ground through the impedance.
                    for &p in &ph {
                        stamp[p][p] += y;
                    }
                }
                FaultType::Ll => {
                    let (a, b) = (ph[0], ph[1]);
                    stamp[a][a] += y;
                    stamp[b][b] += y;
                    stamp[a][b] -= y;
                    stamp[b][a] -= y;
                }
            }
        }

        Ok(Self {
            network,
            v_base,
            z_base,
            source_v,
            source_bus,
            energized,
            bus_mask,
            line_z,
            line_mask,
            injection_s,
            shunt_y,
        })
    }

    /// Current drawn at a bus by its constant-power injections, given the
    /// bus voltage (per phase).
    pub fn draw_current(&self, bus: usize, v: &Vec3) -> Vec3 {
        let mut out = ZERO_V;
        for p in 0..3 {
            out[p] = injection_current(self.injection_s[bus][p], v[p]);
        }
        out
    }
}
