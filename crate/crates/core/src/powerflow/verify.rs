//! Solution certificate, recomputed from the returned phasors alone.
//!
//! Independent of either solver path: line currents are re-derived from the
//! voltage phasors through the series impedances, and the Kirchhoff power
//! balance is checked against the injection model at the solved voltages.

use super::linalg::{invert_masked, mat_vec, vec_sub, Vec3, ZERO_V};
use super::model::PuSystem;
use super::{FeederNetwork, OperatingCondition, PowerFlowError, PowerFlowSolution};

#[derive(Debug, Clone, Copy)]
pub struct Certificate {
    /// Max per-phase complex-power imbalance at any energised bus, pu.
    pub max_power_mismatch: f64,
    /// Max difference between reported line currents and currents recomputed
    /// from the voltage phasors, pu.
    pub max_current_residual: f64,
}

pub fn certify(
    network: &FeederNetwork,
    condition: &OperatingCondition,
    solution: &PowerFlowSolution,
) -> Result<Certificate, PowerFlowError> {
    let sys = PuSystem::prepare(network, condition)?;

    let mut recomputed: Vec<Vec3> = vec![ZERO_V; network.lines().len()];
    let mut current_residual: f64 = 0.0;
    for (li, line) in network.lines().iter().enumerate() {
        match &sys.line_z[li] {
            Some(z) => {
                let y = invert_masked(z, sys.line_mask[li]).ok_or_else(|| {
                    PowerFlowError::SingularLine(format!(
                        "{}--{}",
                        network.bus_id(line.from),
                        network.bus_id(line.to)
                    ))
                })?;
                let dv = vec_sub(
                    &solution.bus_voltage[line.from],
                    &solution.bus_voltage[line.to],
                );
                recomputed[li] = mat_vec(&y, &dv);
            }
            None => recomputed[li] = ZERO_V,
        }
        for p in 0..3 {
            current_residual =
                current_residual.max((recomputed[li][p] - solution.line_current[li][p]).norm());
        }
    }

    let mut power_mismatch: f64 = 0.0;
    for &u in network.preorder() {
        if u == sys.source_bus || !sys.energized[u] {
            continue;
        }
        let li = network.parent_line(u).expect("non-root bus");
        let mut r = recomputed[li];
        for &c in network.children(u) {
            if sys.energized[c] {
                r = vec_sub(&r, &recomputed[network.parent_line(c).unwrap()]);
            }
        }
        r = vec_sub(&r, &mat_vec(&sys.shunt_y[u], &solution.bus_voltage[u]));
        r = vec_sub(&r, &sys.draw_current(u, &solution.bus_voltage[u]));
        for p in 0..3 {
            power_mismatch = power_mismatch.max((solution.bus_voltage[u][p] * r[p].conj()).norm());
        }
    }

    Ok(Certificate {
        max_power_mismatch: power_mismatch,
        max_current_residual: current_residual,
    })
}
