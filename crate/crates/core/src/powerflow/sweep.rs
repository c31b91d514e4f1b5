//! Backward/forward ladder sweep with exact handling of shunt admittances.
//!
//! Backward pass (leaves to root): each energised node aggregates its
//! children into a Norton equivalent `I(V) = J + Y*V` seen through the
//! connecting line, adds its own fault shunt to `Y` and its constant-power
//! draw (at the latest voltage) to `J`. Forward pass (root to leaves) then
//! solves each line section exactly:
//!
//!   V_child = (I + z*Y)^-1 (V_parent - z*J),   I_line = J + Y*V_child.
//!
//! Only the constant-power re-linearisation iterates; fault shunts live in
//! `Y`, so a bolted fault does not destabilise the fixed point.

use super::linalg::{
    identity_masked, invert_masked, mat_add_assign, mat_mul, mat_vec, vec_add_assign, vec_sub,
    Mat3, Vec3, ZERO_M, ZERO_V,
};
use super::model::PuSystem;
use super::{PowerFlowSolution, MAX_ITERATIONS, TOLERANCE_PU};

pub(super) fn solve(sys: &PuSystem) -> PowerFlowSolution {
    let network = sys.network;
    let n = network.buses().len();
    let preorder = network.preorder();

    let mut v: Vec<Vec3> = (0..n)
        .map(|b| {
            if sys.energized[b] {
                masked(&sys.source_v, &sys.bus_mask[b])
            } else {
                ZERO_V
            }
        })
        .collect();
    let mut i_line: Vec<Vec3> = vec![ZERO_V; network.lines().len()];

    let mut node_j: Vec<Vec3> = vec![ZERO_V; n];
    let mut node_y: Vec<Mat3> = vec![ZERO_M; n];
    let mut section_inv: Vec<Mat3> = vec![ZERO_M; n];

    let mut iterations = 0;
    let mut mismatch = f64::INFINITY;
    let mut converged = false;
    let mut singular = false;

    'outer: while iterations < MAX_ITERATIONS {
        iterations += 1;

        // Backward pass over reverse pre-order: children visited first.
        for &u in preorder.iter().rev() {
            if !sys.energized[u] {
                continue;
            }
            node_j[u] = sys.draw_current(u, &v[u]);
            node_y[u] = sys.shunt_y[u];
            for &c in network.children(u) {
                if !sys.energized[c] {
                    continue;
                }
                let li = network.parent_line(c).expect("child has parent line");
                let z = sys.line_z[li].as_ref().expect("energised line has impedance");
                let mask = sys.line_mask[li];

                let mut m = identity_masked(mask);
                mat_add_assign(&mut m, &mat_mul(z, &node_y[c]));
                let Some(minv) = invert_masked(&m, mask) else {
                    singular = true;
                    break 'outer;
                };
                section_inv[c] = minv;

                let y_up = mat_mul(&node_y[c], &minv);
                let z_j = mat_vec(z, &node_j[c]);
                let j_up = vec_sub(&node_j[c], &mat_vec(&y_up, &z_j));
                vec_add_assign(&mut node_j[u], &j_up);
                mat_add_assign(&mut node_y[u], &y_up);
            }
        }

        // Forward pass: propagate voltages and take exact section currents.
        v[sys.source_bus] = masked(&sys.source_v, &sys.bus_mask[sys.source_bus]);
        for &u in preorder {
            if !sys.energized[u] {
                continue;
            }
            for &c in network.children(u) {
                if !sys.energized[c] {
                    continue;
                }
                let li = network.parent_line(c).expect("child has parent line");
                let z = sys.line_z[li].as_ref().unwrap();
                let rhs = vec_sub(&masked(&v[u], &sys.line_mask[li]), &mat_vec(z, &node_j[c]));
                v[c] = mat_vec(&section_inv[c], &rhs);
                let mut i = node_j[c];
                vec_add_assign(&mut i, &mat_vec(&node_y[c], &v[c]));
                i_line[li] = i;
            }
        }

        mismatch = residual_mismatch(sys, &v, &i_line);
        if mismatch < TOLERANCE_PU {
            converged = true;
            break;
        }
    }
    if singular {
        converged = false;
        mismatch = f64::INFINITY;
    }

    PowerFlowSolution {
        bus_voltage: v,
        line_current: i_line,
        converged,
        iterations,
        max_mismatch: mismatch,
        energized: sys.energized.clone(),
    }
}

fn masked(v: &Vec3, mask: &[bool; 3]) -> Vec3 {
    let mut out = ZERO_V;
    for p in 0..3 {
        if mask[p] {
            out[p] = v[p];
        }
    }
    out
}

/// Max per-phase complex-power mismatch of the Kirchhoff balance at every
/// energised non-source bus, evaluated at the latest voltages.
fn residual_mismatch(sys: &PuSystem, v: &[Vec3], i_line: &[Vec3]) -> f64 {
    let network = sys.network;
    let mut worst: f64 = 0.0;
    for &u in network.preorder() {
        if u == sys.source_bus || !sys.energized[u] {
            continue;
        }
        let li = network.parent_line(u).expect("non-root bus");
        let mut r = i_line[li];
        for &c in network.children(u) {
            if sys.energized[c] {
                let cl = network.parent_line(c).unwrap();
                r = vec_sub(&r, &i_line[cl]);
            }
        }
        r = vec_sub(&r, &mat_vec(&sys.shunt_y[u], &v[u]));
        r = vec_sub(&r, &sys.draw_current(u, &v[u]));
        for p in 0..3 {
            worst = worst.max((v[u][p] * r[p].conj()).norm());
        }
    }
    worst
}
