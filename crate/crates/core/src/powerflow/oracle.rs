//! Dense nodal Newton reference solver.
//!
//! Independent of the sweep: assembles the full complex bus-admittance
//! matrix (lines plus fault shunts), splits the nodal current balance into
//! real unknowns and runs damped Newton with a numerically differenced
//! Jacobian. Used by tests as the equivalence oracle; never called from the
//! production solve path.

use super::linalg::{invert_masked, mat_vec, vec_sub, ZERO_V};
use super::model::{injection_current, PuSystem};
use super::{FeederNetwork, OperatingCondition, PowerFlowError, PowerFlowSolution};
use num_complex::Complex64;

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 60;

/// Residual tolerance scaled to the admittance magnitudes: a bolted-fault
/// row multiplies f64 rounding noise by the shunt admittance, so an absolute
/// current tolerance below that floor would never be met.
fn scaled_tolerance(y: &[Vec<Complex64>]) -> f64 {
    let row_scale = y
        .iter()
        .map(|row| row.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    RESIDUAL_TOL * (1.0 + row_scale)
}

pub fn solve_newton(
    network: &FeederNetwork,
    condition: &OperatingCondition,
) -> Result<PowerFlowSolution, PowerFlowError> {
    condition.validate(network)?;
    let sys = PuSystem::prepare(network, condition)?;
    let n = network.buses().len();

    // Slot every energised (bus, phase); unknowns exclude the source bus.
    let mut slot = vec![[usize::MAX; 3]; n];
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for b in 0..n {
        if !sys.energized[b] {
            continue;
        }
        for p in 0..3 {
            if sys.bus_mask[b][p] {
                slot[b][p] = slots.len();
                slots.push((b, p));
            }
        }
    }
    let nslots = slots.len();
    let vars: Vec<usize> = (0..nslots)
        .filter(|&s| slots[s].0 != sys.source_bus)
        .collect();
    let nvars = vars.len();

    // Dense Y over slots: lines plus fault shunts.
    let mut y = vec![vec![Complex64::default(); nslots]; nslots];
    let mut line_y = vec![None; network.lines().len()];
    for (li, line) in network.lines().iter().enumerate() {
        let Some(z) = &sys.line_z[li] else { continue };
        let mask = sys.line_mask[li];
        let yb = invert_masked(z, mask).ok_or_else(|| {
            PowerFlowError::SingularLine(format!(
                "{}--{}",
                network.bus_id(line.from),
                network.bus_id(line.to)
            ))
        })?;
        line_y[li] = Some(yb);
        for p in 0..3 {
            for q in 0..3 {
                if !(mask[p] && mask[q]) {
                    continue;
                }
                let (su_p, sc_p) = (slot[line.from][p], slot[line.to][p]);
                let (su_q, sc_q) = (slot[line.from][q], slot[line.to][q]);
                y[su_p][su_q] += yb[p][q];
                y[sc_p][sc_q] += yb[p][q];
                y[su_p][sc_q] -= yb[p][q];
                y[sc_p][su_q] -= yb[p][q];
            }
        }
    }
    for b in 0..n {
        if !sys.energized[b] {
            continue;
        }
        for p in 0..3 {
            for q in 0..3 {
                let (sp, sq) = (slot[b][p], slot[b][q]);
                if sp != usize::MAX && sq != usize::MAX {
                    y[sp][sq] += sys.shunt_y[b][p][q];
                }
            }
        }
    }

    // Slot voltages; source entries fixed, others are unknowns (flat start).
    let mut v = vec![Complex64::default(); nslots];
    for (s, &(b, p)) in slots.iter().enumerate() {
        v[s] = sys.source_v[p];
        let _ = b;
    }

    // Residual: network current leaving each unknown slot plus load draw.
    let residual = |v: &[Complex64]| -> Vec<Complex64> {
        let mut f = vec![Complex64::default(); nvars];
        for (vi, &s) in vars.iter().enumerate() {
            let (b, p) = slots[s];
            let mut acc = Complex64::default();
            for (t, &vt) in v.iter().enumerate() {
                if y[s][t] != Complex64::default() {
                    acc += y[s][t] * vt;
                }
            }
            acc += injection_current(sys.injection_s[b][p], v[s]);
            f[vi] = acc;
        }
        f
    };

    let norm_inf =
        |f: &[Complex64]| f.iter().map(|c| c.norm()).fold(0.0f64, f64::max);

    let tol = scaled_tolerance(&y);
    let mut iterations = 0;
    let mut converged = nvars == 0;
    if nvars > 0 {
        let mut f = residual(&v);
        for _ in 0..MAX_NEWTON_ITERS {
            if norm_inf(&f) < tol {
                converged = true;
                break;
            }
            iterations += 1;

            // Central-difference Jacobian over the 2*nvars real unknowns.
            let dim = 2 * nvars;
            let mut jac = vec![vec![0.0f64; dim]; dim];
            let h = 1e-7;
            for (vi, &s) in vars.iter().enumerate() {
                for reim in 0..2 {
                    let mut vp = v.to_vec();
                    let mut vm = v.to_vec();
                    if reim == 0 {
                        vp[s] += Complex64::new(h, 0.0);
                        vm[s] -= Complex64::new(h, 0.0);
                    } else {
                        vp[s] += Complex64::new(0.0, h);
                        vm[s] -= Complex64::new(0.0, h);
                    }
                    let fp = residual(&vp);
                    let fm = residual(&vm);
                    let col = 2 * vi + reim;
                    for r in 0..nvars {
                        let d = (fp[r] - fm[r]) / (2.0 * h);
                        jac[2 * r][col] = d.re;
                        jac[2 * r + 1][col] = d.im;
                    }
                }
            }

            let mut rhs = vec![0.0f64; dim];
            for r in 0..nvars {
                rhs[2 * r] = -f[r].re;
                rhs[2 * r + 1] = -f[r].im;
            }
            let Some(step) = solve_dense(jac, rhs) else {
                converged = false;
                break;
            };

            // Backtracking line search on the residual norm.
            let f0 = norm_inf(&f);
            let mut lambda = 1.0;
            loop {
                let mut trial = v.to_vec();
                for (vi, &s) in vars.iter().enumerate() {
                    trial[s] += Complex64::new(lambda * step[2 * vi], lambda * step[2 * vi + 1]);
                }
                let ft = residual(&trial);
                if norm_inf(&ft) < f0 || lambda < 1e-6 {
                    v = trial;
                    f = ft;
                    break;
                }
                lambda *= 0.5;
            }
        }
        converged = converged || norm_inf(&f) < tol;
    }

    // Expand to per-bus voltages and recompute line currents.
    let mut bus_voltage = vec![ZERO_V; n];
    for (s, &(b, p)) in slots.iter().enumerate() {
        bus_voltage[b][p] = v[s];
    }
    let mut line_current = vec![ZERO_V; network.lines().len()];
    for (li, line) in network.lines().iter().enumerate() {
        if let Some(yb) = &line_y[li] {
            let dv = vec_sub(&bus_voltage[line.from], &bus_voltage[line.to]);
            line_current[li] = mat_vec(yb, &dv);
        }
    }

    // Report the power-form mismatch for parity with the sweep.
    let mut mismatch: f64 = 0.0;
    if nvars > 0 {
        let f = residual(&v);
        for (vi, &s) in vars.iter().enumerate() {
            mismatch = mismatch.max((v[s] * f[vi].conj()).norm());
        }
    }

    Ok(PowerFlowSolution {
        bus_voltage,
        line_current,
        converged,
        iterations,
        max_mismatch: mismatch,
        energized: sys.energized.clone(),
    })
}

/// Dense real linear solve by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if mag == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}
