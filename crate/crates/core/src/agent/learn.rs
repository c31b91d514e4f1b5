//! Learning machinery: double-DQN targets, backpropagated TD gradients,
//! Adam and soft target updates.

use super::net::QNetwork;
use super::{AgentError, Transition};
use crate::seed::Rng;
use rand::Rng as _;

/// Gradient accumulators shaped like a network's parameters.
#[derive(Debug, Clone)]
pub struct GradientBuffers {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientBuffers {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            weights: (0..net.layer_count())
                .map(|l| vec![0.0; net.layer_weights(l).len()])
                .collect(),
            biases: (0..net.layer_count())
                .map(|l| vec![0.0; net.layer_biases(l).len()])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// TD targets for a minibatch: `y = R` for terminal transitions, otherwise
/// `y = R + gamma * Q_target(s', a*)` with `a*` chosen by the online network
/// (double DQN) or by the target network itself (vanilla max).
pub fn td_targets(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
    double_dqn: bool,
) -> Result<Vec<f64>, AgentError> {
    let mut out = Vec::with_capacity(batch.len());
    for tr in batch {
        if tr.terminal {
            out.push(tr.reward);
            continue;
        }
        let target_q = target.forward(&tr.next_state)?;
        let value = if double_dqn {
            let online_q = online.forward(&tr.next_state)?;
            target_q[argmax(&online_q)]
        } else {
            target_q[argmax(&target_q)]
        };
        out.push(tr.reward + gamma * value);
    }
    Ok(out)
}

/// Mean-squared TD error over the batch and its gradients w.r.t. every
/// parameter. Only the taken action's output contributes per sample.
pub fn td_gradients(
    net: &QNetwork,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<(GradientBuffers, f64), AgentError> {
    if batch.len() != targets.len() {
        return Err(AgentError::Dimension(format!(
            "batch {} vs targets {}",
            batch.len(),
            targets.len()
        )));
    }
    let mut grads = GradientBuffers::zeros_like(net);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let layers = net.layer_count();
    let dims = net.dims().to_vec();

    for (tr, &y) in batch.iter().zip(targets) {
        if tr.action >= net.output_dim() {
            return Err(AgentError::Dimension(format!(
                "action {} out of range",
                tr.action
            )));
        }
        let cache = net.forward_cached(&tr.state)?;
        let q = cache.pre_activations[layers - 1][tr.action];
        let err = y - q;
        loss += scale * err * err;

        // Output-layer delta: d(loss)/d(q_a) on the taken action only.
        let mut delta = vec![0.0; net.output_dim()];
        delta[tr.action] = -2.0 * scale * err;

        for l in (0..layers).rev() {
            let (rows, cols) = (dims[l + 1], dims[l]);
            let input = &cache.activations[l];
            {
                let gw = &mut grads.weights[l];
                let gb = &mut grads.biases[l];
                for r in 0..rows {
                    let d = delta[r];
                    if d != 0.0 {
                        let row = &mut gw[r * cols..(r + 1) * cols];
                        for (g, x) in row.iter_mut().zip(input) {
                            *g += d * x;
                        }
                        gb[r] += d;
                    }
                }
            }
            if l > 0 {
                let w = net.layer_weights(l);
                let mut prev = vec![0.0; cols];
                for r in 0..rows {
                    let d = delta[r];
                    if d != 0.0 {
                        let row = &w[r * cols..(r + 1) * cols];
                        for (p, wv) in prev.iter_mut().zip(row) {
                            *p += d * wv;
                        }
                    }
                }
                // ReLU derivative at the previous layer's pre-activation.
                for (p, z) in prev.iter_mut().zip(&cache.pre_activations[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    if !loss.is_finite() || !grads.is_finite() {
        return Err(AgentError::NonFinite("TD loss/gradients".into()));
    }
    Ok((grads, loss))
}

/// Central-difference gradients of the same batch loss; the validation
/// oracle for [`td_gradients`]. Perturbs every parameter by `h` in both
/// directions and re-evaluates the loss.
pub fn finite_difference_gradients(
    net: &QNetwork,
    batch: &[&Transition],
    targets: &[f64],
    h: f64,
) -> Result<GradientBuffers, AgentError> {
    let loss_of = |net: &QNetwork| -> Result<f64, AgentError> {
        let mut loss = 0.0;
        for (tr, &y) in batch.iter().zip(targets) {
            let q = net.forward(&tr.state)?[tr.action];
            loss += (y - q) * (y - q) / batch.len() as f64;
        }
        Ok(loss)
    };
    let mut grads = GradientBuffers::zeros_like(net);
    let mut probe = net.clone();
    for l in 0..net.layer_count() {
        for i in 0..net.layer_weights(l).len() {
            let orig = probe.layer_weights(l)[i];
            probe.layer_weights_mut(l)[i] = orig + h;
            let up = loss_of(&probe)?;
            probe.layer_weights_mut(l)[i] = orig - h;
            let down = loss_of(&probe)?;
            probe.layer_weights_mut(l)[i] = orig;
            grads.weights[l][i] = (up - down) / (2.0 * h);
        }
        for i in 0..net.layer_biases(l).len() {
            let orig = probe.layer_biases(l)[i];
            probe.layer_biases_mut(l)[i] = orig + h;
            let up = loss_of(&probe)?;
            probe.layer_biases_mut(l)[i] = orig - h;
            let down = loss_of(&probe)?;
            probe.layer_biases_mut(l)[i] = orig;
            grads.biases[l][i] = (up - down) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Adam first/second moment state.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: GradientBuffers,
    v: GradientBuffers,
    step: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(net: &QNetwork) -> Self {
        Self {
            m: GradientBuffers::zeros_like(net),
            v: GradientBuffers::zeros_like(net),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction.
pub fn adam_step(net: &mut QNetwork, grads: &GradientBuffers, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for l in 0..net.layer_count() {
        update_slice(
            net.layer_weights_mut(l),
            &grads.weights[l],
            &mut state.m.weights[l],
            &mut state.v.weights[l],
            lr,
            bc1,
            bc2,
        );
        update_slice(
            net.layer_biases_mut(l),
            &grads.biases[l],
            &mut state.m.biases[l],
            &mut state.v.biases[l],
            lr,
            bc1,
            bc2,
        );
    }
}

fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Polyak soft update: target <- (1 - tau) * target + tau * online.
pub fn soft_update(target: &mut QNetwork, online: &QNetwork, tau: f64) {
    assert_eq!(target.dims(), online.dims());
    for l in 0..target.layer_count() {
        for (t, o) in target
            .layer_weights_mut(l)
            .iter_mut()
            .zip(online.layer_weights(l))
        {
            *t = (1.0 - tau) * *t + tau * o;
        }
        for (t, o) in target
            .layer_biases_mut(l)
            .iter_mut()
            .zip(online.layer_biases(l))
        {
            *t = (1.0 - tau) * *t + tau * o;
        }
    }
}

/// Epsilon-greedy: uniform random with probability epsilon, otherwise the
/// greedy action (lowest index wins ties).
pub fn select_action(q_values: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.gen_range(0.0..1.0) < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Index of the maximum value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
