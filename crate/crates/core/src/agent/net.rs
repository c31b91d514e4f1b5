//! Dense Q-network: affine layers with ReLU activations and a linear head.

use super::AgentError;
use crate::seed::Rng;
use rand::Rng as _;

/// Fully-connected network. Weights are stored flat per layer, row-major
/// (output x input); hidden layers apply ReLU, the final layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Forward-pass intermediates kept for backpropagation.
pub(super) struct ForwardCache {
    /// Post-activation values per layer; index 0 is the input itself.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation values per layer (aligned with `weights`).
    pub pre_activations: Vec<Vec<f64>>,
}

impl QNetwork {
    /// He-style uniform fan-in initialisation, biases zero.
    pub fn random(dims: &[usize], rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Self {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2);
        let weights = (0..dims.len() - 1)
            .map(|l| vec![0.0; dims[l] * dims[l + 1]])
            .collect();
        let biases = (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect();
        Self {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn layer_weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn layer_biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn layer_biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Action values for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        if obs.len() != self.input_dim() {
            return Err(AgentError::Dimension(format!(
                "observation length {} vs input dim {}",
                obs.len(),
                self.input_dim()
            )));
        }
        let mut a = obs.to_vec();
        let last = self.layer_count() - 1;
        for l in 0..self.layer_count() {
            let mut z = self.affine(l, &a);
            if l != last {
                relu_inplace(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    pub(super) fn forward_cached(&self, obs: &[f64]) -> Result<ForwardCache, AgentError> {
        if obs.len() != self.input_dim() {
            return Err(AgentError::Dimension(format!(
                "observation length {} vs input dim {}",
                obs.len(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        let mut pre_activations = Vec::with_capacity(self.layer_count());
        activations.push(obs.to_vec());
        let last = self.layer_count() - 1;
        for l in 0..self.layer_count() {
            let z = self.affine(l, activations.last().unwrap());
            pre_activations.push(z.clone());
            let mut a = z;
            if l != last {
                relu_inplace(&mut a);
            }
            activations.push(a);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    fn affine(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let (rows, cols) = (self.dims[layer + 1], self.dims[layer]);
        let w = &self.weights[layer];
        let b = &self.biases[layer];
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            out.push(b[r] + dot(&w[r * cols..(r + 1) * cols], input));
        }
        out
    }
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Dot product with four independent accumulators. The fixed association
/// keeps results bit-reproducible while letting the backend pipeline the
/// multiply-adds.
pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4 * 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < chunks {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut tail = 0.0;
    while i < n {
        tail += a[i] * b[i];
        i += 1;
    }
    ((s0 + s1) + (s2 + s3)) + tail
}
