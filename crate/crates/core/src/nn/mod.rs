//! Small fully-connected regression networks: relu hidden layers, linear output.

mod metrics;
mod normalize;
mod train;

pub use metrics::{accuracy_at_tolerance, accuracy_table, mse, TOLERANCES};
pub(crate) use metrics::within;
pub use normalize::{FeatureScale, Normalizer};
pub use train::{split_indices, train, train_split, EpochRecord, TrainConfig, TrainedNetwork};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl NetworkSpec {
    /// relu hidden layers, linear output.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let spec = NetworkSpec {
            layer_sizes,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Linear,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `inputs`-20-10-`outputs`, the shape used by every degradation network.
    pub fn standard(inputs: usize, outputs: usize) -> Self {
        NetworkSpec {
            layer_sizes: vec![inputs, 20, 10, outputs],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::invalid("network needs at least one hidden layer"));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("layer sizes must be >= 1"));
        }
        if self.hidden_activation != Activation::Relu || self.output_activation != Activation::Linear
        {
            return Err(Error::invalid("only relu hidden / linear output networks are supported"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.biases))
        {
            *o = b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Dense>,
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        NetworkParams { layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut p = Self::zeros(spec);
        for layer in &mut p.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        p
    }

    /// Shape and finiteness check against `spec`.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.layer_sizes.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} layers, found {}",
                spec.layer_sizes.len() - 1,
                self.layers.len()
            )));
        }
        for (i, (layer, w)) in self.layers.iter().zip(spec.layer_sizes.windows(2)).enumerate() {
            if layer.inputs != w[0]
                || layer.outputs != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.biases.len() != w[1]
            {
                return Err(Error::invalid(format!("layer {i} shape does not match spec")));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.biases);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut ws = Workspace::new(self);
        Ok(ws.forward(self, x).to_vec())
    }

    /// Mean squared error over all outputs of a batch and its gradient in
    /// [`flatten`](Self::flatten) order.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::invalid("batch must be non-empty with matching targets"));
        }
        let mut ws = Workspace::new(self);
        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        let scale = 1.0 / (xs.len() * self.output_dim()) as f64;
        for (x, y) in xs.iter().zip(ys) {
            if x.len() != self.input_dim() || y.len() != self.output_dim() {
                return Err(Error::Dimension {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            loss += ws.accumulate(self, x, y, scale, &mut grads);
        }
        Ok((loss, grads.flatten()))
    }
}

/// Per-layer activation buffers reused across samples.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(p: &NetworkParams) -> Self {
        let mut acts = vec![vec![0.0; p.input_dim()]];
        let mut deltas = Vec::new();
        for l in &p.layers {
            acts.push(vec![0.0; l.outputs]);
            deltas.push(vec![0.0; l.outputs]);
        }
        Workspace { acts, deltas }
    }

    pub(crate) fn forward<'a>(&'a mut self, p: &NetworkParams, x: &[f64]) -> &'a [f64] {
        self.acts[0].copy_from_slice(x);
        let last = p.layers.len() - 1;
        for (i, layer) in p.layers.iter().enumerate() {
            let (prev, next) = self.acts.split_at_mut(i + 1);
            layer.apply(&prev[i], &mut next[0]);
            if i < last {
                for v in next[0].iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        &self.acts[last + 1]
    }

    /// Adds `scale * d/dparams sum (yhat - y)^2` into `grads`; returns the scaled loss.
    pub(crate) fn accumulate(
        &mut self,
        p: &NetworkParams,
        x: &[f64],
        y: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) -> f64 {
        self.forward(p, x);
        let n = p.layers.len();
        let mut loss = 0.0;
        for ((d, yhat), yt) in self.deltas[n - 1].iter_mut().zip(&self.acts[n]).zip(y) {
            let r = yhat - yt;
            loss += r * r;
            *d = 2.0 * r * scale;
        }
        for i in (0..n).rev() {
            let layer = &p.layers[i];
            let input = &self.acts[i];
            let g = &mut grads.layers[i];
            for (o, &d) in self.deltas[i].iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, xi) in row.iter_mut().zip(input) {
                    *gw += d * xi;
                }
            }
            if i > 0 {
                let (lower, upper) = self.deltas.split_at_mut(i);
                let prev = &mut lower[i - 1];
                for (k, pd) in prev.iter_mut().enumerate() {
                    if input[k] <= 0.0 {
                        *pd = 0.0;
                        continue;
                    }
                    *pd = upper[0]
                        .iter()
                        .enumerate()
                        .map(|(o, d)| d * layer.weights[o * layer.inputs + k])
                        .sum();
                }
            }
        }
        loss * scale
    }
}

pub(crate) struct Gradients {
    pub(crate) layers: Vec<Dense>,
}

impl Gradients {
    pub(crate) fn zeros(p: &NetworkParams) -> Self {
        Gradients {
            layers: p
                .layers
                .iter()
                .map(|l| Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub(crate) fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    fn flatten(&self) -> Vec<f64> {
        NetworkParams {
            layers: self.layers.clone(),
        }
        .flatten()
    }

    pub(crate) fn apply(&self, p: &mut NetworkParams, lr: f64) {
        for (l, g) in p.layers.iter_mut().zip(&self.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in l.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(rng: &mut ChaCha8Rng) -> NetworkParams {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(1..=5)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..=6));
        }
        sizes.push(rng.random_range(1..=3));
        let spec = NetworkSpec::new(sizes).unwrap();
        let mut p = NetworkParams::init(&spec, rng);
        for l in &mut p.layers {
            for b in &mut l.biases {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        p
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(vec![5, 1]).is_err());
        assert!(NetworkSpec::new(vec![5, 0, 1]).is_err());
        assert!(NetworkSpec::new(vec![5, 20, 10, 1]).is_ok());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = NetworkSpec::standard(5, 2);
        let p = NetworkParams::zeros(&spec);
        assert_eq!(p.forward(&[0.3, 1.0, -2.0, 4.0, 0.1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layers_pass_nonnegative_input_through() {
        let spec = NetworkSpec::new(vec![3, 3, 3]).unwrap();
        let mut p = NetworkParams::zeros(&spec);
        for l in &mut p.layers {
            for i in 0..3 {
                l.weights[i * 3 + i] = 1.0;
            }
        }
        let x = [0.25, 1.5, 3.0];
        assert_eq!(p.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_is_deterministic_and_checks_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = NetworkSpec::standard(5, 1);
        let p = NetworkParams::init(&spec, &mut rng);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(p.forward(&x).unwrap(), p.forward(&x).unwrap());
        assert!(matches!(p.forward(&x[..4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_net(&mut rng);
        let mut q = NetworkParams::zeros(&NetworkSpec::new(
            std::iter::once(p.input_dim())
                .chain(p.layers.iter().map(|l| l.outputs))
                .collect(),
        )
        .unwrap());
        q.set_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
    }

    pub(crate) fn finite_difference_check(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_net(&mut rng);
        let n = rng.random_range(1..=6);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let (_, grad) = p.loss_and_gradient(&xs, &ys).unwrap();
        let flat = p.flatten();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..flat.len() {
            let mut plus = p.clone();
            let mut f = flat.clone();
            f[i] += h;
            plus.set_flat(&f).unwrap();
            let mut minus = p.clone();
            f[i] -= 2.0 * h;
            minus.set_flat(&f).unwrap();
            let lp = plus.loss_and_gradient(&xs, &ys).unwrap().0;
            let lm = minus.loss_and_gradient(&xs, &ys).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let err = finite_difference_check(seed);
            assert!(err <= 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        for seed in 100..120 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = random_net(&mut rng);
            let xs: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..p.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ys: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..p.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let (before, g) = p.loss_and_gradient(&xs, &ys).unwrap();
            let stepped: Vec<f64> = p.flatten().iter().zip(&g).map(|(w, gw)| w - 1e-6 * gw).collect();
            p.set_flat(&stepped).unwrap();
            let after = p.loss_and_gradient(&xs, &ys).unwrap().0;
            assert!(after <= before + 1e-15, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let spec = NetworkSpec::standard(5, 1);
        let mut p = NetworkParams::zeros(&spec);
        assert!(p.validate(&spec).is_ok());
        p.layers[1].biases.pop();
        assert!(p.validate(&spec).is_err());
        let mut p = NetworkParams::zeros(&spec);
        p.layers[0].weights[0] = f64::NAN;
        assert!(p.validate(&spec).is_err());
    }
}
