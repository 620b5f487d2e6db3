use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gradients, NetworkParams, NetworkSpec, Normalizer, Workspace};
use crate::error::{Error, Result};

/// Mini-batch gradient descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    pub decay_every_epochs: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.2,
            lr_decay_factor: 0.5,
            decay_every_epochs: 100,
            batch_size: 32,
            epochs: 500,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::invalid("initial_lr must be positive"));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::invalid("lr_decay_factor must be in (0, 1]"));
        }
        if self.decay_every_epochs == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "decay_every_epochs, batch_size and epochs must be positive",
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.initial_lr * self.lr_decay_factor.powi((epoch / self.decay_every_epochs) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean mini-batch loss over the epoch, normalized target units.
    pub train_mse: f64,
    pub val_mse: f64,
}

/// A fitted network together with the scaling of its inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainedNetwork {
    /// Raw features in, physical-unit outputs out.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.input_norm.normalize(x)?;
        let y = self.params.forward(&z)?;
        self.target_norm.denormalize(&y)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(&self.spec)?;
        self.input_norm.validate()?;
        self.target_norm.validate()?;
        if self.input_norm.dim() != self.spec.inputs() {
            return Err(Error::invalid("input normalizer width does not match network"));
        }
        if self.target_norm.dim() != self.spec.outputs() {
            return Err(Error::invalid("target normalizer width does not match network"));
        }
        Ok(())
    }

    pub fn best_val_mse(&self) -> f64 {
        self.history
            .get(self.best_epoch)
            .map_or(f64::NAN, |r| r.val_mse)
    }
}

/// Seeded shuffle of `0..n` split into (train, validation) index lists.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "{n} samples cannot be split with train fraction {train_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

/// Split by `cfg.train_fraction`, then [`train_split`].
pub fn train(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    normalize_mask: &[bool],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<TrainedNetwork> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::invalid("dataset must be non-empty with one target per input"));
    }
    cfg.validate()?;
    let (tr, va) = split_indices(inputs.len(), cfg.train_fraction, cfg.seed)?;
    let pick = |rows: &[Vec<f64>], idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>();
    train_split(
        &pick(inputs, &tr),
        &pick(targets, &tr),
        &pick(inputs, &va),
        &pick(targets, &va),
        normalize_mask,
        spec,
        cfg,
    )
}

/// Mini-batch gradient descent on a given train/validation split.
///
/// The input normalizer (columns selected by `normalize_mask`) and the target
/// normalizer are fitted on the training rows only. Returns the parameters of
/// the epoch with the lowest validation MSE.
pub fn train_split(
    train_x: &[Vec<f64>],
    train_y: &[Vec<f64>],
    val_x: &[Vec<f64>],
    val_y: &[Vec<f64>],
    normalize_mask: &[bool],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<TrainedNetwork> {
    spec.validate()?;
    cfg.validate()?;
    if train_x.is_empty() || val_x.is_empty() {
        return Err(Error::invalid("training and validation splits must be non-empty"));
    }
    if train_x.len() != train_y.len() || val_x.len() != val_y.len() {
        return Err(Error::invalid("inputs and targets differ in length"));
    }
    if normalize_mask.len() != spec.inputs() {
        return Err(Error::Dimension {
            expected: spec.inputs(),
            got: normalize_mask.len(),
        });
    }
    if train_y.iter().chain(val_y).flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }

    let input_norm = Normalizer::fit(train_x, normalize_mask)?;
    let target_norm = Normalizer::fit(train_y, &vec![true; spec.outputs()])?;
    let scale = |n: &Normalizer, rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| n.normalize(r)).collect()
    };
    let tx = scale(&input_norm, train_x)?;
    let ty = scale(&target_norm, train_y)?;
    let vx = scale(&input_norm, val_x)?;
    let vy = scale(&target_norm, val_y)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(1);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(2);

    let mut params = NetworkParams::init(spec, &mut init_rng);
    let mut ws = Workspace::new(&params);
    let mut grads = Gradients::zeros(&params);
    let mut order: Vec<usize> = (0..tx.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, NetworkParams)> = None;
    let outputs = spec.outputs() as f64;

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut batch_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let s = 1.0 / (batch.len() as f64 * outputs);
            for &i in batch {
                epoch_loss += ws.accumulate(&params, &tx[i], &ty[i], s, &mut grads) * batch.len() as f64;
            }
            grads.apply(&mut params, lr);
        }
        let train_mse = epoch_loss / tx.len() as f64;
        let val_mse = dataset_mse(&params, &mut ws, &vx, &vy);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: if train_mse.is_finite() { val_mse } else { train_mse },
            });
        }
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_mse,
            val_mse,
        });
        if best.as_ref().is_none_or(|(_, b, _)| val_mse < *b) {
            best = Some((epoch, val_mse, params.clone()));
        }
    }

    let (best_epoch, _, params) = best.expect("at least one epoch");
    Ok(TrainedNetwork {
        spec: spec.clone(),
        params,
        input_norm,
        target_norm,
        config: cfg.clone(),
        best_epoch,
        history,
    })
}

fn dataset_mse(p: &NetworkParams, ws: &mut Workspace, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in xs.iter().zip(ys) {
        for (a, b) in ws.forward(p, x).iter().zip(y) {
            total += (a - b) * (a - b);
            count += 1;
        }
    }
    total / count as f64
}
