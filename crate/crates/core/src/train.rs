//! Loss evaluation, Adam optimization, and the mini-batch training loop.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Model, Phase};
use crate::util::seeded_rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// L2 penalty factor on weights and biases.
    pub reg_weight: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Parameters whose names equal or start with any listed entry are
    /// excluded from updates.
    pub frozen_params: Vec<String>,
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            reg_weight: 1e-4,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 1024,
            epochs: 300,
            seed: 0,
            frozen_params: Vec::new(),
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::InvalidParam(
                "Adam momentum factors must lie in (0, 1)".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParam("batch size must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidParam("learning rate must be positive".into()));
        }
        if self.reg_weight < 0.0 {
            return Err(Error::InvalidParam(
                "regularization weight must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen_params
            .iter()
            .any(|f| name == f || name.starts_with(f.as_str()))
    }
}

/// Per-parameter Adam accumulators.
#[derive(Debug, Clone, Default)]
pub struct ParamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub k: u64,
}

/// Optimizer state keyed by parameter name.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub params: HashMap<String, ParamMoments>,
}

/// One bias-corrected Adam update of a flat parameter array.
pub fn adam_step(param: &mut [f64], grad: &[f64], state: &mut ParamMoments, cfg: &TrainConfig) {
    if state.m.len() != param.len() {
        state.m = vec![0.0; param.len()];
        state.v = vec![0.0; param.len()];
        state.k = 0;
    }
    state.k += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.k as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.k as i32);
    for i in 0..param.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        param[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Mean squared error over samples plus the L2 penalty on weights and biases.
pub fn loss_eval(
    model: &mut Model,
    x: &Array2<f64>,
    y: &Array2<f64>,
    reg_weight: f64,
    phase: Phase,
) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::InvalidParam("empty batch".into()));
    }
    let pred = model.forward(x, phase)?;
    if pred.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs targets {:?}",
            pred.dim(),
            y.dim()
        )));
    }
    let n = x.nrows() as f64;
    let data = (&pred - y).mapv(|r| r * r).sum() / n;
    Ok(data + penalty(model, reg_weight))
}

fn penalty(model: &mut Model, reg_weight: f64) -> f64 {
    if reg_weight == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    model.visit_params(&mut |p| {
        if p.penalized {
            acc += p.data.iter().map(|v| v * v).sum::<f64>();
        }
    });
    reg_weight * acc
}

/// Computes the regularized loss and accumulates all parameter gradients.
pub fn loss_and_grads(
    model: &mut Model,
    x: &Array2<f64>,
    y: &Array2<f64>,
    reg_weight: f64,
) -> Result<f64> {
    model.zero_grads();
    let (pred, caches) = model.forward_cached(x, Phase::Train)?;
    if pred.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs targets {:?}",
            pred.dim(),
            y.dim()
        )));
    }
    let n = x.nrows() as f64;
    let resid = &pred - y;
    let data = resid.mapv(|r| r * r).sum() / n;
    let grad_out = resid.mapv(|r| 2.0 * r / n);
    model.backward(&caches, &grad_out)?;
    let mut reg = 0.0;
    if reg_weight != 0.0 {
        model.visit_params(&mut |p| {
            if p.penalized {
                reg += p.data.iter().map(|v| v * v).sum::<f64>();
                if let Some(grad) = p.grad {
                    for (g, v) in grad.iter_mut().zip(p.data.iter()) {
                        *g += 2.0 * reg_weight * *v;
                    }
                }
            }
        });
    }
    Ok(data + reg_weight * reg)
}

fn apply_updates(model: &mut Model, state: &mut AdamState, cfg: &TrainConfig) {
    model.visit_params(&mut |p| {
        if !p.trainable || cfg.is_frozen(&p.name) {
            return;
        }
        if let Some(grad) = p.grad {
            let moments = state.params.entry(p.name.clone()).or_default();
            adam_step(p.data, grad, moments, cfg);
        }
    });
}

/// Per-epoch training and validation losses.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

impl History {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "epoch,train_loss,val_loss")?;
        for (e, (t, v)) in self.train_loss.iter().zip(self.val_loss.iter()).enumerate() {
            writeln!(out, "{},{:.17e},{:.17e}", e + 1, t, v)?;
        }
        Ok(())
    }
}

/// In-memory (inputs, targets) pair, already normalized.
pub struct DataPair<'a> {
    pub x: &'a Array2<f64>,
    pub y: &'a Array2<f64>,
}

/// Runs the mini-batch loop with a fresh optimizer state and finalizes
/// batch-norm population statistics over the training inputs.
pub fn train(
    model: &mut Model,
    train_set: DataPair,
    val_set: DataPair,
    cfg: &TrainConfig,
) -> Result<History> {
    let mut state = AdamState::default();
    train_with_state(model, train_set, val_set, cfg, &mut state)
}

/// As `train`, but reusing (and updating) an existing optimizer state so a
/// later phase can carry moments over.
pub fn train_with_state(
    model: &mut Model,
    train_set: DataPair,
    val_set: DataPair,
    cfg: &TrainConfig,
    state: &mut AdamState,
) -> Result<History> {
    cfg.validate()?;
    let n = train_set.x.nrows();
    if n == 0 {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    if train_set.y.nrows() != n {
        return Err(Error::ShapeMismatch(
            "training inputs and targets disagree on sample count".into(),
        ));
    }
    let mut history = History::default();
    if cfg.epochs == 0 {
        return Ok(history);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        shuffle(&mut order, cfg.seed, epoch);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bx = train_set.x.select(Axis(0), chunk);
            let by = train_set.y.select(Axis(0), chunk);
            let loss = loss_and_grads(model, &bx, &by, cfg.reg_weight)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            apply_updates(model, state, cfg);
            epoch_loss += loss * chunk.len() as f64;
        }
        history.train_loss.push(epoch_loss / n as f64);
        // Interim validation uses the batch statistics of the validation
        // pass itself; only the final model carries population statistics.
        let val = loss_eval(model, val_set.x, val_set.y, cfg.reg_weight, Phase::Train)?;
        history.val_loss.push(val);
    }
    model.finalize_bn(train_set.x)?;
    Ok(history)
}

fn shuffle(order: &mut [usize], seed: u64, epoch: usize) {
    let mut rng = seeded_rng(seed, &[0x7452_0001, epoch as u64]);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}
