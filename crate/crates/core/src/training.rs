//! Cross-entropy cost, Adam, and the epoch loop with early stopping on the
//! validation cost.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSplit, SequenceSample};
use crate::error::{Error, Result};
use crate::lstm::{self, init_params, InitScheme, LstmParams};

/// Samples per unit of work in gradient and cost reductions. Partial sums are
/// always combined in chunk order, so results do not depend on scheduling.
pub const REDUCTION_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// 0 = full batch.
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop after this many epochs without a new validation minimum.
    pub patience: Option<usize>,
    /// Rescale the batch gradient to this global L2 norm when it is larger.
    pub clip_norm: Option<f64>,
    pub hidden_dim: usize,
    pub seed: u64,
    /// Compute chunk gradients on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0005,
            max_epochs: 1000,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: None,
            clip_norm: Some(5.0),
            hidden_dim: 10,
            seed: 0,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::config("epsilon must be non-negative"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config("clip_norm must be positive"));
            }
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update on a flat parameter vector.
///
/// With `beta1 = beta2 = 0` and `epsilon = 0` the step is `θ - η·g/|g|`,
/// i.e. `θ - η·sign(g)`; a zero gradient leaves `θ` unchanged.
pub fn adam_update(theta: &mut [f64], grad: &[f64], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    if theta.len() != grad.len() || state.m.len() != theta.len() || state.v.len() != theta.len() {
        return Err(Error::input("Adam buffers do not match the parameter shape"));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for k in 0..theta.len() {
        let g = grad[k];
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g;
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        let denom = v_hat.sqrt() + config.epsilon;
        if denom > 0.0 {
            theta[k] -= config.learning_rate * m_hat / denom;
        }
    }
    Ok(())
}

/// Adam on the classifier parameters. Fails before touching anything if a
/// gradient block is non-finite.
pub fn adam_step(
    params: &mut LstmParams,
    grads: &LstmParams,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if !params.same_shape(grads) {
        return Err(Error::input("gradient shape does not match parameters"));
    }
    if let Some(block) = grads.first_non_finite_block() {
        return Err(Error::Numeric { block, message: "non-finite gradient".into() });
    }
    adam_update(params.as_mut_slice(), grads.as_slice(), state, config)
}

fn chunk_loss(params: &LstmParams, chunk: &[&SequenceSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in chunk {
        total += lstm::bce_with_logit(lstm::predict_logit(params, &s.steps)?, s.label as f64);
    }
    Ok(total)
}

fn sum_losses(params: &LstmParams, samples: &[&SequenceSample], parallel: bool) -> Result<f64> {
    let parts: Vec<Result<f64>> = if parallel {
        samples.par_chunks(REDUCTION_CHUNK).map(|c| chunk_loss(params, c)).collect()
    } else {
        samples.chunks(REDUCTION_CHUNK).map(|c| chunk_loss(params, c)).collect()
    };
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// Mean cross-entropy `J` over a sample set.
pub fn cost(params: &LstmParams, samples: &[SequenceSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("cost of an empty sample set"));
    }
    let refs: Vec<&SequenceSample> = samples.iter().collect();
    Ok(sum_losses(params, &refs, false)? / samples.len() as f64)
}

fn cost_with(params: &LstmParams, samples: &[SequenceSample], parallel: bool) -> Result<f64> {
    let refs: Vec<&SequenceSample> = samples.iter().collect();
    Ok(sum_losses(params, &refs, parallel)? / samples.len() as f64)
}

fn chunk_gradient(params: &LstmParams, chunk: &[&SequenceSample]) -> Result<(LstmParams, f64)> {
    let mut grad = LstmParams::zeros(params.input_dim(), params.hidden_dim());
    let mut loss = 0.0;
    for s in chunk {
        let trace = lstm::forward(params, &s.steps)?;
        let y = s.label as f64;
        loss += lstm::trace_loss(&trace, y);
        lstm::backward_into(params, &trace, y, &mut grad)?;
    }
    Ok((grad, loss))
}

/// Mean gradient and summed loss over a batch.
pub fn batch_gradient(params: &LstmParams, batch: &[&SequenceSample], parallel: bool) -> Result<(LstmParams, f64)> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let parts: Vec<Result<(LstmParams, f64)>> = if parallel {
        batch.par_chunks(REDUCTION_CHUNK).map(|c| chunk_gradient(params, c)).collect()
    } else {
        batch.chunks(REDUCTION_CHUNK).map(|c| chunk_gradient(params, c)).collect()
    };
    let mut grad = LstmParams::zeros(params.input_dim(), params.hidden_dim());
    let mut loss = 0.0;
    for p in parts {
        let (g, l) = p?;
        grad.add_assign(&g);
        loss += l;
    }
    grad.scale(1.0 / batch.len() as f64);
    Ok((grad, loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochCosts {
    /// 0 is the initial parameters.
    pub epoch: usize,
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Entry 0 holds the costs of the initial parameters; entry `k` those
    /// after epoch `k`. The train cost of an epoch is the mean loss seen
    /// during its batches.
    pub epochs: Vec<EpochCosts>,
    pub best_epoch: usize,
    pub best_validation_cost: f64,
    /// Parameters from `best_epoch`.
    pub params: LstmParams,
    pub stopped_early: bool,
}

impl TrainReport {
    /// Completed training epochs, not counting the initial evaluation.
    pub fn num_epochs(&self) -> usize {
        self.epochs.len().saturating_sub(1)
    }

    pub fn best(&self) -> &EpochCosts {
        &self.epochs[self.best_epoch]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,train_cost,val_cost,test_cost")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{},{}", e.epoch, e.train, e.validation, e.test)?;
        }
        Ok(())
    }
}

/// Train from a scaled-uniform initialization and return the parameters with
/// the lowest validation cost. The split is used as given, so normalize it
/// first if needed.
pub fn train(split: &DatasetSplit, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if split.train.is_empty() || split.validation.is_empty() || split.test.is_empty() {
        return Err(Error::input("train, validation and test sets must be non-empty"));
    }
    let dx = split.train[0].dim();
    let params = init_params(dx, config.hidden_dim, config.seed, InitScheme::ScaledUniform)?;
    train_from(split, config, params)
}

/// Like [`train`] with caller-supplied initial parameters.
pub fn train_from(split: &DatasetSplit, config: &TrainConfig, initial: LstmParams) -> Result<TrainReport> {
    config.validate()?;
    if split.train.is_empty() || split.validation.is_empty() || split.test.is_empty() {
        return Err(Error::input("train, validation and test sets must be non-empty"));
    }
    let par = config.parallel;
    let mut params = initial;
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7261_696e);
    let mut order: Vec<&SequenceSample> = split.train.iter().collect();
    let batch = if config.batch_size == 0 { order.len() } else { config.batch_size };

    let first = EpochCosts {
        epoch: 0,
        train: cost_with(&params, &split.train, par)?,
        validation: cost_with(&params, &split.validation, par)?,
        test: cost_with(&params, &split.test, par)?,
    };
    let mut report = TrainReport {
        epochs: vec![first],
        best_epoch: 0,
        best_validation_cost: first.validation,
        params: params.clone(),
        stopped_early: false,
    };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let (mut grad, loss) = batch_gradient(&params, chunk, par)?;
            loss_sum += loss;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, report: Box::new(report) });
            }
            if let Some(limit) = config.clip_norm {
                let norm = grad.l2_norm();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            adam_step(&mut params, &grad, &mut adam, config)?;
        }
        let costs = EpochCosts {
            epoch,
            train: loss_sum / order.len() as f64,
            validation: cost_with(&params, &split.validation, par)?,
            test: cost_with(&params, &split.test, par)?,
        };
        if costs.validation.is_nan() {
            report.epochs.push(costs);
            return Err(Error::Diverged { epoch, report: Box::new(report) });
        }
        report.epochs.push(costs);
        if costs.validation < report.best_validation_cost {
            report.best_epoch = epoch;
            report.best_validation_cost = costs.validation;
            report.params = params.clone();
        }
        if let Some(p) = config.patience {
            if epoch - report.best_epoch >= p {
                report.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    Ok(report)
}
