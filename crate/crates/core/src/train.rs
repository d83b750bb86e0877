//! Optimization loops: self-supervised training on the mutual information
//! bound and supervised regression fine-tuning on scored pairs.

use alloc::vec::Vec;

use crate::corpus::{make_batches, Batch, ScoredSentencePair, TokenizedSentence};
use crate::embed::table_backward;
use crate::encoder::{encoder_backward, EncodedBatch};
use crate::error::{Error, Result};
use crate::mi::{jsd_backward, jsd_batch, MiBatchResult};
use crate::model::{Gradients, InputSource, Model};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::real::Real;
use crate::rng;
use crate::tensor::{Matrix, Tensor3};

/// The objective is unbounded below; a run that crosses this is stopped.
pub const DIVERGENCE_FLOOR: f64 = -50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 32, steps: 200, seed: 42, adam: AdamConfig::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self, min_batch: usize) -> Result<()> {
        if self.batch_size < min_batch {
            return Err(Error::InvalidConfig(alloc::format!("batch size must be at least {min_batch}")));
        }
        let a = &self.adam;
        if !(a.learning_rate >= 0.0 && a.learning_rate.is_finite()) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps <= 0.0 {
            return Err(Error::InvalidConfig("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

/// Value logged after each optimization step (the objective for
/// self-supervised training, the MSE for fine-tuning).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub objective: f64,
}

/// Gradient of the input tensor folded into the model's table, if the model
/// owns the table being read.
fn embedding_grads<T: Real>(model: &Model<T>, input: &InputSource<'_, T>, batch: &Batch, grad_input: &Tensor3<T>) -> Option<Matrix<T>> {
    match (input, &model.embeddings) {
        (InputSource::Model, Some(table)) if table.trainable() => Some(table_backward(batch, grad_input, table)),
        _ => None,
    }
}

/// Objective on one batch and gradients of `-objective`.
pub fn ssl_loss_and_grads<T: Real>(
    model: &Model<T>,
    batch: &mut Batch,
    input: InputSource<'_, T>,
) -> Result<(MiBatchResult<T>, Gradients<T>)> {
    let (_, enc) = model.forward(batch, input)?;
    let mi = jsd_batch(&enc, &model.discriminator, model.config.length_norm)?;
    let back = jsd_backward(&mi, &enc, &model.discriminator)?;
    let (enc_grads, grad_input) =
        encoder_backward(Some(&back.grad_local), &back.grad_global, &enc, &model.encoder, &model.config.encoder)?;
    let mut grads = Gradients::zeros_like(model);
    grads.encoder = enc_grads;
    grads.discriminator = back.discriminator;
    if let Some(g) = embedding_grads(model, &input, batch, &grad_input) {
        grads.embeddings = Some(g);
    }
    Ok((mi, grads))
}

/// Maximizes the batch objective with Adam for `cfg.steps` steps, reshuffling
/// every epoch. `on_step` sees each record as it is produced.
pub fn train_ssl<T: Real>(
    model: &mut Model<T>,
    state: &mut AdamState<T>,
    sentences: &[TokenizedSentence],
    input: InputSource<'_, T>,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<Vec<StepRecord>> {
    cfg.validate(2)?;
    if sentences.len() < 2 {
        return Err(Error::BatchTooSmall(sentences.len()));
    }
    let mut log = Vec::with_capacity(cfg.steps);
    let mut epoch = 0u64;
    while log.len() < cfg.steps {
        let batches = make_batches(sentences, cfg.batch_size, rng::mix(cfg.seed, epoch), true)?;
        for mut batch in batches {
            if log.len() == cfg.steps {
                break;
            }
            let step = log.len() + 1;
            let (mi, grads) = ssl_loss_and_grads(model, &mut batch, input)?;
            let objective = mi.objective.as_f64();
            if !objective.is_finite() {
                return Err(Error::NonFiniteObjective { step });
            }
            if objective < DIVERGENCE_FLOOR {
                return Err(Error::Diverged { step, objective });
            }
            adam_step(model, &grads, state, &cfg.adam)?;
            let rec = StepRecord { step, objective };
            on_step(&rec);
            log.push(rec);
        }
        epoch += 1;
    }
    Ok(log)
}

/// `cos(u, v)` and its gradients. Norms are floored at a tiny value so a dead
/// (all-zero) representation yields zero gradients instead of NaN.
pub fn cosine_with_grad<T: Real>(u: &[T], v: &[T]) -> (T, Vec<T>, Vec<T>) {
    let tiny = T::min_positive_value().sqrt();
    let nu = crate::real::dot(u, u).sqrt().max(tiny);
    let nv = crate::real::dot(v, v).sqrt().max(tiny);
    let cos = crate::real::dot(u, v) / (nu * nv);
    let du = u.iter().zip(v).map(|(&a, &b)| b / (nu * nv) - cos * a / (nu * nu)).collect();
    let dv = u.iter().zip(v).map(|(&a, &b)| a / (nu * nv) - cos * b / (nv * nv)).collect();
    (cos, du, dv)
}

fn pair_batches(pairs: &[ScoredSentencePair]) -> Result<(Batch, Batch)> {
    let a = Batch::from_sentences(pairs.iter().map(|p| p.sentence_a.clone()).collect())?;
    let b = Batch::from_sentences(pairs.iter().map(|p| p.sentence_b.clone()).collect())?;
    Ok((a, b))
}

#[inline]
fn target<T: Real>(p: &ScoredSentencePair) -> T {
    T::lit(p.score / crate::corpus::MAX_SCORE)
}

/// Mean of `(cos(E(a), E(b)) - score / 5)^2` and its gradients. Both sides
/// share the encoder.
pub fn regression_loss_and_grads<T: Real>(
    model: &Model<T>,
    pairs: &[ScoredSentencePair],
    input: InputSource<'_, T>,
) -> Result<(T, Gradients<T>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("scored pairs"));
    }
    let (mut batch_a, mut batch_b) = pair_batches(pairs)?;
    let (_, enc_a) = model.forward(&mut batch_a, input)?;
    let (_, enc_b) = model.forward(&mut batch_b, input)?;
    let n = T::lit(pairs.len() as f64);
    let d = model.config.rep_dim();
    let mut grad_a = Matrix::zeros(pairs.len(), d);
    let mut grad_b = Matrix::zeros(pairs.len(), d);
    let mut loss = T::zero();
    for (k, p) in pairs.iter().enumerate() {
        let (cos, du, dv) = cosine_with_grad(enc_a.global.row(k), enc_b.global.row(k));
        let diff = cos - target::<T>(p);
        loss = loss + diff * diff;
        let scale = T::lit(2.0) * diff / n;
        crate::real::axpy(scale, &du, grad_a.row_mut(k));
        crate::real::axpy(scale, &dv, grad_b.row_mut(k));
    }
    let mut grads = Gradients::zeros_like(model);
    for (batch, enc, g) in [(&batch_a, &enc_a, &grad_a), (&batch_b, &enc_b, &grad_b)] {
        let part = side_grads(model, &input, batch, enc, g)?;
        grads.accumulate(&part);
    }
    Ok((loss / n, grads))
}

fn side_grads<T: Real>(
    model: &Model<T>,
    input: &InputSource<'_, T>,
    batch: &Batch,
    enc: &EncodedBatch<T>,
    grad_global: &Matrix<T>,
) -> Result<Gradients<T>> {
    let (enc_grads, grad_input) = encoder_backward(None, grad_global, enc, &model.encoder, &model.config.encoder)?;
    let mut grads = Gradients::zeros_like(model);
    grads.encoder = enc_grads;
    if let Some(g) = embedding_grads(model, input, batch, &grad_input) {
        grads.embeddings = Some(g);
    }
    Ok(grads)
}

/// Mean squared error between pair cosines and normalized scores.
pub fn regression_mse<T: Real>(model: &Model<T>, pairs: &[ScoredSentencePair], input: InputSource<'_, T>) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("scored pairs"));
    }
    let mut total = 0.0;
    for chunk in pairs.chunks(64) {
        let (mut a, mut b) = pair_batches(chunk)?;
        let (_, ea) = model.forward(&mut a, input)?;
        let (_, eb) = model.forward(&mut b, input)?;
        for (k, p) in chunk.iter().enumerate() {
            let (cos, _, _) = cosine_with_grad(ea.global.row(k), eb.global.row(k));
            let diff = cos.as_f64() - p.score / crate::corpus::MAX_SCORE;
            total += diff * diff;
        }
    }
    Ok(total / pairs.len() as f64)
}

/// Minimizes the pair regression loss with Adam. The discriminator receives
/// zero gradients, so with a fresh optimizer state it is left untouched.
pub fn finetune_regression<T: Real>(
    model: &mut Model<T>,
    state: &mut AdamState<T>,
    pairs: &[ScoredSentencePair],
    input: InputSource<'_, T>,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<Vec<StepRecord>> {
    cfg.validate(1)?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("scored pairs"));
    }
    let mut log = Vec::with_capacity(cfg.steps);
    let mut epoch = 0u64;
    while log.len() < cfg.steps {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut r = rng::seeded(rng::mix(cfg.seed, epoch), rng::stream::FINETUNE);
        rng::shuffle(&mut r, &mut order);
        for chunk in order.chunks(cfg.batch_size) {
            if log.len() == cfg.steps {
                break;
            }
            let step = log.len() + 1;
            let batch: Vec<ScoredSentencePair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            let (loss, grads) = regression_loss_and_grads(model, &batch, input)?;
            let objective = loss.as_f64();
            if !objective.is_finite() {
                return Err(Error::NonFiniteObjective { step });
            }
            adam_step(model, &grads, state, &cfg.adam)?;
            let rec = StepRecord { step, objective };
            on_step(&rec);
            log.push(rec);
        }
        epoch += 1;
    }
    Ok(log)
}

/// Mean of the first and last `window` entries of a trace.
pub fn smoothed_endpoints(log: &[StepRecord], window: usize) -> Option<(f64, f64)> {
    if window == 0 || log.len() < window {
        return None;
    }
    let mean = |s: &[StepRecord]| s.iter().map(|r| r.objective).sum::<f64>() / s.len() as f64;
    Some((mean(&log[..window]), mean(&log[log.len() - window..])))
}
