//! Central finite-difference check of every analytic gradient in the model,
//! run in `f64` on a tiny randomly initialized instance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::{build_vocab, Batch, ScoredSentencePair, TokenizedSentence};
use crate::embed::EmbeddingTable;
use crate::encoder::EncoderConfig;
use crate::error::{Error, GradMismatch, Result};
use crate::mi::jsd_batch;
use crate::model::{Gradients, InputSource, Model, ModelConfig};
use crate::rng::{self, SeededRng};
use crate::train::{regression_loss_and_grads, ssl_loss_and_grads};

/// Denominator floor of the relative error, so that coordinates whose true
/// gradient is (near) zero are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Coordinates sampled per tensor (all of them for smaller tensors).
    pub n_coords: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Test hook: perturbs the analytic gradient of the named tensor
    /// (`"<loss>/<tensor>"`) to prove the check can fail.
    #[doc(hidden)]
    pub corrupt: Option<String>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { n_coords: 20, epsilon: 1e-5, tolerance: 1e-4, corrupt: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    /// `<loss>/<tensor>`, e.g. `ssl/encoder.0.weight`.
    pub name: String,
    pub coords: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_err: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Loss functions checked, by prefix.
pub const LOSSES: [&str; 3] = ["ssl", "ssl_sum", "regression"];

struct Fixture {
    model: Model<f64>,
    batch: Batch,
    pairs: Vec<ScoredSentencePair>,
}

fn random_sentence(r: &mut SeededRng, vocab: usize) -> TokenizedSentence {
    let len = r.random_range(1..=4);
    let tokens = (0..len).map(|_| format!("t{}", r.random_range(0..vocab))).collect();
    TokenizedSentence::new(tokens).unwrap_or_else(|_| unreachable!("generated tokens are non-empty"))
}

/// B = 2 sentences of up to 4 tokens, d_in = 5, windows {1, 3}, 4 filters.
fn fixture(seed: u64) -> Result<Fixture> {
    let mut r = rng::seeded(seed, rng::stream::GRADCHECK);
    let sentences: Vec<TokenizedSentence> = (0..3).map(|_| random_sentence(&mut r, 6)).collect();
    let vocab = build_vocab(&sentences);
    let d_in = 5;
    let table = EmbeddingTable::init_trainable(&vocab, d_in, seed)?;
    let config = ModelConfig::new(EncoderConfig::new(alloc::vec![1, 3], 4, d_in)?)?;
    let mut model = Model::init(config, Some(table), seed)?;
    // Non-zero biases so that units sit on both sides of their ReLU kinks.
    for l in &mut model.encoder.layers {
        l.bias.iter_mut().for_each(|b| *b = rng::uniform(&mut r, 0.3));
    }
    model.discriminator.b1.iter_mut().for_each(|b| *b = rng::uniform(&mut r, 0.3));
    model.discriminator.b0 = rng::uniform(&mut r, 0.5);
    let batch = Batch::from_sentences(sentences[..2].to_vec())?;
    let pairs = alloc::vec![
        ScoredSentencePair { score: 3.5, sentence_a: sentences[0].clone(), sentence_b: sentences[1].clone() },
        ScoredSentencePair { score: 1.0, sentence_a: sentences[1].clone(), sentence_b: sentences[2].clone() },
        ScoredSentencePair { score: 4.5, sentence_a: sentences[2].clone(), sentence_b: sentences[0].clone() },
    ];
    Ok(Fixture { model, batch, pairs })
}

fn loss(loss_name: &str, model: &Model<f64>, fx: &Fixture) -> Result<f64> {
    match loss_name {
        "regression" => Ok(regression_loss_and_grads(model, &fx.pairs, InputSource::Model)?.0),
        _ => {
            let mut batch = fx.batch.clone();
            let (_, enc) = model.forward(&mut batch, InputSource::Model)?;
            Ok(-jsd_batch(&enc, &model.discriminator, loss_name == "ssl")?.objective)
        }
    }
}

fn analytic(loss_name: &str, model: &Model<f64>, fx: &Fixture) -> Result<Gradients<f64>> {
    match loss_name {
        "regression" => Ok(regression_loss_and_grads(model, &fx.pairs, InputSource::Model)?.1),
        _ => {
            let mut m = model.clone();
            m.config.length_norm = loss_name == "ssl";
            let mut batch = fx.batch.clone();
            Ok(ssl_loss_and_grads(&m, &mut batch, InputSource::Model)?.1)
        }
    }
}

/// Tensors each loss depends on.
pub fn checked_tensors(loss_name: &str, model: &Model<f64>) -> Vec<String> {
    model
        .tensor_names()
        .into_iter()
        .filter(|n| loss_name != "regression" || !n.starts_with("discriminator"))
        .collect()
}

fn sample_coords(r: &mut SeededRng, len: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if n >= len {
        return idx;
    }
    for k in 0..n {
        let j = r.random_range(k..len);
        idx.swap(k, j);
    }
    idx.truncate(n);
    idx
}

/// Compares analytic and central-difference gradients of every loss with
/// respect to every tensor it depends on.
pub fn gradient_check(seed: u64, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut report = GradCheckReport { tensors: Vec::new(), max_rel_err: 0.0 };
    if cfg.n_coords == 0 {
        return Ok(report);
    }
    let fx = fixture(seed)?;
    let mut r = rng::seeded(rng::mix(seed, 1), rng::stream::GRADCHECK);
    let mut failures = Vec::new();
    for loss_name in LOSSES {
        let grads = analytic(loss_name, &fx.model, &fx)?;
        let grad_tensors = grads.tensors();
        let names = checked_tensors(loss_name, &fx.model);
        for (ti, gt) in grad_tensors.iter().enumerate() {
            if !names.contains(&gt.name) {
                continue;
            }
            let label = format!("{loss_name}/{}", gt.name);
            let corrupt = cfg.corrupt.as_deref() == Some(label.as_str());
            let mut worst: f64 = 0.0;
            let coords = sample_coords(&mut r, gt.data.len(), cfg.n_coords);
            for &k in &coords {
                let mut plus = fx.model.clone();
                plus.tensors_mut()[ti][k] += cfg.epsilon;
                let mut minus = fx.model.clone();
                minus.tensors_mut()[ti][k] -= cfg.epsilon;
                let numeric = (loss(loss_name, &plus, &fx)? - loss(loss_name, &minus, &fx)?) / (2.0 * cfg.epsilon);
                let mut a = gt.data[k];
                if corrupt {
                    a = a * 1.01 + 1e-3;
                }
                let rel = relative_error(a, numeric);
                worst = worst.max(rel);
                if rel.is_nan() || rel >= cfg.tolerance {
                    failures.push(GradMismatch { tensor: label.clone(), index: k, analytic: a, numeric, rel_err: rel });
                }
            }
            report.max_rel_err = report.max_rel_err.max(worst);
            report.tensors.push(TensorCheck { name: label, coords: coords.len(), max_rel_err: worst });
        }
    }
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(Error::GradCheckFailed(failures))
    }
}

/// Names every report should contain for a given seed.
pub fn expected_tensor_labels(seed: u64) -> Result<Vec<String>> {
    let fx = fixture(seed)?;
    Ok(LOSSES
        .iter()
        .flat_map(|l| checked_tensors(l, &fx.model).into_iter().map(move |n| format!("{l}/{n}")))
        .collect())
}
