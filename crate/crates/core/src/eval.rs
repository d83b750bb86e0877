//! Encoding sentence lists and scoring encoders on similarity data.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::{Batch, ScoredSentencePair, TokenizedSentence};
use crate::error::{Error, Result};
use crate::model::{InputSource, Model};
use crate::real::Real;
use crate::stats::{cosine, pearson, spearman};

const CHUNK: usize = 64;

/// Global (pooled) representation of each sentence, in input order.
pub fn embed_sentences<T: Real>(
    model: &Model<T>,
    sentences: &[TokenizedSentence],
    input: InputSource<'_, T>,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(sentences.len());
    for chunk in sentences.chunks(CHUNK) {
        let mut batch = Batch::from_sentences(chunk.to_vec())?;
        let (_, enc) = model.forward(&mut batch, input)?;
        out.extend((0..chunk.len()).map(|s| enc.global.row(s).to_vec()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub spearman_rho: f64,
    pub pearson_r: f64,
    pub n_pairs: usize,
}

/// Cosine similarity of each pair correlated against the gold scores.
/// Each distinct sentence is encoded once.
pub fn eval_sts<T: Real>(model: &Model<T>, pairs: &[ScoredSentencePair], input: InputSource<'_, T>) -> Result<CorrelationReport> {
    if pairs.len() < 2 {
        return Err(Error::TooFewPairs(pairs.len()));
    }
    let mut index: BTreeMap<&TokenizedSentence, usize> = BTreeMap::new();
    let mut unique = Vec::new();
    for p in pairs {
        for s in [&p.sentence_a, &p.sentence_b] {
            index.entry(s).or_insert_with(|| {
                unique.push(s.clone());
                unique.len() - 1
            });
        }
    }
    let vectors: Vec<Vec<f64>> = embed_sentences(model, &unique, input)?
        .into_iter()
        .map(|v| v.into_iter().map(Real::as_f64).collect())
        .collect();
    let mut predicted = Vec::with_capacity(pairs.len());
    let mut gold = Vec::with_capacity(pairs.len());
    for p in pairs {
        predicted.push(cosine(&vectors[index[&p.sentence_a]], &vectors[index[&p.sentence_b]])?);
        gold.push(p.score);
    }
    Ok(CorrelationReport {
        spearman_rho: spearman(&predicted, &gold)?,
        pearson_r: pearson(&predicted, &gold)?,
        n_pairs: pairs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    /// Mean cosine over pairs sharing a label.
    pub intra: f64,
    /// Mean cosine over pairs with different labels.
    pub inter: f64,
}

impl SeparationReport {
    pub fn gap(&self) -> f64 {
        self.intra - self.inter
    }
}

/// Mean within-label versus between-label cosine over all unordered pairs.
pub fn label_separation(vectors: &[Vec<f64>], labels: &[usize]) -> Result<SeparationReport> {
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: vectors.len(), found: labels.len() });
    }
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let c = cosine(&vectors[i], &vectors[j])?;
            if labels[i] == labels[j] {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    if n_intra == 0 || n_inter == 0 {
        return Err(Error::EmptyInput("need both same-label and cross-label pairs"));
    }
    Ok(SeparationReport { intra: intra / n_intra as f64, inter: inter / n_inter as f64 })
}
