//! Token vector sources: lookup tables (static or trainable) and precomputed
//! contextual sequences.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Batch, TokenizedSentence};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng;
use crate::tensor::{Matrix, Tensor3};

/// Per-token input vectors of one sentence, `l x d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence<T> {
    vectors: Matrix<T>,
}

impl<T: Real> EmbeddingSequence<T> {
    pub fn new(vectors: Matrix<T>) -> Result<Self> {
        if vectors.rows() == 0 {
            return Err(Error::EmptySentence);
        }
        if !vectors.is_finite() {
            return Err(Error::Schema("non-finite value in embedding sequence".into()));
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn d_in(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vectors(&self) -> &Matrix<T> {
        &self.vectors
    }
}

/// Token to vector lookup. The last row is the out-of-vocabulary row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    vocab: BTreeMap<String, usize>,
    tokens: Vec<String>,
    matrix: Matrix<T>,
    trainable: bool,
}

impl<T: Real> EmbeddingTable<T> {
    /// Builds a table from `(token, vector)` rows and appends a zero UNK row.
    /// Repeated tokens keep their first vector.
    pub fn from_static(entries: Vec<(String, Vec<T>)>) -> Result<Self> {
        let d_in = entries.first().map(|(_, v)| v.len()).ok_or(Error::EmptyInput("vector table"))?;
        if d_in == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut vocab = BTreeMap::new();
        let mut tokens = Vec::new();
        let mut data = Vec::with_capacity((entries.len() + 1) * d_in);
        for (token, vector) in entries {
            if vector.len() != d_in {
                return Err(Error::DimensionMismatch { expected: d_in, found: vector.len() });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Schema(format!("non-finite value for token {token:?}")));
            }
            if vocab.contains_key(&token) {
                continue;
            }
            vocab.insert(token.clone(), tokens.len());
            tokens.push(token);
            data.extend_from_slice(&vector);
        }
        data.extend(core::iter::repeat_n(T::zero(), d_in));
        let matrix = Matrix::from_vec(tokens.len() + 1, d_in, data)?;
        Ok(Self { vocab, tokens, matrix, trainable: false })
    }

    /// Random table over `vocab` plus an UNK row, entries uniform in
    /// `[-1/sqrt(d_in), 1/sqrt(d_in)]`.
    pub fn init_trainable(vocab: &[String], d_in: usize, seed: u64) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyInput("vocabulary"));
        }
        if d_in == 0 {
            return Err(Error::InvalidConfig("embedding width must be positive".into()));
        }
        let mut rng = rng::seeded(seed, rng::stream::EMBEDDINGS);
        let bound = 1.0 / libm::sqrt(d_in as f64);
        let rows = vocab.len() + 1;
        let data = (0..rows * d_in).map(|_| rng::uniform::<T>(&mut rng, bound)).collect();
        Self::from_parts(vocab.to_vec(), Matrix::from_vec(rows, d_in, data)?, true)
    }

    /// `tokens` name rows `0..n`; `matrix` has one extra row for UNK.
    pub fn from_parts(tokens: Vec<String>, matrix: Matrix<T>, trainable: bool) -> Result<Self> {
        if matrix.rows() != tokens.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens need {} rows, matrix has {}",
                tokens.len(),
                tokens.len() + 1,
                matrix.rows()
            )));
        }
        let mut vocab = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if vocab.insert(t.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { vocab, tokens, matrix, trainable })
    }

    pub fn d_in(&self) -> usize {
        self.matrix.cols()
    }

    /// Rows including UNK.
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn unk_index(&self) -> usize {
        self.tokens.len()
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix<T> {
        &mut self.matrix
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.vocab.get(token).copied().unwrap_or(self.tokens.len())
    }

    pub fn lookup(&self, token: &str) -> &[T] {
        self.matrix.row(self.index_of(token))
    }

    pub fn cast<U: Real>(&self) -> EmbeddingTable<U> {
        EmbeddingTable {
            vocab: self.vocab.clone(),
            tokens: self.tokens.clone(),
            matrix: self.matrix.map(|x| U::lit(x.as_f64())),
            trainable: self.trainable,
        }
    }
}

/// Precomputed per-sentence vectors, keyed by sentence id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualStore<T> {
    d_in: usize,
    entries: BTreeMap<u64, (TokenizedSentence, EmbeddingSequence<T>)>,
    by_text: BTreeMap<String, u64>,
}

impl<T: Real> ContextualStore<T> {
    pub fn new(records: Vec<(u64, TokenizedSentence, EmbeddingSequence<T>)>) -> Result<Self> {
        let d_in = records.first().map(|(_, _, s)| s.d_in()).ok_or(Error::EmptyInput("contextual file"))?;
        let mut entries = BTreeMap::new();
        for (id, sentence, seq) in records {
            if seq.d_in() != d_in {
                return Err(Error::DimensionMismatch { expected: d_in, found: seq.d_in() });
            }
            if seq.len() != sentence.len() {
                return Err(Error::Schema(format!(
                    "id {id}: {} vectors for {} tokens",
                    seq.len(),
                    sentence.len()
                )));
            }
            if entries.insert(id, (sentence, seq)).is_some() {
                return Err(Error::Schema(format!("duplicate id {id}")));
            }
        }
        // first id in id order wins for duplicate texts
        let mut by_text = BTreeMap::new();
        for (&id, (s, _)) in &entries {
            by_text.entry(s.text()).or_insert(id);
        }
        Ok(Self { d_in, entries, by_text })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&EmbeddingSequence<T>> {
        self.entries.get(&id).map(|(_, s)| s)
    }

    pub fn id_for(&self, sentence: &TokenizedSentence) -> Option<u64> {
        self.by_text.get(&sentence.text()).copied()
    }

    /// `(id, sentence)` in id order.
    pub fn sentences(&self) -> impl Iterator<Item = (u64, &TokenizedSentence)> {
        self.entries.iter().map(|(&id, (s, _))| (id, s))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a, T> {
    Table(&'a EmbeddingTable<T>),
    Contextual(&'a ContextualStore<T>),
}

impl<T: Real> EmbeddingSource<'_, T> {
    pub fn d_in(&self) -> usize {
        match self {
            EmbeddingSource::Table(t) => t.d_in(),
            EmbeddingSource::Contextual(c) => c.d_in(),
        }
    }

    /// Re-keys batch ids so they address this source. Contextual sources are
    /// matched by sentence text; tables ignore ids.
    pub fn resolve_ids(&self, batch: &mut Batch) -> Result<()> {
        if let EmbeddingSource::Contextual(store) = self {
            for (id, s) in batch.ids.iter_mut().zip(&batch.sentences) {
                *id = store.id_for(s).ok_or_else(|| Error::MissingSequence(format!("{:?}", s.text())))?;
            }
        }
        Ok(())
    }
}

/// Padded `B x l_max x d_in` input tensor; padding rows are zero.
pub fn embed_batch<T: Real>(batch: &Batch, source: &EmbeddingSource<'_, T>) -> Result<Tensor3<T>> {
    let d_in = source.d_in();
    let mut out = Tensor3::zeros(batch.size(), batch.l_max(), d_in);
    for (s, sentence) in batch.sentences.iter().enumerate() {
        match source {
            EmbeddingSource::Table(table) => {
                for (i, tok) in sentence.tokens().iter().enumerate() {
                    out.at_mut(s, i).copy_from_slice(table.lookup(tok));
                }
            }
            EmbeddingSource::Contextual(store) => {
                let id = batch.ids[s];
                let seq = store.get(id).ok_or_else(|| Error::MissingSequence(format!("id {id}")))?;
                if seq.len() != sentence.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "id {id}: {} vectors for a {}-token sentence",
                        seq.len(),
                        sentence.len()
                    )));
                }
                out.span_mut(s, 0, seq.len()).copy_from_slice(seq.vectors().as_slice());
            }
        }
    }
    Ok(out)
}

/// Scatters input gradients back onto table rows. Only rows of tokens that
/// occur in the batch receive anything.
pub fn table_backward<T: Real>(batch: &Batch, grad_input: &Tensor3<T>, table: &EmbeddingTable<T>) -> Matrix<T> {
    let mut grad = Matrix::zeros(table.rows(), table.d_in());
    for (s, sentence) in batch.sentences.iter().enumerate() {
        for (i, tok) in sentence.tokens().iter().enumerate() {
            let row = table.index_of(tok);
            crate::real::axpy(T::one(), grad_input.at(s, i), grad.row_mut(row));
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use alloc::string::ToString;
    use alloc::vec;

    fn table() -> EmbeddingTable<f64> {
        EmbeddingTable::from_static(vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0]),
            ("b".to_string(), vec![4.0, 5.0, 6.0]),
        ])
        .unwrap()
    }

    #[test]
    fn static_table_appends_zero_unk() {
        let t = table();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.d_in(), 3);
        assert_eq!(t.lookup("zzz"), &[0.0, 0.0, 0.0]);
        assert!(!t.trainable());
    }

    #[test]
    fn static_dimension_mismatch() {
        let r = EmbeddingTable::<f64>::from_static(vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0]),
            ("b".to_string(), vec![1.0, 2.0]),
        ]);
        assert_eq!(r.unwrap_err(), Error::DimensionMismatch { expected: 3, found: 2 });
    }

    #[test]
    fn trainable_init_deterministic_and_bounded() {
        let vocab: Vec<String> = (0..50).map(|i| alloc::format!("t{i}")).collect();
        let a = EmbeddingTable::<f32>::init_trainable(&vocab, 4, 3).unwrap();
        let b = EmbeddingTable::<f32>::init_trainable(&vocab, 4, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.trainable());
        assert!(a.matrix().as_slice().iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn trainable_init_mean_near_zero() {
        let vocab: Vec<String> = (0..999).map(|i| alloc::format!("t{i}")).collect();
        let t = EmbeddingTable::<f64>::init_trainable(&vocab, 100, 11).unwrap();
        let n = t.matrix().as_slice().len();
        assert_eq!(n, 100_000);
        let mean = t.matrix().as_slice().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn embed_batch_pads_with_zeros() {
        let t = table();
        let batch = Batch::from_sentences(vec![tokenize("a b").unwrap(), tokenize("b a q").unwrap()]).unwrap();
        let h = embed_batch(&batch, &EmbeddingSource::Table(&t)).unwrap();
        assert_eq!(h.dims(), [2, 3, 3]);
        assert_eq!(h.at(0, 2), &[0.0, 0.0, 0.0]);
        assert_eq!(h.at(1, 0), &[4.0, 5.0, 6.0]);
        assert_eq!(h.at(1, 2), &[0.0, 0.0, 0.0]); // OOV
        assert_eq!(h, embed_batch(&batch, &EmbeddingSource::Table(&t)).unwrap());
    }

    #[test]
    fn contextual_lookup_and_missing() {
        let seq = |rows: usize| EmbeddingSequence::new(Matrix::from_vec(rows, 2, vec![0.5; rows * 2]).unwrap()).unwrap();
        let store = ContextualStore::new(vec![
            (7, tokenize("x y").unwrap(), seq(2)),
            (3, tokenize("z").unwrap(), seq(1)),
        ])
        .unwrap();
        let src = EmbeddingSource::Contextual(&store);
        let mut batch = Batch::from_sentences(vec![tokenize("z").unwrap(), tokenize("x y").unwrap()]).unwrap();
        assert!(matches!(embed_batch(&batch, &src), Err(Error::MissingSequence(_))));
        src.resolve_ids(&mut batch).unwrap();
        assert_eq!(batch.ids, vec![3, 7]);
        let h = embed_batch(&batch, &src).unwrap();
        assert_eq!(h.at(0, 1), &[0.0, 0.0]);
        assert_eq!(h.at(1, 1), &[0.5, 0.5]);
        let mut unknown = Batch::from_sentences(vec![tokenize("nope").unwrap()]).unwrap();
        assert!(matches!(src.resolve_ids(&mut unknown), Err(Error::MissingSequence(_))));
    }

    #[test]
    fn contextual_rejects_mixed_widths() {
        let a = EmbeddingSequence::new(Matrix::<f64>::zeros(1, 4)).unwrap();
        let b = EmbeddingSequence::new(Matrix::<f64>::zeros(1, 3)).unwrap();
        let r = ContextualStore::new(vec![(0, tokenize("a").unwrap(), a), (1, tokenize("b").unwrap(), b)]);
        assert_eq!(r.unwrap_err(), Error::DimensionMismatch { expected: 4, found: 3 });
    }

    #[test]
    fn table_backward_touches_only_batch_rows() {
        let t = table();
        let batch = Batch::from_sentences(vec![tokenize("a a").unwrap(), tokenize("a").unwrap()]).unwrap();
        let mut g = Tensor3::<f64>::zeros(2, 2, 3);
        g.as_mut_slice().iter_mut().for_each(|x| *x = 1.0);
        let grad = table_backward(&batch, &g, &t);
        assert_eq!(grad.row(0), &[3.0, 3.0, 3.0]);
        assert_eq!(grad.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(grad.row(2), &[0.0, 0.0, 0.0]);
    }
}
