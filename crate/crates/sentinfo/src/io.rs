//! Readers and writers for the text formats: corpora, scored pairs, labeled
//! sentences, word-vector tables and contextual JSON-Lines.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use sentinfo_core::corpus::{self, LabeledSentence, ScoredSentencePair, TokenizedSentence};
use sentinfo_core::{ContextualStore, EmbeddingSequence, EmbeddingTable, Error as CoreError, Matrix};

use crate::error::{Error, Result};

/// Reads a whole file as UTF-8, reporting the line of the first bad byte.
pub fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| {
        let good = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        let line = good.iter().filter(|&&b| b == b'\n').count() + 1;
        Error::Encoding { path: path.to_path_buf(), line }
    })
}

fn truncate_all<'a>(path: &Path, sentences: impl Iterator<Item = &'a mut TokenizedSentence>, max_len: usize) {
    let cut = sentences.filter_map(|s| s.truncate(max_len).then_some(())).count();
    if cut > 0 {
        warn!("{}: truncated {cut} sentence(s) to {max_len} tokens", path.display());
    }
}

pub fn load_corpus(path: &Path, max_len: usize) -> Result<Vec<TokenizedSentence>> {
    let mut sentences = corpus::parse_corpus(&read_text(path)?);
    if sentences.is_empty() {
        warn!("{}: corpus is empty", path.display());
    }
    truncate_all(path, sentences.iter_mut(), max_len);
    Ok(sentences)
}

pub fn load_scored_pairs(path: &Path, max_len: usize) -> Result<Vec<ScoredSentencePair>> {
    let mut pairs = corpus::parse_scored_pairs(&read_text(path)?).map_err(|e| Error::data(path, e))?;
    truncate_all(path, pairs.iter_mut().flat_map(|p| [&mut p.sentence_a, &mut p.sentence_b]), max_len);
    Ok(pairs)
}

pub fn load_labeled(path: &Path, max_len: usize) -> Result<Vec<LabeledSentence>> {
    let mut items = corpus::parse_labeled(&read_text(path)?).map_err(|e| Error::data(path, e))?;
    truncate_all(path, items.iter_mut().map(|x| &mut x.sentence), max_len);
    Ok(items)
}

/// Word-vector text format: `token v1 v2 ... vd` per line. The width is taken
/// from the first line and a zero UNK row is appended.
pub fn load_static_vectors(path: &Path) -> Result<EmbeddingTable<f32>> {
    let text = read_text(path)?;
    let mut entries = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let vector = fields
            .map(|f| f.parse::<f32>())
            .collect::<Result<Vec<f32>, _>>()
            .map_err(|_| Error::data(path, CoreError::Parse { line: line_no, msg: format!("non-numeric field for {token:?}") }))?;
        let expected = *width.get_or_insert(vector.len());
        if vector.len() != expected || expected == 0 {
            return Err(Error::data(path, CoreError::DimensionMismatch { expected, found: vector.len() }));
        }
        entries.push((token.to_string(), vector));
    }
    EmbeddingTable::from_static(entries).map_err(|e| Error::data(path, e))
}

#[derive(Debug, Deserialize, Serialize)]
pub struct ContextualRecord {
    pub id: u64,
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
}

/// JSON-Lines `{"id", "tokens", "vectors"}` records, one sentence each.
pub fn load_contextual(path: &Path) -> Result<ContextualStore<f32>> {
    let text = read_text(path)?;
    let schema = |line: usize, msg: String| Error::data(path, CoreError::Schema(format!("line {line}: {msg}")));
    let mut records = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ContextualRecord = serde_json::from_str(line).map_err(|e| schema(line_no, e.to_string()))?;
        if rec.vectors.len() != rec.tokens.len() {
            return Err(schema(line_no, format!("{} vectors for {} tokens", rec.vectors.len(), rec.tokens.len())));
        }
        let w = rec.vectors.first().map_or(0, Vec::len);
        if w == 0 || rec.vectors.iter().any(|v| v.len() != w) {
            return Err(schema(line_no, "ragged or empty vectors".into()));
        }
        let expected = *width.get_or_insert(w);
        if w != expected {
            return Err(Error::data(path, CoreError::DimensionMismatch { expected, found: w }));
        }
        let sentence = TokenizedSentence::new(rec.tokens).map_err(|e| schema(line_no, e.to_string()))?;
        let matrix = Matrix::from_rows(&rec.vectors).map_err(|e| schema(line_no, e.to_string()))?;
        let seq = EmbeddingSequence::new(matrix).map_err(|e| schema(line_no, e.to_string()))?;
        records.push((rec.id, sentence, seq));
    }
    ContextualStore::new(records).map_err(|e| Error::data(path, e))
}

/// Writes one JSON value per line.
pub fn write_jsonl<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EmbeddingRow {
    pub id: usize,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Clone, Copy)]
pub struct MetricRow {
    pub step: usize,
    pub objective: f64,
}
