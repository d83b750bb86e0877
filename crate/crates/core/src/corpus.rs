//! Tokenization, text parsing and mini-batch assembly.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng;

/// Sentences longer than this are truncated when loaded.
pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenizedSentence {
    tokens: Vec<String>,
}

impl TokenizedSentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidToken(bad.clone()));
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces. Tokenizing this again gives back the same tokens.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Keeps the first `max_len` tokens. Returns whether anything was cut.
    pub fn truncate(&mut self, max_len: usize) -> bool {
        let max_len = max_len.max(1);
        if self.tokens.len() > max_len {
            self.tokens.truncate(max_len);
            true
        } else {
            false
        }
    }
}

/// NFC-normalizes, lowercases, splits on Unicode whitespace and peels leading
/// and trailing ASCII punctuation off each word, one token per character.
pub fn tokenize(text: &str) -> Result<TokenizedSentence> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let mut tokens = Vec::new();
    for word in normalized.split_whitespace() {
        peel_punctuation(word, &mut tokens);
    }
    TokenizedSentence::new(tokens)
}

fn peel_punctuation(word: &str, out: &mut Vec<String>) {
    let bytes = word.as_bytes();
    let mut start = 0;
    while start < bytes.len() && bytes[start].is_ascii_punctuation() {
        start += 1;
    }
    let mut end = bytes.len();
    while end > start && bytes[end - 1].is_ascii_punctuation() {
        end -= 1;
    }
    // ASCII bytes are always char boundaries.
    out.extend(word[..start].chars().map(|c| c.to_string()));
    if start < end {
        out.push(word[start..end].to_string());
    }
    out.extend(word[end..].chars().map(|c| c.to_string()));
}

/// One sentence per line; blank lines are skipped. Accepts LF or CRLF.
pub fn parse_corpus(text: &str) -> Vec<TokenizedSentence> {
    lines(text).filter_map(|(_, line)| tokenize(line).ok()).collect()
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSentencePair {
    pub score: f64,
    pub sentence_a: TokenizedSentence,
    pub sentence_b: TokenizedSentence,
}

pub const MAX_SCORE: f64 = 5.0;

/// Parses `score<TAB>sentence_a<TAB>sentence_b` rows.
pub fn parse_scored_pairs(text: &str) -> Result<Vec<ScoredSentencePair>> {
    let mut pairs = Vec::new();
    for (line, row) in lines(text) {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let score: f64 = fields[0].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("score {:?} is not a number", fields[0]),
        })?;
        if !(0.0..=MAX_SCORE).contains(&score) {
            return Err(Error::Parse { line, msg: format!("score {score} outside [0, 5]") });
        }
        let sentence = |s: &str| {
            tokenize(s).map_err(|_| Error::Parse { line, msg: "empty sentence".to_string() })
        };
        pairs.push(ScoredSentencePair {
            score,
            sentence_a: sentence(fields[1])?,
            sentence_b: sentence(fields[2])?,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSentence {
    pub label: usize,
    pub sentence: TokenizedSentence,
}

/// Parses `label<TAB>sentence` rows. Labels are non-negative integers.
pub fn parse_labeled(text: &str) -> Result<Vec<LabeledSentence>> {
    let mut out = Vec::new();
    for (line, row) in lines(text) {
        let Some((label, sentence)) = row.split_once('\t') else {
            return Err(Error::Parse { line, msg: "expected label<TAB>sentence".to_string() });
        };
        let label: usize = label.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("label {label:?} is not a non-negative integer"),
        })?;
        let sentence = tokenize(sentence)
            .map_err(|_| Error::Parse { line, msg: "empty sentence".to_string() })?;
        out.push(LabeledSentence { label, sentence });
    }
    Ok(out)
}

/// Number of classes implied by the labels (`max + 1`), after checking
/// against an optional declared count.
pub fn class_count(items: &[LabeledSentence], declared: Option<usize>) -> Result<usize> {
    let implied = items.iter().map(|x| x.label + 1).max().unwrap_or(0);
    match declared {
        Some(classes) => match items.iter().find(|x| x.label >= classes) {
            Some(bad) => Err(Error::LabelOutOfRange { label: bad.label, classes }),
            None => Ok(classes),
        },
        None => Ok(implied),
    }
}

/// Sorted, de-duplicated token inventory.
pub fn build_vocab<'a>(sentences: impl IntoIterator<Item = &'a TokenizedSentence>) -> Vec<String> {
    let set: BTreeSet<&str> =
        sentences.into_iter().flat_map(|s| s.tokens().iter().map(String::as_str)).collect();
    set.into_iter().map(String::from).collect()
}

/// A group of sentences processed together. Positions at or past a
/// sentence's length are padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Sentence identifiers; positions in the source list unless re-keyed.
    pub ids: Vec<u64>,
    pub sentences: Vec<TokenizedSentence>,
    lengths: Vec<usize>,
    l_max: usize,
}

impl Batch {
    pub fn new(ids: Vec<u64>, sentences: Vec<TokenizedSentence>) -> Result<Self> {
        if ids.len() != sentences.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for {} sentences",
                ids.len(),
                sentences.len()
            )));
        }
        if sentences.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let lengths: Vec<usize> = sentences.iter().map(TokenizedSentence::len).collect();
        let l_max = lengths.iter().copied().max().unwrap_or(0);
        Ok(Self { ids, sentences, lengths, l_max })
    }

    /// Batch whose ids are `0..n`.
    pub fn from_sentences(sentences: Vec<TokenizedSentence>) -> Result<Self> {
        Self::new((0..sentences.len() as u64).collect(), sentences)
    }

    pub fn size(&self) -> usize {
        self.sentences.len()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn mask(&self, s: usize, i: usize) -> bool {
        i < self.lengths[s]
    }

    /// `B x l_max` 0/1 matrix.
    pub fn masks(&self) -> Vec<Vec<u8>> {
        self.lengths
            .iter()
            .map(|&l| (0..self.l_max).map(|i| u8::from(i < l)).collect())
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// Splits `sentences` into batches of `batch_size`, shuffled with `seed` when
/// asked. A trailing batch of one sentence is merged into the previous one.
pub fn make_batches(
    sentences: &[TokenizedSentence],
    batch_size: usize,
    seed: u64,
    shuffle: bool,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".to_string()));
    }
    if sentences.len() < 2 {
        return Err(Error::BatchTooSmall(sentences.len()));
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    if shuffle {
        let mut rng = rng::seeded(seed, rng::stream::SHUFFLE);
        rng::shuffle(&mut rng, &mut order);
    }
    let mut groups: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if groups.len() > 1 && groups.last().is_some_and(|g| g.len() < 2) {
        let tail = groups.pop().unwrap_or_default();
        if let Some(prev) = groups.last_mut() {
            prev.extend(tail);
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let ids = g.iter().map(|&i| i as u64).collect();
            let sents = g.iter().map(|&i| sentences[i].clone()).collect();
            Batch::new(ids, sents)
        })
        .collect()
}
