//! Synthetic topic corpus. Each topic draws from its own vocabulary, so
//! sentences from different topics share no tokens. Pair scores come from
//! token overlap, which gives a graded similarity signal.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use sentinfo_core::rng::{self, SeededRng};

use crate::error::{Error, Result};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const MIN_LEN: usize = 5;
const MAX_LEN: usize = 12;
/// Separate from the core streams so the fixture never aliases model init.
const SYNTH_STREAM: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub topics: usize,
    pub per_topic: usize,
    pub vocab_per_topic: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { topics: 2, per_topic: 100, vocab_per_topic: 40, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub score: f64,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub vocab: Vec<Vec<String>>,
    pub sentences: Vec<String>,
    pub labels: Vec<usize>,
    pub pairs: Vec<SynthPair>,
}

fn word(rng: &mut SeededRng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::with_capacity(2 * syllables);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    w
}

fn jaccard(a: &[&str], b: &[&str]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.topics < 2 || cfg.per_topic < 2 || cfg.vocab_per_topic < MAX_LEN {
        return Err(Error::Usage(format!(
            "synth needs at least 2 topics, 2 sentences per topic and {MAX_LEN} words per topic"
        )));
    }
    let mut rng = rng::seeded(cfg.seed, SYNTH_STREAM);

    let mut seen = BTreeSet::new();
    let mut vocab = Vec::with_capacity(cfg.topics);
    for _ in 0..cfg.topics {
        let mut words = Vec::with_capacity(cfg.vocab_per_topic);
        while words.len() < cfg.vocab_per_topic {
            let w = word(&mut rng);
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        vocab.push(words);
    }

    let mut tokens: Vec<Vec<&str>> = Vec::new();
    let mut labels = Vec::new();
    for (topic, words) in vocab.iter().enumerate() {
        for _ in 0..cfg.per_topic {
            let len = rng.random_range(MIN_LEN..=MAX_LEN);
            tokens.push((0..len).map(|_| words[rng.random_range(0..words.len())].as_str()).collect());
            labels.push(topic);
        }
    }

    // Half the pairs perturb a sentence, a quarter pair two sentences of one
    // topic, a quarter pair across topics.
    let n = tokens.len();
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let topic = labels[i];
        let kind = rng.random_range(0..4);
        let other: Vec<&str> = if kind < 2 {
            let p: f64 = rng.random();
            tokens[i]
                .iter()
                .map(|&t| if rng.random::<f64>() < p { vocab[topic][rng.random_range(0..cfg.vocab_per_topic)].as_str() } else { t })
                .collect()
        } else {
            let same = kind == 2;
            let j = loop {
                let j = rng.random_range(0..n);
                if j != i && (labels[j] == topic) == same {
                    break j;
                }
            };
            tokens[j].clone()
        };
        let score = (50.0 * jaccard(&tokens[i], &other)).round() / 10.0;
        pairs.push(SynthPair { score, a: tokens[i].join(" "), b: other.join(" ") });
    }

    let sentences = tokens.iter().map(|t| t.join(" ")).collect();
    drop(tokens);
    Ok(SynthCorpus { vocab, sentences, labels, pairs })
}

impl SynthCorpus {
    pub fn corpus_text(&self) -> String {
        self.sentences.iter().fold(String::new(), |mut s, x| {
            let _ = writeln!(s, "{x}");
            s
        })
    }

    pub fn labels_text(&self) -> String {
        self.sentences.iter().zip(&self.labels).fold(String::new(), |mut s, (x, l)| {
            let _ = writeln!(s, "{l}\t{x}");
            s
        })
    }

    pub fn pairs_text(&self) -> String {
        self.pairs.iter().fold(String::new(), |mut s, p| {
            let _ = writeln!(s, "{:.1}\t{}\t{}", p.score, p.a, p.b);
            s
        })
    }

    /// Writes `corpus.txt`, `labels.tsv` and `pairs.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("corpus.txt", self.corpus_text()),
            ("labels.tsv", self.labels_text()),
            ("pairs.tsv", self.pairs_text()),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
