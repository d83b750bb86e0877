//! Command-line driver. Every subcommand prints a JSON report on stdout and
//! maps failures to exit codes: 1 usage, 2 data, 3 numerical.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use sentinfo_core::corpus::{self, build_vocab, DEFAULT_MAX_LEN};
use sentinfo_core::gradcheck::{gradient_check, GradCheckConfig};
use sentinfo_core::probe::{probe_classification, ProbeConfig};
use sentinfo_core::{
    eval, train, AdamConfig, AdamState, EmbeddingTable, EncoderConfig, Error as CoreError, Model, ModelConfig,
    StepRecord, TrainConfig,
};

use crate::checkpoint::Checkpoint;
use crate::embeddings::{self, EmbeddingSpec, LoadedEmbeddings};
use crate::error::{Error, Result};
use crate::io::{self, EmbeddingRow, MetricRow};
use crate::synth::{self, SynthConfig};

const FORMATS: &str = "\
File formats:
  corpus       UTF-8 text, one sentence per line, blank lines skipped
  pairs        TSV: score<TAB>sentence_a<TAB>sentence_b, score in [0, 5]
  labeled      TSV: label<TAB>sentence, label a class index from 0
  static       text: token v1 v2 ... vd per line
  contextual   JSON-Lines: {\"id\": int, \"tokens\": [..], \"vectors\": [[..], ..]}
  embeddings   JSON-Lines: {\"id\": int, \"embedding\": [..]}
  metrics      JSON-Lines: {\"step\": int, \"objective\": float}
  checkpoint   binary: magic ISBT, u32 version, u64 header length, JSON header, f32 tensors

Exit codes: 0 success, 1 usage, 2 data or validation, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(
    name = "sentinfo",
    version,
    about = "Unsupervised sentence embeddings by mutual-information maximization",
    after_help = FORMATS
)]
pub struct Cli {
    /// Worker threads for the numeric kernels.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an encoder on an unlabeled corpus.
    Train(TrainArgs),
    /// Fine-tune a checkpoint on scored sentence pairs.
    Finetune(FinetuneArgs),
    /// Write sentence embeddings as JSON-Lines.
    Embed(EmbedArgs),
    /// Spearman and Pearson correlation on scored pairs.
    EvalSts(EvalStsArgs),
    /// Cross-validated logistic-regression probe on labeled sentences.
    EvalCls(EvalClsArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic topic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Schedule {
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Optimizer steps. Defaults to 200 unless --epochs is given.
    #[arg(long, conflicts_with = "epochs")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Metric log path. Defaults to `<out>.metrics.jsonl`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// One sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Token vectors: trainable:DIM, static:PATH or contextual:PATH.
    #[arg(long, default_value = "trainable:64")]
    pub embeddings: EmbeddingSpec,
    /// Odd convolution window sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub windows: Vec<usize>,
    /// Filters per window.
    #[arg(long, default_value_t = 256)]
    pub filters: usize,
    /// Sum rather than average each sentence's positive scores.
    #[arg(long)]
    pub no_length_norm: bool,
    /// Longer sentences are truncated.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[command(flatten)]
    pub schedule: Schedule,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Checkpoint written by train or finetune.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `score<TAB>sentence_a<TAB>sentence_b` per line.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Input vectors for checkpoints trained on static:PATH or contextual:PATH.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSpec>,
    /// Longer sentences are truncated.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[command(flatten)]
    pub schedule: Schedule,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Checkpoint written by train or finetune.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Input vectors for checkpoints trained on static:PATH or contextual:PATH.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSpec>,
    /// Longer sentences are truncated.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    /// JSON-Lines file of `{"id", "embedding"}` rows.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalStsArgs {
    /// Checkpoint written by train or finetune.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `score<TAB>sentence_a<TAB>sentence_b` per line.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Input vectors for checkpoints trained on static:PATH or contextual:PATH.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSpec>,
    /// Longer sentences are truncated.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct EvalClsArgs {
    /// Checkpoint written by train or finetune.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `label<TAB>sentence` per line.
    #[arg(long)]
    pub labeled: PathBuf,
    /// Input vectors for checkpoints trained on static:PATH or contextual:PATH.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSpec>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Longer sentences are truncated.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Coordinates sampled per tensor.
    #[arg(long, default_value_t = 20)]
    pub coords: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub topics: usize,
    #[arg(long, default_value_t = 100)]
    pub per_topic: usize,
    #[arg(long, default_value_t = 40)]
    pub vocab_per_topic: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Core(CoreError::GradCheckFailed(fails)) = &e {
                println!("{}", json!({ "passed": false, "failures": fails.iter().map(|f| json!({
                    "tensor": f.tensor, "index": f.index, "analytic": f.analytic,
                    "numeric": f.numeric, "rel_err": f.rel_err,
                })).collect::<Vec<_>>() }));
            }
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<serde_json::Value> {
    if cli.threads == 0 {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    // A second call in the same process keeps the first pool, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Embed(a) => cmd_embed(a),
        Command::EvalSts(a) => cmd_eval_sts(a),
        Command::EvalCls(a) => cmd_eval_cls(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn to_value(x: impl Serialize) -> Result<serde_json::Value> {
    serde_json::to_value(x).map_err(|e| Error::CorruptPayload(e.to_string()))
}

fn metrics_path(explicit: Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".metrics.jsonl");
        s.into()
    })
}

/// Mirrors the batching rule: with `min_batch` 2, a trailing single sentence
/// joins the previous batch.
fn batches_per_epoch(items: usize, batch_size: usize, min_batch: usize) -> usize {
    let n = items.div_ceil(batch_size);
    if min_batch > 1 && n > 1 && items % batch_size == 1 {
        n - 1
    } else {
        n
    }
}

fn train_config(s: &Schedule, items: usize, min_batch: usize) -> Result<TrainConfig> {
    let steps = match (s.steps, s.epochs) {
        (Some(n), _) => n,
        (None, Some(e)) => e * batches_per_epoch(items, s.batch_size.max(1), min_batch),
        (None, None) => 200,
    };
    let cfg = TrainConfig {
        batch_size: s.batch_size,
        steps,
        seed: s.seed,
        adam: AdamConfig { learning_rate: s.lr, ..AdamConfig::default() },
    };
    cfg.validate(min_batch)?;
    Ok(cfg)
}

fn summary(log: &[StepRecord]) -> serde_json::Value {
    let window = (log.len() / 10).clamp(1, 20);
    let ends = train::smoothed_endpoints(log, window);
    json!({
        "steps": log.len(),
        "first_objective": log.first().map(|r| r.objective),
        "last_objective": log.last().map(|r| r.objective),
        "smoothing_window": window,
        "smoothed_first": ends.map(|e| e.0),
        "smoothed_last": ends.map(|e| e.1),
    })
}

fn cmd_train(a: TrainArgs) -> Result<serde_json::Value> {
    let sentences = io::load_corpus(&a.corpus, a.max_len)?;
    if sentences.len() < 2 {
        return Err(Error::data(&a.corpus, CoreError::BatchTooSmall(sentences.len())));
    }
    let cfg = train_config(&a.schedule, sentences.len(), 2)?;
    let loaded = a.embeddings.load()?;
    let encoder = EncoderConfig::new(a.windows.clone(), a.filters, loaded.d_in()).map_err(|e| Error::Usage(e.to_string()))?;
    let mut config = ModelConfig::new(encoder)?;
    config.length_norm = !a.no_length_norm;
    let table = match &loaded {
        LoadedEmbeddings::Trainable(d) => Some(EmbeddingTable::init_trainable(&build_vocab(&sentences), *d, cfg.seed)?),
        _ => None,
    };
    let model = Model::init(config, table, cfg.seed)?;
    let mut ckpt = Checkpoint::new(model, a.embeddings.kind(), cfg.seed);
    info!("training {} steps on {} sentences", cfg.steps, sentences.len());
    let log = train::train_ssl(&mut ckpt.model, &mut ckpt.optimizer, &sentences, loaded.input(), &cfg, |r| {
        info!("step {} objective {:.6}", r.step, r.objective)
    })?;
    ckpt.step = log.len() as u64;
    ckpt.metrics = log.iter().map(|r| MetricRow { step: r.step, objective: r.objective }).collect();
    ckpt.save(&a.out)?;
    let metrics = metrics_path(a.schedule.metrics, &a.out);
    io::write_jsonl(&metrics, &ckpt.metrics)?;
    let mut report = summary(&log);
    report["checkpoint"] = json!(a.out);
    report["metrics"] = json!(metrics);
    Ok(report)
}

fn cmd_finetune(a: FinetuneArgs) -> Result<serde_json::Value> {
    let mut ckpt = Checkpoint::load(&a.checkpoint)?;
    let loaded = embeddings::for_checkpoint(&ckpt.embeddings, a.embeddings.as_ref())?;
    let pairs = io::load_scored_pairs(&a.pairs, a.max_len)?;
    let cfg = train_config(&a.schedule, pairs.len(), 1)?;
    let before = train::regression_mse(&ckpt.model, &pairs, loaded.input())?;
    // The pretraining moments belong to a different objective.
    let mut state = AdamState::for_model(&ckpt.model);
    let log = train::finetune_regression(&mut ckpt.model, &mut state, &pairs, loaded.input(), &cfg, |r| {
        info!("step {} mse {:.6}", r.step, r.objective)
    })?;
    let after = train::regression_mse(&ckpt.model, &pairs, loaded.input())?;
    let offset = ckpt.step as usize;
    let rows: Vec<MetricRow> = log.iter().map(|r| MetricRow { step: offset + r.step, objective: r.objective }).collect();
    ckpt.optimizer = state;
    ckpt.step += log.len() as u64;
    ckpt.metrics.extend(rows.iter().copied());
    ckpt.save(&a.out)?;
    let metrics = metrics_path(a.schedule.metrics, &a.out);
    io::write_jsonl(&metrics, &rows)?;
    Ok(json!({
        "steps": log.len(),
        "mse_before": before,
        "mse_after": after,
        "checkpoint": a.out,
        "metrics": metrics,
    }))
}

fn cmd_embed(a: EmbedArgs) -> Result<serde_json::Value> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let loaded = embeddings::for_checkpoint(&ckpt.embeddings, a.embeddings.as_ref())?;
    let sentences = io::load_corpus(&a.corpus, a.max_len)?;
    let vectors = eval::embed_sentences(&ckpt.model, &sentences, loaded.input())?;
    if vectors.is_empty() {
        warn!("{}: writing an empty embedding file", a.out.display());
    }
    let rows = vectors.into_iter().enumerate().map(|(id, embedding)| EmbeddingRow { id, embedding });
    io::write_jsonl(&a.out, rows)?;
    Ok(json!({ "sentences": sentences.len(), "dim": ckpt.model.config.rep_dim(), "out": a.out }))
}

fn cmd_eval_sts(a: EvalStsArgs) -> Result<serde_json::Value> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let loaded = embeddings::for_checkpoint(&ckpt.embeddings, a.embeddings.as_ref())?;
    let pairs = io::load_scored_pairs(&a.pairs, a.max_len)?;
    let r = eval::eval_sts(&ckpt.model, &pairs, loaded.input()).map_err(|e| Error::data(&a.pairs, e))?;
    Ok(json!({ "spearman_rho": r.spearman_rho, "pearson_r": r.pearson_r, "n_pairs": r.n_pairs }))
}

fn cmd_eval_cls(a: EvalClsArgs) -> Result<serde_json::Value> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let loaded = embeddings::for_checkpoint(&ckpt.embeddings, a.embeddings.as_ref())?;
    let items = io::load_labeled(&a.labeled, a.max_len)?;
    corpus::class_count(&items, None).map_err(|e| Error::data(&a.labeled, e))?;
    let sentences: Vec<_> = items.iter().map(|x| x.sentence.clone()).collect();
    let labels: Vec<usize> = items.iter().map(|x| x.label).collect();
    let features: Vec<Vec<f64>> = eval::embed_sentences(&ckpt.model, &sentences, loaded.input())?
        .into_iter()
        .map(|v| v.into_iter().map(f64::from).collect())
        .collect();
    let cfg = ProbeConfig { folds: a.folds, l2: a.l2, seed: a.seed, ..ProbeConfig::default() };
    let r = probe_classification(&features, &labels, &cfg).map_err(|e| Error::data(&a.labeled, e))?;
    Ok(json!({ "fold_accuracies": r.fold_accuracies, "mean_accuracy": r.mean_accuracy }))
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<serde_json::Value> {
    let cfg = GradCheckConfig { n_coords: a.coords, ..GradCheckConfig::default() };
    let r = gradient_check(a.seed, &cfg)?;
    let tensors: Vec<_> = r
        .tensors
        .iter()
        .map(|t| json!({ "tensor": t.name, "coords": t.coords, "max_rel_err": t.max_rel_err }))
        .collect();
    Ok(json!({ "passed": true, "max_rel_err": r.max_rel_err, "tensors": tensors }))
}

fn cmd_synth(a: SynthArgs) -> Result<serde_json::Value> {
    let cfg = SynthConfig { topics: a.topics, per_topic: a.per_topic, vocab_per_topic: a.vocab_per_topic, seed: a.seed };
    let corpus = synth::generate(&cfg)?;
    corpus.write(&a.out)?;
    to_value(json!({
        "sentences": corpus.sentences.len(),
        "pairs": corpus.pairs.len(),
        "topics": a.topics,
        "out": a.out,
    }))
}
