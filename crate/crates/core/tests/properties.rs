use proptest::prelude::*;

use sentinfo_core::corpus::{make_batches, tokenize, Batch, ScoredSentencePair, TokenizedSentence};
use sentinfo_core::embed::embed_batch;
use sentinfo_core::encoder::encode;
use sentinfo_core::eval::eval_sts;
use sentinfo_core::mi::jsd_batch;
use sentinfo_core::stats::{cosine, spearman};
use sentinfo_core::{EmbeddingTable, EncoderConfig, InputSource, Model, ModelConfig, Tensor3};

const WORDS: &[&str] = &["ant", "bee", "cat", "dog", "eel", "fox", "gnu", "hen"];

fn sentence(ix: &[usize]) -> TokenizedSentence {
    TokenizedSentence::new(ix.iter().map(|&i| WORDS[i % WORDS.len()].to_string()).collect()).unwrap()
}

fn sentences() -> impl Strategy<Value = Vec<TokenizedSentence>> {
    prop::collection::vec(prop::collection::vec(0usize..8, 1..7), 2..7)
        .prop_map(|xs| xs.iter().map(|x| sentence(x)).collect())
}

fn model(seed: u64) -> Model<f64> {
    let vocab: Vec<String> = WORDS.iter().map(|w| w.to_string()).collect();
    let cfg = ModelConfig::new(EncoderConfig::new(vec![1, 3], 3, 4).unwrap()).unwrap();
    let table = EmbeddingTable::init_trainable(&vocab, 4, seed).unwrap();
    Model::init(cfg, Some(table), seed).unwrap()
}

/// Copies `h` into a tensor with `extra` more zero positions per sentence.
fn pad(h: &Tensor3<f64>, extra: usize) -> Tensor3<f64> {
    let [b, l, w] = h.dims();
    let mut out = Tensor3::zeros(b, l + extra, w);
    for s in 0..b {
        out.span_mut(s, 0, l).copy_from_slice(h.sentence(s));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenize_is_idempotent(text in "[ A-Za-z0-9.,;!?'\"()\\-]{1,40}|\\PC{1,20}") {
        if let Ok(t) = tokenize(&text) {
            prop_assert_eq!(tokenize(&t.text()).unwrap(), t);
        }
    }

    #[test]
    fn batching_keeps_every_token_once(xs in sentences(), size in 2usize..5, seed: u64) {
        let batches = make_batches(&xs, size, seed, true).unwrap();
        let mask_total: usize = batches.iter().flat_map(Batch::masks).map(|m| m.iter().map(|&v| v as usize).sum::<usize>()).sum();
        prop_assert_eq!(mask_total, xs.iter().map(TokenizedSentence::len).sum::<usize>());
        let mut ids: Vec<u64> = batches.iter().flat_map(|b| b.ids.clone()).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..xs.len() as u64).collect::<Vec<_>>());
        for b in &batches {
            for (id, s) in b.ids.iter().zip(&b.sentences) {
                prop_assert_eq!(s, &xs[*id as usize]);
            }
        }
    }

    #[test]
    fn padding_changes_nothing(xs in sentences(), extra in 1usize..4, seed in 0u64..1000) {
        let m = model(seed);
        let mut batch = Batch::from_sentences(xs).unwrap();
        let (h, enc) = m.forward(&mut batch, InputSource::Model).unwrap();
        let enc2 = encode(&pad(&h, extra), batch.lengths(), &m.encoder, &m.config.encoder).unwrap();
        prop_assert_eq!(enc.global.as_slice(), enc2.global.as_slice());
        let a = jsd_batch(&enc, &m.discriminator, true).unwrap();
        let b = jsd_batch(&enc2, &m.discriminator, true).unwrap();
        prop_assert_eq!(a.objective, b.objective);
        prop_assert_eq!(a.per_sentence, b.per_sentence);
    }

    #[test]
    fn embedded_positions_match_source(xs in sentences(), seed in 0u64..1000) {
        let m = model(seed);
        let table = m.embeddings.as_ref().unwrap();
        let batch = Batch::from_sentences(xs).unwrap();
        let h = embed_batch(&batch, &sentinfo_core::EmbeddingSource::Table(table)).unwrap();
        for s in 0..batch.size() {
            for i in 0..batch.l_max() {
                if batch.mask(s, i) {
                    prop_assert_eq!(h.at(s, i), table.lookup(&batch.sentences[s].tokens()[i]));
                } else {
                    prop_assert!(h.at(s, i).iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn sentence_order_does_not_change_objective(xs in sentences(), seed in 0u64..1000, rot in 1usize..6) {
        let m = model(seed);
        let mut ys = xs.clone();
        let k = rot % ys.len();
        ys.rotate_left(k);
        let obj = |v: Vec<TokenizedSentence>| {
            let mut b = Batch::from_sentences(v).unwrap();
            let (_, enc) = m.forward(&mut b, InputSource::Model).unwrap();
            jsd_batch(&enc, &m.discriminator, true).unwrap().objective
        };
        prop_assert!((obj(xs) - obj(ys)).abs() < 1e-10);
    }

    #[test]
    fn spearman_ignores_monotone_maps(pairs in prop::collection::vec((-30i32..30, -30i32..30), 3..40)) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let m: Vec<f64> = a.iter().map(|x| x * x * x + 7.0).collect();
        prop_assert_eq!(spearman(&a, &b).ok(), spearman(&m, &b).ok());
    }

    #[test]
    fn cosine_ignores_positive_scale(
        u in prop::collection::vec(-5.0f64..5.0, 6),
        v in prop::collection::vec(-5.0f64..5.0, 6),
        c in 1e-3f64..1e3,
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let scaled: Vec<f64> = u.iter().map(|x| c * x).collect();
        prop_assert!((cosine(&u, &v).unwrap() - cosine(&scaled, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn eval_sts_ignores_pair_order(xs in sentences(), ys in sentences(), seed in 0u64..1000, rot in 1usize..6) {
        let m = model(seed);
        let mut pairs: Vec<ScoredSentencePair> = xs
            .into_iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (a, b))| ScoredSentencePair { score: (i % 6) as f64 * 0.8, sentence_a: a, sentence_b: b })
            .collect();
        prop_assume!(pairs.len() >= 3);
        let Ok(r1) = eval_sts(&m, &pairs, InputSource::Model) else { return Ok(()) };
        let k = rot % pairs.len();
        pairs.rotate_left(k);
        let r2 = eval_sts(&m, &pairs, InputSource::Model).unwrap();
        prop_assert!((r1.spearman_rho - r2.spearman_rho).abs() < 1e-12);
        prop_assert!((r1.pearson_r - r2.pearson_r).abs() < 1e-12);
        prop_assert_eq!(r1.n_pairs, r2.n_pairs);
    }
}
