//! Independent reference implementations checked against the library.

use rand::Rng;

use sentinfo_core::corpus::{Batch, TokenizedSentence};
use sentinfo_core::mi::{jsd_batch, DiscriminatorParams};
use sentinfo_core::optim::adam_step;
use sentinfo_core::rng::{self, SeededRng};
use sentinfo_core::stats::{pearson, spearman};
use sentinfo_core::train::ssl_loss_and_grads;
use sentinfo_core::{AdamConfig, AdamState, EmbeddingTable, EncoderConfig, InputSource, Model, ModelConfig};

fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn correlations_match_brute_force_with_ties() {
    let mut r = rng::seeded(11, 0);
    for _ in 0..100 {
        let n = r.random_range(3..60);
        // Coarse grids force ties in both vectors.
        let a: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8)) * 0.5).collect();
        let b: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..12)) - 3.0).collect();
        let (Ok(p), Ok(s)) = (pearson(&a, &b), spearman(&a, &b)) else { continue };
        assert!((p - brute_pearson(&a, &b)).abs() < 1e-12);
        assert!((s - brute_pearson(&brute_ranks(&a), &brute_ranks(&b))).abs() < 1e-12);
    }
}

fn random_sentences(r: &mut SeededRng, vocab: &[String], count: usize, max_len: usize) -> Vec<TokenizedSentence> {
    (0..count)
        .map(|_| {
            let len = r.random_range(1..=max_len);
            TokenizedSentence::new((0..len).map(|_| vocab[r.random_range(0..vocab.len())].clone()).collect()).unwrap()
        })
        .collect()
}

fn vocab() -> Vec<String> {
    (0..7).map(|i| format!("w{i}")).collect()
}

#[test]
fn window_one_encoder_is_affine_relu_then_mean() {
    let vocab = vocab();
    let mut r = rng::seeded(3, 0);
    let cfg = ModelConfig::new(EncoderConfig::new(vec![1], 5, 4).unwrap()).unwrap();
    let table = EmbeddingTable::init_trainable(&vocab, 4, 3).unwrap();
    let mut model = Model::init(cfg, Some(table), 3).unwrap();
    for b in &mut model.encoder.layers[0].bias {
        *b = r.random_range(-0.3..0.3);
    }
    let sentences = random_sentences(&mut r, &vocab, 4, 6);
    let mut batch = Batch::from_sentences(sentences.clone()).unwrap();
    let (_, enc) = model.forward(&mut batch, InputSource::Model).unwrap();

    let layer = &model.encoder.layers[0];
    let table = model.embeddings.as_ref().unwrap();
    for (s, sent) in sentences.iter().enumerate() {
        let mut mean = [0.0; 5];
        for tok in sent.tokens() {
            let h = table.lookup(tok);
            for (f, m) in mean.iter_mut().enumerate() {
                let z: f64 = layer.weight.row(f).iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + layer.bias[f];
                *m += z.max(0.0) / sent.len() as f64;
            }
        }
        for (f, want) in mean.iter().enumerate() {
            assert!((enc.global.get(s, f) - want).abs() < 1e-12);
        }
    }
}

fn random_model(r: &mut SeededRng, vocab: &[String]) -> Model<f64> {
    let seed = r.random();
    let cfg = ModelConfig::new(EncoderConfig::new(vec![1, 3], 3, 4).unwrap()).unwrap();
    let table = EmbeddingTable::init_trainable(vocab, 4, seed).unwrap();
    let mut model = Model::init(cfg, Some(table), seed).unwrap();
    // Widen the range of scores beyond what the initializer gives. Much larger
    // scales push |T| past ~745, where softplus underflows to exactly 0 in f64.
    let scale = 10f64.powf(r.random_range(-1.0..0.5));
    for t in model.tensors_mut() {
        for x in t.iter_mut() {
            *x = *x * scale + r.random_range(-0.1..0.1);
        }
    }
    model
}

#[test]
fn objective_is_strictly_negative_on_random_draws() {
    let vocab = vocab();
    let mut r = rng::seeded(5, 0);
    for _ in 0..1000 {
        let model = random_model(&mut r, &vocab);
        let count = r.random_range(2..6);
        let mut batch = Batch::from_sentences(random_sentences(&mut r, &vocab, count, 5)).unwrap();
        let (_, enc) = model.forward(&mut batch, InputSource::Model).unwrap();
        for norm in [true, false] {
            let res = jsd_batch(&enc, &model.discriminator, norm).unwrap();
            assert!(res.objective < 0.0);
            assert!(res.per_sentence.iter().all(|&v| v < 0.0), "{:?}", res.per_sentence);
        }
    }
}

#[test]
fn zero_discriminator_objective_is_minus_two_ln_two() {
    let vocab = vocab();
    let mut r = rng::seeded(6, 0);
    for _ in 0..20 {
        let mut model = random_model(&mut r, &vocab);
        model.discriminator = DiscriminatorParams::zeros(model.config.rep_dim(), model.config.disc_hidden);
        let mut batch = Batch::from_sentences(random_sentences(&mut r, &vocab, 4, 5)).unwrap();
        let (_, enc) = model.forward(&mut batch, InputSource::Model).unwrap();
        let res = jsd_batch(&enc, &model.discriminator, true).unwrap();
        assert!((res.objective + 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }
}

#[test]
fn one_adam_step_from_zero_discriminator_does_not_lower_objective() {
    let vocab = vocab();
    let mut r = rng::seeded(8, 0);
    for _ in 0..20 {
        let mut model = random_model(&mut r, &vocab);
        model.discriminator = DiscriminatorParams::zeros(model.config.rep_dim(), model.config.disc_hidden);
        let mut batch = Batch::from_sentences(random_sentences(&mut r, &vocab, 4, 5)).unwrap();
        let (before, grads) = ssl_loss_and_grads(&model, &mut batch, InputSource::Model).unwrap();
        let mut state = AdamState::for_model(&model);
        let cfg = AdamConfig { learning_rate: 1e-5, ..AdamConfig::default() };
        adam_step(&mut model, &grads, &mut state, &cfg).unwrap();
        let (after, _) = ssl_loss_and_grads(&model, &mut batch, InputSource::Model).unwrap();
        // Every discriminator gradient is exactly zero here, so only roundoff moves.
        assert!(after.objective >= before.objective - 1e-12, "{} < {}", after.objective, before.objective);
    }
}

#[test]
fn small_adam_step_raises_objective_near_zero_discriminator() {
    let vocab = vocab();
    let mut r = rng::seeded(9, 0);
    for _ in 0..20 {
        let mut model = random_model(&mut r, &vocab);
        let d = &mut model.discriminator;
        for x in d.w1.as_mut_slice().iter_mut().chain(&mut d.u) {
            *x *= 1e-2;
        }
        let mut batch = Batch::from_sentences(random_sentences(&mut r, &vocab, 4, 5)).unwrap();
        let (before, grads) = ssl_loss_and_grads(&model, &mut batch, InputSource::Model).unwrap();
        let mut state = AdamState::for_model(&model);
        let cfg = AdamConfig { learning_rate: 1e-6, ..AdamConfig::default() };
        adam_step(&mut model, &grads, &mut state, &cfg).unwrap();
        let (after, _) = ssl_loss_and_grads(&model, &mut batch, InputSource::Model).unwrap();
        assert!(after.objective > before.objective, "{} <= {}", after.objective, before.objective);
    }
}
