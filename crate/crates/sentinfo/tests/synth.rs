use std::collections::BTreeSet;

use sentinfo::synth::{generate, SynthConfig};

#[test]
fn two_topics_of_one_hundred() {
    let c = generate(&SynthConfig::default()).unwrap();
    assert_eq!(c.sentences.len(), 200);
    assert_eq!(c.labels.iter().filter(|&&l| l == 1).count(), 100);
    let a: BTreeSet<_> = c.vocab[0].iter().collect();
    let b: BTreeSet<_> = c.vocab[1].iter().collect();
    assert!(a.is_disjoint(&b));
    for (s, &l) in c.sentences.iter().zip(&c.labels) {
        let n = s.split(' ').count();
        assert!((5..=12).contains(&n));
        assert!(s.split(' ').all(|w| c.vocab[l].iter().any(|v| v == w)));
    }
}

#[test]
fn same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { seed: 9, ..SynthConfig::default() };
    generate(&cfg).unwrap().write(&dir.path().join("a")).unwrap();
    generate(&cfg).unwrap().write(&dir.path().join("b")).unwrap();
    for f in ["corpus.txt", "labels.tsv", "pairs.tsv"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let other = generate(&SynthConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(other.corpus_text(), generate(&SynthConfig { seed: 9, ..SynthConfig::default() }).unwrap().corpus_text());
}

#[test]
fn pair_scores_follow_overlap() {
    let c = generate(&SynthConfig::default()).unwrap();
    for p in &c.pairs {
        assert!((0.0..=5.0).contains(&p.score));
        if p.a.split(' ').collect::<BTreeSet<_>>() == p.b.split(' ').collect::<BTreeSet<_>>() {
            assert_eq!(p.score, 5.0);
        }
    }
    assert!(c.pairs.iter().any(|p| p.score == 0.0));
    assert!(c.pairs.iter().any(|p| p.score > 2.5));
}

#[test]
fn rejects_tiny_configs() {
    assert!(generate(&SynthConfig { topics: 1, ..SynthConfig::default() }).is_err());
    assert!(generate(&SynthConfig { vocab_per_topic: 5, ..SynthConfig::default() }).is_err());
}
