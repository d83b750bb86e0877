use sentinfo::checkpoint::{Checkpoint, MAGIC};
use sentinfo::io::MetricRow;
use sentinfo::Error;
use sentinfo_core::{EmbeddingTable, EncoderConfig, Model, ModelConfig};

fn sample() -> Checkpoint {
    let vocab: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let cfg = ModelConfig::new(EncoderConfig::new(vec![1, 3], 4, 5).unwrap()).unwrap();
    let table = EmbeddingTable::init_trainable(&vocab, 5, 1).unwrap();
    let mut ck = Checkpoint::new(Model::init(cfg, Some(table), 1).unwrap(), "trainable", 1);
    ck.optimizer.step = 3;
    for (i, m) in ck.optimizer.first.iter_mut().flatten().enumerate() {
        *m = i as f32 * 0.5;
    }
    ck.metrics = vec![MetricRow { step: 1, objective: -1.25 }];
    ck.step = 1;
    ck
}

#[test]
fn round_trip_is_bitwise() {
    let ck = sample();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes().unwrap(), bytes);
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    let ck = sample();
    ck.save(&p).unwrap();
    assert_eq!(Checkpoint::load(&p).unwrap(), ck);
}

#[test]
fn static_model_has_no_table() {
    let cfg = ModelConfig::new(EncoderConfig::new(vec![1], 2, 3).unwrap()).unwrap();
    let ck = Checkpoint::new(Model::init(cfg, None, 4).unwrap(), "static", 4);
    let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
    assert!(back.model.embeddings.is_none());
    assert_eq!(back, ck);
}

#[test]
fn corruption_is_rejected() {
    let bytes = sample().to_bytes().unwrap();

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::BadMagic)));
    assert!(matches!(Checkpoint::from_bytes(b""), Err(Error::BadMagic)));

    let mut v2 = bytes.clone();
    v2[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(Checkpoint::from_bytes(&v2), Err(Error::UnsupportedVersion(2))));

    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::CorruptPayload(_))));
    assert!(matches!(Checkpoint::from_bytes(&bytes[..20]), Err(Error::CorruptPayload(_))));
    assert!(matches!(Checkpoint::from_bytes(MAGIC), Err(Error::CorruptPayload(_))));

    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 4]);
    assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::CorruptPayload(_))));

    let mut header = bytes;
    header[17] = b'#';
    assert!(matches!(Checkpoint::from_bytes(&header), Err(Error::CorruptPayload(_))));
}
