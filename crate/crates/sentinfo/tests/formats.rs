use std::fs;

use sentinfo::io::{load_contextual, load_corpus, load_labeled, load_scored_pairs, load_static_vectors};
use sentinfo::Error;
use sentinfo_core::Error as CoreError;

fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn corpus_skips_blanks_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "c.txt", b"Hello world\n\nFoo.\n");
    let s = load_corpus(&p, 128).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].tokens(), ["hello", "world"]);
    assert_eq!(s[1].tokens(), ["foo", "."]);
}

#[test]
fn corpus_truncates_long_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "c.txt", b"a b c d e f\n");
    assert_eq!(load_corpus(&p, 4).unwrap()[0].len(), 4);
}

#[test]
fn empty_corpus_is_empty_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "c.txt", b"\n\n");
    assert!(load_corpus(&p, 128).unwrap().is_empty());
}

#[test]
fn invalid_utf8_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "c.txt", b"ok\nfine\nbad \xff here\n");
    match load_corpus(&p, 128) {
        Err(Error::Encoding { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_corpus(&dir.path().join("nope"), 128), Err(Error::Io { .. })));
}

#[test]
fn scored_pairs_and_range_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.tsv", b"4.2\tA man plays.\tA man is playing.\n");
    let pairs = load_scored_pairs(&p, 128).unwrap();
    assert_eq!(pairs[0].score, 4.2);
    let bad = write(&dir, "q.tsv", b"1\ta\tb\n6.1\tx\ty\n");
    match load_scored_pairs(&bad, 128) {
        Err(Error::Data { source: CoreError::Parse { line, .. }, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn labeled_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "l.tsv", b"0\tgood film\n1\tbad film\n");
    let items = load_labeled(&p, 128).unwrap();
    assert_eq!(items[1].label, 1);
    assert_eq!(items[1].sentence.tokens(), ["bad", "film"]);
}

#[test]
fn static_vectors_with_unk_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "v.txt", b"cat 0.1 0.2\ndog -1 2e-1\n");
    let t = load_static_vectors(&p).unwrap();
    assert_eq!(t.d_in(), 2);
    assert_eq!(t.rows(), 3);
    assert_eq!(t.lookup("dog"), [-1.0, 0.2]);
    assert_eq!(t.lookup("emu"), [0.0, 0.0]);
    assert!(!t.trainable());
}

#[test]
fn static_vectors_reject_ragged_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "v.txt", b"cat 0.1 0.2\ndog 1\n");
    assert!(matches!(
        load_static_vectors(&p),
        Err(Error::Data { source: CoreError::DimensionMismatch { expected: 2, found: 1 }, .. })
    ));
    let q = write(&dir, "w.txt", b"cat 0.1 x\n");
    assert!(matches!(load_static_vectors(&q), Err(Error::Data { source: CoreError::Parse { line: 1, .. }, .. })));
}

#[test]
fn contextual_records_in_id_order() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "c.jsonl",
        br#"{"id": 9, "tokens": ["b"], "vectors": [[1.0, 2.0]]}
{"id": 3, "tokens": ["[CLS]", "a", "[SEP]"], "vectors": [[0,0],[1,1],[2,2]]}
"#,
    );
    let store = load_contextual(&p).unwrap();
    assert_eq!(store.d_in(), 2);
    let ids: Vec<u64> = store.sentences().map(|(id, _)| id).collect();
    assert_eq!(ids, [3, 9]);
    assert_eq!(store.get(3).unwrap().len(), 3);
}

#[test]
fn contextual_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[u8]; 3] = [
        br#"{"id": 1, "tokens": ["a"]}"#,
        br#"{"id": 1, "tokens": ["a", "b"], "vectors": [[1, 2], [3]]}"#,
        br#"{"id": 1, "tokens": ["a", "b"], "vectors": [[1, 2]]}"#,
    ];
    for (i, case) in cases.iter().enumerate() {
        let p = write(&dir, &format!("{i}.jsonl"), case);
        assert!(matches!(load_contextual(&p), Err(Error::Data { source: CoreError::Schema(_), .. })), "case {i}");
    }
    let p = write(
        &dir,
        "mixed.jsonl",
        b"{\"id\": 1, \"tokens\": [\"a\"], \"vectors\": [[1, 2]]}\n{\"id\": 2, \"tokens\": [\"b\"], \"vectors\": [[1, 2, 3]]}\n",
    );
    assert!(matches!(
        load_contextual(&p),
        Err(Error::Data { source: CoreError::DimensionMismatch { expected: 2, found: 3 }, .. })
    ));
}
