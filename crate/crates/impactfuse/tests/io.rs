mod common;

use std::fs;

use impactfuse::artifacts::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_lsa, load_tfidf, round_lsa, save_checkpoint, save_lsa,
    save_tfidf,
};
use impactfuse::dataset_io::{load_dataset, write_dataset, DatasetFormat};
use impactfuse::Error;
use impactfuse_core::corpus::{CorpusError, Dataset, Lang, Split};
use impactfuse_core::linalg::CsrMatrix;
use impactfuse_core::lsa::fit_lsa;
use impactfuse_core::mlp::{MlpConfig, MlpModel};
use impactfuse_core::synth::synth_corpus;
use impactfuse_core::tfidf::{fit_tfidf, TfidfConfig};

fn mixed() -> Dataset {
    let mut docs = synth_corpus(4, Lang::En, 60, 1).unwrap().docs().to_vec();
    docs.extend(synth_corpus(3, Lang::Ja, 60, 2).unwrap().docs().iter().cloned());
    docs[0].text = "quotes \" and, commas\nand a newline".into();
    docs[1].label = None;
    Dataset::new(docs).unwrap()
}

#[test]
fn jsonl_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = mixed();
    for name in ["d.jsonl", "d.csv"] {
        let path = dir.path().join(name);
        write_dataset(&ds, &path, None).unwrap();
        let back = load_dataset(&path, None).unwrap();
        assert_eq!(back, ds, "{name}");
        // Serialize the reloaded copy again: identical bytes.
        let again = dir.path().join(format!("again-{name}"));
        write_dataset(&back, &again, None).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }
}

#[test]
fn split_fields_survive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_corpus(10, Lang::Fr, 60, 3).unwrap();
    let split = impactfuse_core::corpus::split_dataset(&ds, Default::default(), 5).unwrap().dataset;
    for fmt in [DatasetFormat::Jsonl, DatasetFormat::Csv] {
        let path = dir.path().join("s.txt");
        write_dataset(&split, &path, Some(fmt)).unwrap();
        let back = load_dataset(&path, Some(fmt)).unwrap();
        assert_eq!(back.split_assignment(), split.split_assignment());
        assert_eq!(back.split_docs(Split::Test).len(), split.split_docs(Split::Test).len());
    }
}

#[test]
fn aliases_resolve_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.jsonl");
    fs::write(
        &path,
        concat!(
            r#"{"id":"1","text":"x","lang":"en","label":"Opportunity"}"#,
            "\n\n",
            r#"{"id":"2","text":"y","lang":"fr","label":"Risk"}"#,
            "\n",
            r#"{"id":"3","text":"z","lang":"zh"}"#,
            "\n"
        ),
    )
    .unwrap();
    let ds = load_dataset(&path, None).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.labeled_count(), 2);
}

#[test]
fn bad_records_name_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(
        &path,
        "{\"id\":\"1\",\"text\":\"x\",\"lang\":\"en\",\"label\":\"Risk\"}\n{\"id\":\"2\",\"text\":\"y\",\"lang\":\"en\",\"label\":\"Maybe\"}\n",
    )
    .unwrap();
    match load_dataset(&path, None) {
        Err(Error::Dataset {
            source: CorpusError::UnmappableLabel { index, label },
            ..
        }) => assert_eq!((index, label.as_str()), (1, "Maybe")),
        other => panic!("{other:?}"),
    }
    fs::write(&path, "{\"id\":\"1\"}\nnot json\n").unwrap();
    assert!(matches!(load_dataset(&path, None), Err(Error::Parse { line: 1, .. })));

    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "id,body,lang,label\n1,x,en,Risk\n").unwrap();
    assert!(matches!(load_dataset(&csv, None), Err(Error::Parse { line: 1, .. })));
    fs::write(&csv, "id,text,lang,label\n1,x,en,Risk\n1,y,en,Risk\n").unwrap();
    assert!(matches!(
        load_dataset(&csv, None),
        Err(Error::Dataset {
            source: CorpusError::DuplicateId { .. },
            ..
        })
    ));
    assert!(load_dataset(&dir.path().join("missing.jsonl"), None).is_err());
}

fn trained_model() -> MlpModel {
    MlpModel::init(MlpConfig {
        input_dim: 7,
        hidden_dims: vec![5, 4],
        seed: 12,
        ..MlpConfig::default()
    })
    .unwrap()
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let m = trained_model();
    save_checkpoint(&m, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config(), m.config());
    let (a, b) = (m.parameters(), back.parameters());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(encode_checkpoint(&back), fs::read(&path).unwrap());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let bytes = encode_checkpoint(&trained_model());
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_checkpoint(&bytes[..20]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_checkpoint(&extra).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(decode_checkpoint(&magic).is_err());
    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(decode_checkpoint(&nan).is_err());
}

#[test]
fn tfidf_and_lsa_reload_identically() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_corpus(20, Lang::En, 200, 4).unwrap();
    let docs: Vec<_> = ds.docs().iter().collect();
    let tfidf = fit_tfidf(docs.iter().copied(), &TfidfConfig::default()).unwrap();
    save_tfidf(&tfidf, &dir.path().join("t.json")).unwrap();
    let t2 = load_tfidf(&dir.path().join("t.json")).unwrap();
    assert_eq!(t2, tfidf);
    for d in &docs {
        assert_eq!(t2.transform(d), tfidf.transform(d));
    }

    let rows = tfidf.transform_all(docs.iter().copied());
    let lsa = round_lsa(&fit_lsa(&CsrMatrix::from_sparse_rows(tfidf.dim(), &rows), 12, 3).unwrap());
    let path = dir.path().join("lsa.emb");
    save_lsa(&lsa, &path).unwrap();
    assert!(dir.path().join("lsa.json").is_file());
    let back = load_lsa(&path).unwrap();
    assert_eq!(back, lsa);
    assert!(back.orthonormality_error() < 1e-6);
}

#[test]
fn hand_built_emb1_bytes_decode() {
    let mut bytes = b"EMB1".to_vec();
    bytes.extend([0x01, 0x00, 0x00]);
    bytes.extend(2u32.to_le_bytes());
    bytes.extend(1u32.to_le_bytes());
    bytes.extend([0x04, 0x00]);
    bytes.extend(b"mini");
    bytes.extend([0x05, 0x00]);
    bytes.extend(b"doc-1");
    bytes.extend([0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.emb");
    fs::write(&path, &bytes).unwrap();
    let t = impactfuse::emb_io::read_table(&path).unwrap();
    assert_eq!((t.model_name(), t.dim(), t.len()), ("mini", 2, 1));
    assert_eq!(t.get("doc-1").unwrap(), &[1.0f32, -2.0]);
    assert_eq!(t.encode(), bytes);
}
