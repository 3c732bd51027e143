#![allow(dead_code)]

use std::path::{Path, PathBuf};

use impactfuse::config::{DatasetConfig, EmbeddingRef, LsaSettings, MlpSettings};
use impactfuse::dataset_io::write_dataset;
use impactfuse::emb_io::write_table;
use impactfuse::ExperimentConfig;
use impactfuse_core::corpus::{Dataset, Lang, SplitRatios};
use impactfuse_core::emb::TableKind;
use impactfuse_core::fusion::FusionSpec;
use impactfuse_core::synth::{fake_table, synth_corpus};
use impactfuse_core::tfidf::TfidfConfig;

pub const FAKE: &str = "fake";

/// Writes `data.jsonl` and a 16-dimensional fake table `fake.emb` into `dir`.
pub fn write_synthetic(dir: &Path, per_class: usize, lang: Lang, seed: u64, signal: f64) -> Dataset {
    let ds = synth_corpus(per_class, lang, 500, seed).unwrap();
    write_dataset(&ds, &dir.join("data.jsonl"), None).unwrap();
    let table = fake_table(&ds, FAKE, TableKind::Embedding, 16, signal, seed + 1000).unwrap();
    write_table(&table, &dir.join("fake.emb")).unwrap();
    ds
}

pub fn config(dir: &Path, out: &str, members: &[&str], seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: None,
        seed,
        output_dir: PathBuf::from(out),
        dataset: DatasetConfig {
            path: "data.jsonl".into(),
            format: None,
            split: SplitRatios::default(),
            languages: Vec::new(),
        },
        tfidf: TfidfConfig::default(),
        lsa: LsaSettings { k: Some(64) },
        mlp: MlpSettings::default(),
        embeddings: vec![EmbeddingRef {
            name: FAKE.into(),
            path: "fake.emb".into(),
        }],
        fusion: FusionSpec::early(members),
        base_dir: dir.to_path_buf(),
    }
}
