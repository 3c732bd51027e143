mod common;

use std::fs;

use impactfuse::artifacts::load_tfidf;
use impactfuse::dataset_io::{load_dataset, write_dataset};
use impactfuse::pipeline::{
    evaluate_saved, fit_features, load_inputs, prepare, run_experiment, run_on, Features, SplitSource, LSA_FILE, TFIDF_FILE,
};
use impactfuse::{run_ablation, AblationConfig, Error, ExperimentConfig, Stage};
use impactfuse_core::corpus::{split_dataset, Dataset, Lang, Split};
use impactfuse_core::emb::TableKind;
use impactfuse_core::fusion::FusionSpec;
use impactfuse_core::synth::fake_table;

#[test]
fn poisoned_test_texts_do_not_change_fitted_features() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::write_synthetic(dir.path(), 60, Lang::En, 2, 5.0);
    // Pin the split in the file so both runs see the same assignment.
    let split = split_dataset(&ds, Default::default(), 2).unwrap().dataset;
    write_dataset(&split, &dir.path().join("data.jsonl"), None).unwrap();
    let cfg = common::config(dir.path(), "clean", &["tfidf", "lsa"], 2);
    run_experiment(&cfg).unwrap();

    let mut poisoned = split.clone();
    let test_ids: Vec<String> = poisoned.split_docs(Split::Test).iter().map(|d| d.id.clone()).collect();
    for d in poisoned.docs_mut() {
        if test_ids.contains(&d.id) {
            d.text = "zzzgarbage qqqnoise zzzgarbage xxxjunk".into();
        }
    }
    write_dataset(&poisoned, &dir.path().join("poisoned.jsonl"), None).unwrap();
    let mut cfg2 = common::config(dir.path(), "poisoned", &["tfidf", "lsa"], 2);
    cfg2.dataset.path = "poisoned.jsonl".into();
    run_experiment(&cfg2).unwrap();

    for f in [TFIDF_FILE, LSA_FILE, "lsa.json", "mlp.ckpt"] {
        let a = fs::read(dir.path().join("clean").join(f)).unwrap();
        let b = fs::read(dir.path().join("poisoned").join(f)).unwrap();
        assert!(a == b, "{f} changed when only test texts changed");
    }
    let tfidf = load_tfidf(&dir.path().join("poisoned").join(TFIDF_FILE)).unwrap();
    assert!(tfidf.vocab().index_of("zzzgarbage").is_none());
}

#[test]
fn fit_features_sees_only_what_it_is_given() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 30, Lang::En, 5, 5.0);
    let cfg = common::config(dir.path(), "out", &["tfidf", "lsa"], 5);
    let inputs = load_inputs(&cfg).unwrap();
    let prepared = prepare(&inputs).unwrap();
    assert_eq!(prepared.source, SplitSource::Stratified);
    let train = prepared.docs(Split::Train);
    let Features { tfidf, lsa } = fit_features(&train, &cfg, true).unwrap();
    let tfidf = tfidf.unwrap();
    assert_eq!(tfidf.vocab().n_docs() as usize, train.len());
    assert_eq!(lsa.unwrap().dim(), tfidf.dim());
}

#[test]
fn missing_table_fails_validation_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 10, Lang::En, 1, 5.0);
    let mut cfg = common::config(dir.path(), "out", &["tfidf", common::FAKE], 1);
    cfg.embeddings[0].path = "nowhere.emb".into();
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(&err, Error::Config(m) if m.contains("nowhere.emb")), "{err}");
    assert!(err.is_validation());
    assert!(!dir.path().join("out").exists(), "nothing should be written");
}

#[test]
fn table_missing_documents_names_the_align_stage() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::write_synthetic(dir.path(), 20, Lang::En, 1, 5.0);
    let half = Dataset::new(ds.docs()[..30].to_vec()).unwrap();
    let t = fake_table(&half, "partial", TableKind::Embedding, 4, 5.0, 1).unwrap();
    impactfuse::emb_io::write_table(&t, &dir.path().join("fake.emb")).unwrap();
    let cfg = common::config(dir.path(), "out", &["tfidf", common::FAKE], 1);
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: Stage::Align, .. }), "{err}");
    assert!(err.to_string().starts_with("align stage"));
    assert!(err.is_validation());
}

#[test]
fn empty_vocabulary_names_the_tfidf_stage() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("data.jsonl"),
        (0..30)
            .map(|i| format!("{{\"id\":\"{i}\",\"text\":\"same words\",\"lang\":\"en\",\"label\":\"{}\"}}\n", ["Risk", "Opportunity", "Cannot Distinguish"][i % 3]))
            .collect::<String>(),
    )
    .unwrap();
    let mut cfg = common::config(dir.path(), "out", &["tfidf", "lsa"], 1);
    cfg.embeddings.clear();
    cfg.tfidf.min_df = 1000;
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: Stage::Tfidf, .. }), "{err}");
    assert!(!err.is_validation());
}

#[test]
fn train_then_evaluate_reproduces_scores() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 50, Lang::Fr, 3, 5.0);
    let cfg = common::config(dir.path(), "out", &["tfidf", "lsa", common::FAKE], 3);
    let dev = run_on(&cfg, Split::Dev).unwrap();
    assert_eq!(dev.evaluation.split, Split::Dev);
    let again = evaluate_saved(&cfg, Split::Dev).unwrap();
    assert_eq!(again.scores, dev.evaluation.scores);
    assert_eq!(again.confusion, dev.evaluation.confusion);

    let full = run_experiment(&cfg).unwrap();
    let reloaded = evaluate_saved(&cfg, Split::Test).unwrap();
    assert_eq!(reloaded.scores, full.evaluation.scores);
}

#[test]
fn evaluate_rejects_a_mismatched_split() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 20, Lang::En, 3, 5.0);
    let cfg = common::config(dir.path(), "out", &["tfidf"], 3);
    assert!(matches!(evaluate_saved(&cfg, Split::Test), Err(Error::SplitMismatch(_))));
    run_experiment(&cfg).unwrap();
    // A different corpus under the same file name.
    common::write_synthetic(dir.path(), 25, Lang::En, 4, 5.0);
    let err = evaluate_saved(&cfg, Split::Test).unwrap_err();
    assert!(matches!(err, Error::SplitMismatch(_)), "{err}");
    assert!(err.is_validation());
}

#[test]
fn late_fusion_of_external_logits_needs_no_training() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::write_synthetic(dir.path(), 30, Lang::Zh, 6, 5.0);
    for (name, strength, seed) in [("a", 4.0, 1), ("b", 0.5, 2)] {
        let t = fake_table(&ds, name, TableKind::Logits, 3, strength, seed).unwrap();
        impactfuse::emb_io::write_table(&t, &dir.path().join(format!("{name}.emb"))).unwrap();
    }
    let mut cfg = common::config(dir.path(), "out", &[], 6);
    cfg.embeddings = ["a", "b"]
        .iter()
        .map(|n| impactfuse::EmbeddingRef {
            name: n.to_string(),
            path: format!("{n}.emb").into(),
        })
        .collect();
    cfg.fusion = FusionSpec::late(&["a", "b"], &[]);
    cfg.fusion.weights = Some(vec![3.0, 1.0]);
    let report = run_experiment(&cfg).unwrap();
    assert!(report.training.is_none());
    assert!(!dir.path().join("out/mlp.ckpt").exists());
    assert!(report.evaluation.scores.micro_f1 > 0.8);

    // Embedding tables are not logits.
    cfg.fusion = FusionSpec::late(&[common::FAKE], &[]);
    cfg.embeddings.push(impactfuse::EmbeddingRef {
        name: common::FAKE.into(),
        path: "fake.emb".into(),
    });
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
}

#[test]
fn late_fusion_with_the_mlp_member() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::write_synthetic(dir.path(), 40, Lang::Ja, 8, 5.0);
    let t = fake_table(&ds, "l", TableKind::Logits, 3, 4.0, 3).unwrap();
    impactfuse::emb_io::write_table(&t, &dir.path().join("l.emb")).unwrap();
    let mut cfg = common::config(dir.path(), "out", &[], 8);
    cfg.embeddings.push(impactfuse::EmbeddingRef {
        name: "l".into(),
        path: "l.emb".into(),
    });
    cfg.fusion = FusionSpec::late(&["l", "mlp"], &["tfidf", "lsa"]);
    let report = run_experiment(&cfg).unwrap();
    assert!(report.training.is_some());
    assert_eq!(report.features.offsets.len(), 2);
    assert!(report.evaluation.scores.micro_f1 > 0.8);
}

#[test]
fn report_embeds_config_and_reruns_to_same_scores() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 30, Lang::En, 9, 5.0);
    let cfg = common::config(dir.path(), "out", &["tfidf", common::FAKE], 9);
    let report = run_experiment(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let parsed: impactfuse::ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.evaluation, report.evaluation);
    let mut replay: ExperimentConfig = parsed.config.clone();
    replay.base_dir = dir.path().to_path_buf();
    replay.output_dir = "replay".into();
    assert_eq!(run_experiment(&replay).unwrap().evaluation.scores, report.evaluation.scores);
    assert_eq!(report.features.offsets[0].name, "tfidf");
    assert_eq!(report.features.offsets[1].width, 16);
    let scores = fs::read_to_string(dir.path().join("out/scores.txt")).unwrap();
    assert!(scores.contains("tfidf + fake"));
}

#[test]
fn language_filter_and_split_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut docs = impactfuse_core::synth::synth_corpus(30, Lang::En, 300, 1).unwrap().docs().to_vec();
    docs.extend(impactfuse_core::synth::synth_corpus(30, Lang::Ja, 300, 2).unwrap().docs().iter().cloned());
    let ds = split_dataset(&Dataset::new(docs).unwrap(), Default::default(), 1).unwrap().dataset;
    write_dataset(&ds, &dir.path().join("data.jsonl"), None).unwrap();
    let mut cfg = common::config(dir.path(), "out", &["tfidf"], 1);
    cfg.embeddings.clear();
    cfg.dataset.languages = vec![Lang::Ja];
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.dataset.languages, vec![Lang::Ja]);
    assert_eq!(report.dataset.split_source, SplitSource::File);
    assert_eq!(report.dataset.documents, 90);
    let reloaded = load_dataset(&dir.path().join("data.jsonl"), None).unwrap();
    assert_eq!(reloaded.split_assignment(), ds.split_assignment());
}

#[test]
fn ablation_rows_are_ordered_and_failures_marked() {
    let dir = tempfile::tempdir().unwrap();
    let mut docs = impactfuse_core::synth::synth_corpus(30, Lang::Zh, 300, 1).unwrap().docs().to_vec();
    docs.extend(impactfuse_core::synth::synth_corpus(30, Lang::En, 300, 2).unwrap().docs().iter().cloned());
    let ds = Dataset::new(docs).unwrap();
    write_dataset(&ds, &dir.path().join("data.jsonl"), None).unwrap();
    let t = fake_table(&ds, "fake", TableKind::Embedding, 8, 5.0, 3).unwrap();
    impactfuse::emb_io::write_table(&t, &dir.path().join("fake.emb")).unwrap();

    let ab = r#"
seed = 4
output_dir = "ablation"
[dataset]
path = "data.jsonl"
[lsa]
k = 16
[[embeddings]]
name = "fake"
path = "fake.emb"
[[combos]]
name = "TF-IDF"
fusion = { members = ["tfidf"] }
[[combos]]
name = "TF-IDF + LSA"
fusion = { members = ["tfidf", "lsa"] }
[[combos]]
name = "TF-IDF + LSA + fake"
fusion = { members = ["tfidf", "lsa", "fake"] }
"#;
    fs::write(dir.path().join("ab.toml"), ab).unwrap();
    let cfg = AblationConfig::load(&dir.path().join("ab.toml")).unwrap();
    let report = impactfuse::run_ablation_config(&cfg).unwrap();
    let order: Vec<(String, Lang)> = report.rows.iter().map(|r| (r.combo.clone(), r.language)).collect();
    assert_eq!(
        order,
        [
            ("TF-IDF", Lang::En),
            ("TF-IDF", Lang::Zh),
            ("TF-IDF + LSA", Lang::En),
            ("TF-IDF + LSA", Lang::Zh),
            ("TF-IDF + LSA + fake", Lang::En),
            ("TF-IDF + LSA + fake", Lang::Zh),
        ]
        .map(|(c, l)| (c.to_string(), l))
    );
    assert_eq!(report.failures(), 0);
    for r in &report.rows {
        let s = r.scores.unwrap();
        for v in [s.micro_f1, s.macro_f1, s.weighted_f1] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(r.report.as_ref().unwrap().config.dataset.languages, vec![r.language]);
    }
    let txt = fs::read_to_string(dir.path().join("ablation/ablation.txt")).unwrap();
    assert_eq!(txt, report.render());
    assert!(txt.contains("TF-IDF + LSA + fake  Chinese"));

    // A combination that cannot run is recorded and the rest still run.
    let mut combos = cfg.experiments().unwrap();
    combos[1].tfidf.min_df = 10_000;
    let report = run_ablation(&combos, Some(&[Lang::En])).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows[1].scores.is_none() && report.rows[1].error.is_some());
    assert!(report.rows[0].scores.is_some() && report.rows[2].scores.is_some());
    assert!(report.render().contains("FAILED"));

    assert!(matches!(run_ablation(&combos[..1], None), Err(Error::NeedTwoCombos)));
}

#[test]
fn config_files_resolve_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("configs");
    fs::create_dir(&sub).unwrap();
    common::write_synthetic(dir.path(), 20, Lang::En, 1, 5.0);
    fs::write(
        sub.join("exp.toml"),
        "seed = 1\noutput_dir = \"../runs/a\"\n[dataset]\npath = \"../data.jsonl\"\n[mlp]\nhidden_dims = [16]\nmax_epochs = 5\n[fusion]\nmembers = [\"tfidf\"]\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&sub.join("exp.toml")).unwrap();
    run_experiment(&cfg).unwrap();
    assert!(dir.path().join("runs/a/report.json").is_file());

    let json = serde_json::to_string(&cfg).unwrap();
    fs::write(sub.join("exp.json"), json).unwrap();
    let from_json = ExperimentConfig::load(&sub.join("exp.json")).unwrap();
    assert_eq!(from_json, cfg);
}
