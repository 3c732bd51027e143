//! The experiment pipeline: load, split, fit features on the train split,
//! align external tables, fuse, train, evaluate and write artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use impactfuse_core::corpus::{split_dataset, CanonicalLabel, Dataset, Document, Lang, Split, SplitRatios, SplitWarning};
use impactfuse_core::emb::{align_docs, EmbeddingTable, TableKind};
use impactfuse_core::fusion::{
    decide, early_fuse, late_fuse, BlockOffset, BlockSource, FeatureBlock, FusedMatrix, FusionMode, NormPolicy, MLP_MEMBER,
};
use impactfuse_core::linalg::{CsrMatrix, Matrix};
use impactfuse_core::lsa::{default_k, fit_lsa, LsaModel};
use impactfuse_core::metrics::{confusion, ConfusionMatrix, ScoreReport, TableRow};
use impactfuse_core::mlp::{train, LabeledSet, MlpModel, TrainReport};
use impactfuse_core::tfidf::{fit_tfidf, SparseVector, TfidfModel};
use serde::{Deserialize, Serialize};

use crate::artifacts;
use crate::config::{ExperimentConfig, LSA_BLOCK, TFIDF_BLOCK};
use crate::dataset_io::load_dataset;
use crate::emb_io::read_table;
use crate::error::{Error, Result, Stage};

pub const REPORT_FILE: &str = "report.json";
pub const SCORES_TXT: &str = "scores.txt";
pub const SCORES_CSV: &str = "scores.csv";
pub const TFIDF_FILE: &str = "tfidf.json";
pub const LSA_FILE: &str = "lsa.emb";
pub const LSA_SIDECAR: &str = "lsa.json";
pub const CHECKPOINT_FILE: &str = "mlp.ckpt";
pub const SPLITS_FILE: &str = "splits.json";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A config whose files have been read and cross-checked.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub tables: BTreeMap<String, EmbeddingTable>,
}

/// Validates the config and reads every input file. Nothing is fitted here,
/// so a bad config fails before any compute.
pub fn load_inputs(config: &ExperimentConfig) -> Result<Inputs> {
    config.validate_static()?;
    let data_path = config.dataset_path();
    if !data_path.is_file() {
        return Err(Error::Config(format!("dataset file {} does not exist", data_path.display())));
    }
    for e in &config.embeddings {
        let p = config.resolve(&e.path);
        if !p.is_file() {
            return Err(Error::Config(format!("embedding table `{}`: {} does not exist", e.name, p.display())));
        }
    }
    let mut tables = BTreeMap::new();
    for e in &config.embeddings {
        let table = read_table(&config.resolve(&e.path))?;
        tables.insert(e.name.clone(), table);
    }
    let used_as_features = config.feature_blocks();
    for (name, table) in &tables {
        if used_as_features.contains(name) && table.kind() == TableKind::Projection {
            return Err(Error::Config(format!("table `{name}` holds a projection, not per-document rows")));
        }
        if config.fusion.mode == FusionMode::Late && config.fusion.members.contains(name) && table.kind() != TableKind::Logits {
            return Err(Error::Config(format!("late fusion member `{name}` is not a logits table")));
        }
    }
    let dataset = load_dataset(&data_path, config.dataset.format)?;
    Ok(Inputs {
        config: config.clone(),
        dataset,
        tables,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSource {
    /// Taken from the dataset file's `split` fields.
    File,
    /// Seeded stratified split.
    Stratified,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub source: SplitSource,
    pub warnings: Vec<SplitWarning>,
}

impl Prepared {
    pub fn docs(&self, split: Split) -> Vec<&Document> {
        self.dataset.split_docs(split)
    }
}

/// Applies the language filter and assigns splits.
pub fn prepare(inputs: &Inputs) -> Result<Prepared> {
    let cfg = &inputs.config;
    let ds = if cfg.dataset.languages.is_empty() {
        inputs.dataset.clone()
    } else {
        inputs.dataset.filter_langs(&cfg.dataset.languages)
    };
    if ds.is_empty() {
        return Err(Error::Config("no documents left after the language filter".into()));
    }
    let prepared = if ds.has_splits() {
        Prepared {
            dataset: ds,
            source: SplitSource::File,
            warnings: Vec::new(),
        }
    } else {
        let out = split_dataset(&ds, cfg.dataset.split, cfg.seed).map_err(Error::stage(Stage::Split))?;
        Prepared {
            dataset: out.dataset,
            source: SplitSource::Stratified,
            warnings: out.warnings,
        }
    };
    for split in [Split::Train, Split::Test] {
        if prepared.docs(split).is_empty() {
            return Err(Error::Config(format!("the {} split is empty", split.name())));
        }
    }
    Ok(prepared)
}

/// Fitted feature extractors. Both are fitted from train rows only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Features {
    pub tfidf: Option<TfidfModel>,
    pub lsa: Option<LsaModel>,
}

/// Fits TF-IDF and, when asked, LSA. Only the documents passed in are seen,
/// and the pipeline passes the train split.
pub fn fit_features(train_docs: &[&Document], cfg: &ExperimentConfig, with_lsa: bool) -> Result<Features> {
    let tfidf = fit_tfidf(train_docs.iter().copied(), &cfg.tfidf).map_err(Error::stage(Stage::Tfidf))?;
    let lsa = if with_lsa {
        let rows = tfidf.transform_all(train_docs.iter().copied());
        let matrix = CsrMatrix::from_sparse_rows(tfidf.dim(), &rows);
        let max = matrix.rows().min(matrix.cols());
        let k = cfg.lsa.k.unwrap_or_else(|| default_k(matrix.rows(), matrix.cols())).min(max);
        let model = fit_lsa(&matrix, k, cfg.seed).map_err(Error::stage(Stage::Lsa))?;
        Some(artifacts::round_lsa(&model))
    } else {
        None
    };
    Ok(Features { tfidf: Some(tfidf), lsa })
}

fn labels(docs: &[&Document]) -> Vec<CanonicalLabel> {
    docs.iter().map(|d| d.label.expect("split documents are labeled")).collect()
}

/// Builds the named blocks for `docs` and concatenates them.
pub fn fused_features(
    blocks: &[String],
    docs: &[&Document],
    features: &Features,
    tables: &BTreeMap<String, EmbeddingTable>,
    norm: NormPolicy,
) -> Result<FusedMatrix> {
    let mut tfidf_rows: Option<Vec<SparseVector>> = None;
    let mut out = Vec::with_capacity(blocks.len());
    for name in blocks {
        let block = match name.as_str() {
            TFIDF_BLOCK | LSA_BLOCK => {
                let tfidf = features.tfidf.as_ref().expect("tf-idf fitted when a block needs it");
                let rows = tfidf_rows.get_or_insert_with(|| tfidf.transform_all(docs.iter().copied()));
                if name == TFIDF_BLOCK {
                    FeatureBlock::sparse(name, tfidf.dim(), rows.clone(), norm)
                } else {
                    let lsa = features.lsa.as_ref().expect("lsa fitted when a block needs it");
                    let m = lsa.project_all(rows).map_err(Error::stage(Stage::Lsa))?;
                    FeatureBlock::dense(name, BlockSource::Lsa, m, norm)
                }
            }
            other => {
                let m = align_docs(&tables[other], docs.iter().map(|d| d.id.as_str())).map_err(Error::stage(Stage::Align))?;
                FeatureBlock::dense(name, BlockSource::External(other.to_string()), m, norm)
            }
        };
        out.push(block);
    }
    early_fuse(&out).map_err(Error::stage(Stage::Fusion))
}

/// Everything fitted on the train split.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub prepared: Prepared,
    pub features: Features,
    pub model: Option<MlpModel>,
    pub training: Option<TrainReport>,
    pub offsets: Vec<BlockOffset>,
}

pub fn fit_all(inputs: &Inputs) -> Result<Fitted> {
    let cfg = &inputs.config;
    let prepared = prepare(inputs)?;
    let train_docs = prepared.docs(Split::Train);
    let features = if cfg.needs_tfidf() {
        fit_features(&train_docs, cfg, cfg.needs_lsa())?
    } else {
        Features::default()
    };
    let (mut model, mut training, mut offsets) = (None, None, Vec::new());
    if let Some(blocks) = cfg.fusion.mlp_inputs() {
        let dev_docs = prepared.docs(Split::Dev);
        if dev_docs.is_empty() {
            return Err(Error::Config("the dev split is empty; early stopping needs it".into()));
        }
        let x_train = fused_features(blocks, &train_docs, &features, &inputs.tables, cfg.fusion.norm)?;
        let x_dev = fused_features(blocks, &dev_docs, &features, &inputs.tables, cfg.fusion.norm)?;
        let (y_train, y_dev) = (labels(&train_docs), labels(&dev_docs));
        let mlp_cfg = cfg.mlp.to_config(x_train.matrix.cols(), cfg.seed);
        let init = MlpModel::init(mlp_cfg).map_err(Error::stage(Stage::Train))?;
        let train_set = LabeledSet::new(&x_train.matrix, &y_train).map_err(Error::stage(Stage::Train))?;
        let dev_set = LabeledSet::new(&x_dev.matrix, &y_dev).map_err(Error::stage(Stage::Train))?;
        let (best, report) = train(init, train_set, dev_set).map_err(Error::stage(Stage::Train))?;
        model = Some(best);
        training = Some(report);
        offsets = x_train.offsets;
    }
    Ok(Fitted {
        prepared,
        features,
        model,
        training,
        offsets,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub split: Split,
    pub languages: Vec<Lang>,
    pub documents: usize,
    pub confusion: ConfusionMatrix,
    pub scores: ScoreReport,
}

/// Predicts every document of `split` and scores the predictions.
pub fn evaluate_split(
    config: &ExperimentConfig,
    prepared: &Prepared,
    features: &Features,
    model: Option<&MlpModel>,
    tables: &BTreeMap<String, EmbeddingTable>,
    split: Split,
) -> Result<Evaluation> {
    let docs = prepared.docs(split);
    if docs.is_empty() {
        return Err(Error::SplitMismatch(format!("the {} split has no documents", split.name())));
    }
    let fusion = &config.fusion;
    let mlp_logits = || -> Result<Matrix> {
        let model = model.expect("mlp trained when fusion uses it");
        let blocks = fusion.mlp_inputs().expect("mlp inputs declared");
        let x = fused_features(blocks, &docs, features, tables, fusion.norm)?;
        model.predict_logits(&x.matrix).map_err(Error::stage(Stage::Evaluate))
    };
    let preds = match fusion.mode {
        FusionMode::Early => {
            let logits = mlp_logits()?;
            decide(&logits).map_err(Error::stage(Stage::Evaluate))?
        }
        FusionMode::Late => {
            let mut members = Vec::with_capacity(fusion.members.len());
            for m in &fusion.members {
                if m == MLP_MEMBER {
                    members.push(mlp_logits()?);
                } else {
                    members.push(align_docs(&tables[m], docs.iter().map(|d| d.id.as_str())).map_err(Error::stage(Stage::Align))?);
                }
            }
            let refs: Vec<&Matrix> = members.iter().collect();
            let fused = late_fuse(&refs, fusion.weights.as_deref()).map_err(Error::stage(Stage::Fusion))?;
            decide(&fused).map_err(Error::stage(Stage::Fusion))?
        }
    };
    let cm = confusion(&preds, &labels(&docs)).map_err(Error::stage(Stage::Evaluate))?;
    Ok(Evaluation {
        split,
        languages: prepared.dataset.langs(),
        documents: docs.len(),
        scores: cm.scores(),
        confusion: cm,
    })
}

impl Evaluation {
    pub fn table_row(&self, name: &str) -> TableRow {
        TableRow::new(name, &language_label(&self.languages), self.scores.summary())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: PathBuf,
    pub documents: usize,
    pub languages: Vec<Lang>,
    pub split_source: SplitSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratios: Option<SplitRatios>,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub warnings: Vec<SplitWarning>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaSummary {
    pub requested_k: usize,
    pub k: usize,
    pub seed: u64,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub name: String,
    pub model_name: String,
    pub kind: TableKind,
    pub dim: usize,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tfidf_vocabulary: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lsa: Option<LsaSummary>,
    pub tables: Vec<TableSummary>,
    /// Column ranges of the MLP input blocks.
    pub offsets: Vec<BlockOffset>,
}

/// Everything needed to re-run an experiment and compare its scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// Unix seconds. Left out of [`canonical_json`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_at: Option<u64>,
    pub name: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub dataset: DatasetSummary,
    pub features: FeatureSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainReport>,
    pub evaluation: Evaluation,
    pub artifacts: Vec<String>,
}

impl ExperimentReport {
    pub fn table_row(&self) -> TableRow {
        self.evaluation.table_row(&self.name)
    }
}

/// Display name for a set of languages: one language by name, several
/// joined with `/`.
pub fn language_label(langs: &[Lang]) -> String {
    langs.iter().map(|l| l.display_name()).collect::<Vec<_>>().join("/")
}

/// Report bytes with every `created_at` field removed, for comparing runs.
/// Works on experiment and ablation reports alike.
pub fn canonical_json(report_bytes: &[u8]) -> serde_json::Result<String> {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(obj) => {
                obj.remove("created_at");
                obj.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_slice(report_bytes)?;
    strip(&mut v);
    serde_json::to_string_pretty(&v)
}

fn summarize(inputs: &Inputs, fitted: &Fitted) -> (DatasetSummary, FeatureSummary) {
    let cfg = &inputs.config;
    let p = &fitted.prepared;
    let dataset = DatasetSummary {
        path: cfg.dataset.path.clone(),
        documents: p.dataset.len(),
        languages: p.dataset.langs(),
        split_source: p.source,
        ratios: (p.source == SplitSource::Stratified).then_some(cfg.dataset.split),
        train: p.docs(Split::Train).len(),
        dev: p.docs(Split::Dev).len(),
        test: p.docs(Split::Test).len(),
        warnings: p.warnings.clone(),
    };
    let features = FeatureSummary {
        tfidf_vocabulary: fitted.features.tfidf.as_ref().map(|t| t.dim()),
        lsa: fitted.features.lsa.as_ref().map(|l| LsaSummary {
            requested_k: l.requested_k(),
            k: l.k(),
            seed: l.seed(),
            singular_values: l.singular_values().to_vec(),
        }),
        tables: inputs
            .tables
            .iter()
            .map(|(name, t)| TableSummary {
                name: name.clone(),
                model_name: t.model_name().to_string(),
                kind: t.kind(),
                dim: t.dim(),
                records: t.len(),
            })
            .collect(),
        offsets: fitted.offsets.clone(),
    };
    (dataset, features)
}

/// Writes the fitted artifacts and returns their file names.
pub fn write_artifacts(dir: &Path, fitted: &Fitted) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut written = Vec::new();
    artifacts::save_splits(fitted.prepared.dataset.split_assignment(), &dir.join(SPLITS_FILE))?;
    written.push(SPLITS_FILE.to_string());
    if let Some(t) = &fitted.features.tfidf {
        artifacts::save_tfidf(t, &dir.join(TFIDF_FILE))?;
        written.push(TFIDF_FILE.to_string());
    }
    if let Some(l) = &fitted.features.lsa {
        artifacts::save_lsa(l, &dir.join(LSA_FILE))?;
        written.push(LSA_FILE.to_string());
        written.push(LSA_SIDECAR.to_string());
    }
    if let Some(m) = &fitted.model {
        artifacts::save_checkpoint(m, &dir.join(CHECKPOINT_FILE))?;
        written.push(CHECKPOINT_FILE.to_string());
    }
    Ok(written)
}

fn now() -> Option<u64> {
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn build_report(inputs: &Inputs, fitted: &Fitted, evaluation: Evaluation, artifacts: Vec<String>) -> ExperimentReport {
    let (dataset, features) = summarize(inputs, fitted);
    ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        created_at: now(),
        name: inputs.config.display_name(),
        config: inputs.config.clone(),
        seed: inputs.config.seed,
        dataset,
        features,
        training: fitted.training.clone(),
        evaluation,
        artifacts,
    }
}

fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    artifacts::write_json(&dir.join(REPORT_FILE), report)?;
    let rows = [report.table_row()];
    let txt = dir.join(SCORES_TXT);
    fs::write(&txt, impactfuse_core::metrics::render_fixed_width(&rows)).map_err(Error::io(&txt))?;
    let csv = dir.join(SCORES_CSV);
    fs::write(&csv, impactfuse_core::metrics::render_csv(&rows)).map_err(Error::io(&csv))
}

/// Fits on train, evaluates on `split` and writes artifacts plus the report.
pub fn run_on(config: &ExperimentConfig, split: Split) -> Result<ExperimentReport> {
    let inputs = load_inputs(config)?;
    let fitted = fit_all(&inputs)?;
    let evaluation = evaluate_split(config, &fitted.prepared, &fitted.features, fitted.model.as_ref(), &inputs.tables, split)?;
    let dir = config.output_path();
    let mut files = write_artifacts(&dir, &fitted)?;
    files.extend([REPORT_FILE, SCORES_TXT, SCORES_CSV].map(String::from));
    let report = build_report(&inputs, &fitted, evaluation, files);
    write_report(&dir, &report)?;
    Ok(report)
}

/// The full pipeline, scored on the test split.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_on(config, Split::Test)
}

/// Fits TF-IDF and LSA on the train split and writes them with the split file.
pub fn fit_features_only(config: &ExperimentConfig) -> Result<(Features, Vec<String>)> {
    let inputs = load_inputs(config)?;
    let prepared = prepare(&inputs)?;
    let train_docs = prepared.docs(Split::Train);
    let features = fit_features(&train_docs, config, config.needs_lsa() || config.lsa.k.is_some())?;
    let fitted = Fitted {
        prepared,
        features,
        model: None,
        training: None,
        offsets: Vec::new(),
    };
    let files = write_artifacts(&config.output_path(), &fitted)?;
    Ok((fitted.features, files))
}

/// Reloads saved artifacts and scores `split` with them.
///
/// The split file written at training time must agree with the dataset:
/// same documents, same assignment. Anything else is a split mismatch.
pub fn evaluate_saved(config: &ExperimentConfig, split: Split) -> Result<Evaluation> {
    let inputs = load_inputs(config)?;
    let dir = config.output_path();
    let splits_path = dir.join(SPLITS_FILE);
    if !splits_path.is_file() {
        return Err(Error::SplitMismatch(format!("no split file at {}; train first", splits_path.display())));
    }
    let saved = artifacts::load_splits(&splits_path)?;
    let ds = if config.dataset.languages.is_empty() {
        inputs.dataset.clone()
    } else {
        inputs.dataset.filter_langs(&config.dataset.languages)
    };
    if ds.has_splits() && ds.split_assignment() != &saved {
        return Err(Error::SplitMismatch("the dataset's split fields differ from the saved split".into()));
    }
    let labeled: Vec<&str> = ds.docs().iter().filter(|d| d.label.is_some()).map(|d| d.id.as_str()).collect();
    if let Some(id) = saved.keys().find(|id| ds.docs().iter().all(|d| &d.id != *id)) {
        return Err(Error::SplitMismatch(format!("saved split names document `{id}` which the dataset lacks")));
    }
    if let Some(id) = labeled.iter().find(|id| !saved.contains_key(**id)) {
        return Err(Error::SplitMismatch(format!("labeled document `{id}` is missing from the saved split")));
    }
    let dataset = ds
        .with_splits(saved)
        .map_err(|e| Error::SplitMismatch(e.to_string()))?;
    let prepared = Prepared {
        dataset,
        source: SplitSource::File,
        warnings: Vec::new(),
    };
    let tfidf = config
        .needs_tfidf()
        .then(|| artifacts::load_tfidf(&dir.join(TFIDF_FILE)))
        .transpose()?;
    let lsa = config.needs_lsa().then(|| artifacts::load_lsa(&dir.join(LSA_FILE))).transpose()?;
    let model = config
        .fusion
        .mlp_inputs()
        .map(|_| artifacts::load_checkpoint(&dir.join(CHECKPOINT_FILE)))
        .transpose()?;
    let features = Features { tfidf, lsa };
    evaluate_split(config, &prepared, &features, model.as_ref(), &inputs.tables, split)
}
