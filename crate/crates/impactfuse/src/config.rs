//! Experiment and ablation configs, read from TOML or JSON.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use impactfuse_core::corpus::{Lang, SplitRatios};
use impactfuse_core::fusion::{FusionMode, FusionSpec, MLP_MEMBER};
use impactfuse_core::mlp::MlpConfig;
use impactfuse_core::tfidf::TfidfConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset_io::DatasetFormat;
use crate::error::{Error, Result};

pub const TFIDF_BLOCK: &str = "tfidf";
pub const LSA_BLOCK: &str = "lsa";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DatasetFormat>,
    /// Used only when the dataset file carries no split assignment.
    #[serde(default)]
    pub split: SplitRatios,
    /// Empty keeps every language.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub languages: Vec<Lang>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsaSettings {
    /// `None` picks the default for the training matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// MLP hyperparameters. Input width and seed come from the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSettings {
    pub hidden_dims: Vec<usize>,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for MlpSettings {
    fn default() -> Self {
        let d = MlpConfig::default();
        MlpSettings {
            hidden_dims: d.hidden_dims,
            l2_lambda: d.l2_lambda,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.patience,
        }
    }
}

impl MlpSettings {
    pub fn to_config(&self, input_dim: usize, seed: u64) -> MlpConfig {
        MlpConfig {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            l2_lambda: self.l2_lambda,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
            ..MlpConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRef {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub tfidf: TfidfConfig,
    #[serde(default)]
    pub lsa: LsaSettings,
    #[serde(default)]
    pub mlp: MlpSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub embeddings: Vec<EmbeddingRef>,
    pub fusion: FusionSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// One ablation row group: a name and a fusion spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Combo {
    pub name: String,
    pub fusion: FusionSpec,
}

/// Shared experiment settings plus the combinations to compare. Every
/// combination runs once per language.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub tfidf: TfidfConfig,
    #[serde(default)]
    pub lsa: LsaSettings,
    #[serde(default)]
    pub mlp: MlpSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub embeddings: Vec<EmbeddingRef>,
    pub combos: Vec<Combo>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
    if is_json {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(path, &text)
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl ExperimentConfig {
    /// Loads `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_config(path)?;
        cfg.base_dir = parent_dir(path);
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve(&self.dataset.path)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.fusion.members.join(" + "))
    }

    /// Checks everything that can be checked without reading data files.
    pub fn validate_static(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.dataset.split.validate().map_err(|e| Error::Config(format!("dataset.split: {e}")))?;
        self.mlp
            .to_config(1, self.seed)
            .validate()
            .map_err(|e| Error::Config(format!("mlp: {e}")))?;
        if self.tfidf.min_df == 0 {
            return bad("tfidf.min_df must be at least 1".into());
        }
        if self.lsa.k == Some(0) {
            return bad("lsa.k must be at least 1".into());
        }
        let mut names = BTreeSet::new();
        for e in &self.embeddings {
            if e.name.is_empty() {
                return bad("embedding names must not be empty".into());
            }
            if [TFIDF_BLOCK, LSA_BLOCK, MLP_MEMBER].contains(&e.name.as_str()) {
                return bad(format!("embedding name `{}` is reserved", e.name));
            }
            if !names.insert(e.name.as_str()) {
                return bad(format!("embedding name `{}` declared twice", e.name));
            }
        }
        let check_blocks = |what: &str, blocks: &[String]| -> Result<()> {
            if blocks.is_empty() {
                return bad(format!("{what} is empty"));
            }
            let mut seen = BTreeSet::new();
            for b in blocks {
                if !seen.insert(b) {
                    return bad(format!("{what} lists `{b}` twice"));
                }
                if b != TFIDF_BLOCK && b != LSA_BLOCK && !names.contains(b.as_str()) {
                    return bad(format!("{what} names unknown block `{b}`"));
                }
            }
            Ok(())
        };
        let f = &self.fusion;
        match f.mode {
            FusionMode::Early => {
                check_blocks("fusion.members", &f.members)?;
                if f.weights.is_some() {
                    return bad("fusion.weights only apply to late fusion".into());
                }
                if !f.mlp_blocks.is_empty() {
                    return bad("fusion.mlp_blocks only apply to late fusion".into());
                }
            }
            FusionMode::Late => {
                if f.members.is_empty() {
                    return bad("fusion.members is empty".into());
                }
                let mut seen = BTreeSet::new();
                for m in &f.members {
                    if !seen.insert(m) {
                        return bad(format!("fusion.members lists `{m}` twice"));
                    }
                    if m != MLP_MEMBER && !names.contains(m.as_str()) {
                        return bad(format!("late fusion member `{m}` is neither `mlp` nor a declared table"));
                    }
                }
                if seen.contains(&MLP_MEMBER.to_string()) {
                    check_blocks("fusion.mlp_blocks", &f.mlp_blocks)?;
                } else if !f.mlp_blocks.is_empty() {
                    return bad("fusion.mlp_blocks given but `mlp` is not a member".into());
                }
                if let Some(w) = &f.weights {
                    if w.len() != f.members.len() {
                        return bad(format!("{} weights for {} members", w.len(), f.members.len()));
                    }
                    if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                        return bad("fusion.weights must be nonnegative with a positive sum".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Blocks whose features must be computed: the early-fusion members or
    /// the late-fusion MLP inputs.
    pub fn feature_blocks(&self) -> &[String] {
        self.fusion.mlp_inputs().unwrap_or(&[])
    }

    pub fn needs_tfidf(&self) -> bool {
        self.feature_blocks().iter().any(|b| b == TFIDF_BLOCK || b == LSA_BLOCK)
    }

    pub fn needs_lsa(&self) -> bool {
        self.feature_blocks().iter().any(|b| b == LSA_BLOCK)
    }
}

/// Directory-safe form of a combination name.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "combo".into()
    } else {
        out
    }
}

impl AblationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: AblationConfig = read_config(path)?;
        cfg.base_dir = parent_dir(path);
        Ok(cfg)
    }

    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    /// One experiment config per combination, in config order, each writing
    /// under its own subdirectory.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        let mut dirs = BTreeSet::new();
        self.combos
            .iter()
            .map(|c| {
                let dir = slug(&c.name);
                if !dirs.insert(dir.clone()) {
                    return Err(Error::Config(format!("combination names collide: `{}`", c.name)));
                }
                Ok(ExperimentConfig {
                    name: Some(c.name.clone()),
                    seed: self.seed,
                    output_dir: self.output_dir.join(dir),
                    dataset: self.dataset.clone(),
                    tfidf: self.tfidf.clone(),
                    lsa: self.lsa.clone(),
                    mlp: self.mlp.clone(),
                    embeddings: self.embeddings.clone(),
                    fusion: c.fusion.clone(),
                    base_dir: self.base_dir.clone(),
                })
            })
            .collect()
    }
}
