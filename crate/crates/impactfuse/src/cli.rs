//! Command-line front end. Exit codes: 0 success, 1 bad input or usage,
//! 2 failure while computing or writing results.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use impactfuse_core::corpus::{Lang, Split};
use impactfuse_core::emb::TableKind;
use impactfuse_core::metrics::render_fixed_width;
use impactfuse_core::synth::{fake_table, synth_corpus};
use serde_json::json;

use crate::ablation::run_ablation_config;
use crate::config::{AblationConfig, ExperimentConfig, LsaSettings, MlpSettings};
use crate::dataset_io::{write_dataset, DatasetFormat};
use crate::emb_io::{read_table, write_table};
use crate::error::{Error, Result};
use crate::pipeline::{evaluate_saved, fit_features_only, run_experiment, run_on};
use crate::reference;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "impactfuse", version, about = "Multilingual ESG impact-type classification with feature fusion")]
pub struct Cli {
    /// Print a JSON document on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus, optionally with a fake embedding table.
    Synth(SynthArgs),
    /// Fit TF-IDF (and LSA) on the train split and save them.
    FitFeatures(RunArgs),
    /// Fit features and the MLP, then score the dev split.
    Train(RunArgs),
    /// Score a split with previously saved artifacts.
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline and score the test split.
    Fuse(RunArgs),
    /// Run every combination of an ablation config, or print the bundled reference tables.
    Ablate(AblateArgs),
    /// Show the header and first rows of an EMB1 file.
    InspectEmb(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmbKindArg {
    Embedding,
    Logits,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub per_class: usize,
    #[arg(long)]
    pub lang: Lang,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub vocab_size: usize,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub format: Option<DatasetFormat>,
    /// Also write a fake table for the corpus here.
    #[arg(long)]
    pub emb_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EmbKindArg::Embedding)]
    pub emb_kind: EmbKindArg,
    #[arg(long, default_value_t = 16)]
    pub emb_dim: usize,
    #[arg(long, default_value_t = 5.0)]
    pub signal: f64,
    #[arg(long, default_value = "fake")]
    pub emb_name: String,
    /// Defaults to the corpus seed plus one.
    #[arg(long)]
    pub emb_seed: Option<u64>,
}

/// Values that replace the config's.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Restrict to these languages (repeatable).
    #[arg(long = "lang")]
    pub langs: Vec<Lang>,
    #[arg(long)]
    pub lsa_k: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "test")]
    pub split: Split,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["config", "reference_tables"])))]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Render the bundled published results instead of running anything.
    #[arg(long)]
    pub reference_tables: bool,
    /// CSV instead of the fixed-width table.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// Rows to show.
    #[arg(long, default_value_t = 3)]
    pub head: usize,
}

fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

struct Shared<'a> {
    seed: &'a mut u64,
    output_dir: &'a mut PathBuf,
    dataset: &'a mut PathBuf,
    langs: &'a mut Vec<Lang>,
    lsa: &'a mut LsaSettings,
    mlp: &'a mut MlpSettings,
}

impl Overrides {
    fn apply(&self, s: Shared<'_>) {
        if let Some(v) = self.seed {
            *s.seed = v;
        }
        if let Some(v) = &self.output_dir {
            *s.output_dir = absolute(v);
        }
        if let Some(v) = &self.dataset {
            *s.dataset = absolute(v);
        }
        if !self.langs.is_empty() {
            *s.langs = self.langs.clone();
        }
        if let Some(v) = self.lsa_k {
            s.lsa.k = Some(v);
        }
        if let Some(v) = self.max_epochs {
            s.mlp.max_epochs = v;
        }
        if let Some(v) = &self.hidden_dims {
            s.mlp.hidden_dims = v.clone();
        }
        if let Some(v) = self.learning_rate {
            s.mlp.learning_rate = v;
        }
    }
}

fn load_experiment(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(&args.config)?;
    args.overrides.apply(Shared {
        seed: &mut c.seed,
        output_dir: &mut c.output_dir,
        dataset: &mut c.dataset.path,
        langs: &mut c.dataset.languages,
        lsa: &mut c.lsa,
        mlp: &mut c.mlp,
    });
    Ok(c)
}

/// What a command prints: text for people, JSON for `--json`.
struct Output {
    text: String,
    json: serde_json::Value,
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn synth(a: &SynthArgs) -> Result<Output> {
    let ds = synth_corpus(a.per_class, a.lang, a.vocab_size, a.seed).map_err(|e| Error::Config(e.to_string()))?;
    write_dataset(&ds, &a.output, a.format)?;
    let mut text = format!("wrote {} documents to {}\n", ds.len(), a.output.display());
    let mut json = json!({ "documents": ds.len(), "path": a.output });
    if let Some(path) = &a.emb_out {
        let kind = match a.emb_kind {
            EmbKindArg::Embedding => TableKind::Embedding,
            EmbKindArg::Logits => TableKind::Logits,
        };
        let seed = a.emb_seed.unwrap_or(a.seed.wrapping_add(1));
        let table = fake_table(&ds, &a.emb_name, kind, a.emb_dim, a.signal, seed).map_err(|source| Error::Emb {
            path: path.clone(),
            source,
        })?;
        write_table(&table, path)?;
        text.push_str(&format!(
            "wrote {} {}-dimensional rows to {}\n",
            table.len(),
            table.dim(),
            path.display()
        ));
        json["embeddings"] = json!({ "path": path, "dim": table.dim(), "records": table.len() });
    }
    Ok(Output { text, json })
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::FitFeatures(a) => {
            let cfg = load_experiment(a)?;
            let (features, files) = fit_features_only(&cfg)?;
            let vocab = features.tfidf.as_ref().map(|t| t.dim());
            let k = features.lsa.as_ref().map(|l| l.k());
            let mut text = format!("tf-idf vocabulary: {}\n", vocab.unwrap_or(0));
            if let Some(k) = k {
                text.push_str(&format!("lsa components: {k}\n"));
            }
            text.push_str(&format!("artifacts in {}\n", cfg.output_path().display()));
            let json = json!({ "tfidf_vocabulary": vocab, "lsa_k": k, "output_dir": cfg.output_path(), "artifacts": files });
            Ok(Output { text, json })
        }
        Command::Train(a) | Command::Fuse(a) => {
            let cfg = load_experiment(a)?;
            let report = if matches!(cli.command, Command::Train(_)) {
                run_on(&cfg, Split::Dev)?
            } else {
                run_experiment(&cfg)?
            };
            let mut text = format!(
                "{} split, {} documents\n",
                report.evaluation.split.name(),
                report.evaluation.documents
            );
            text.push_str(&render_fixed_width(&[report.table_row()]));
            text.push_str(&format!("artifacts in {}\n", cfg.output_path().display()));
            Ok(Output {
                text,
                json: to_value(&report),
            })
        }
        Command::Evaluate(a) => {
            let cfg = load_experiment(&a.run)?;
            let eval = evaluate_saved(&cfg, a.split)?;
            let mut text = format!("{} split, {} documents\n", eval.split.name(), eval.documents);
            text.push_str(&render_fixed_width(&[eval.table_row(&cfg.display_name())]));
            Ok(Output {
                text,
                json: to_value(&eval),
            })
        }
        Command::Ablate(a) => {
            if a.reference_tables {
                let tables = reference::reference_tables();
                let text = if a.csv {
                    tables.iter().map(|t| t.render_csv()).collect::<Vec<_>>().join("\n")
                } else {
                    reference::render_all()
                };
                let json = json!(tables
                    .iter()
                    .map(|t| json!({
                        "id": t.id,
                        "title": t.title,
                        "rows": t.rows.iter().map(|r| to_value(&r.table_row())).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>());
                return Ok(Output { text, json });
            }
            let path = a.config.as_ref().expect("clap enforces the group");
            let mut cfg = AblationConfig::load(path)?;
            a.overrides.apply(Shared {
                seed: &mut cfg.seed,
                output_dir: &mut cfg.output_dir,
                dataset: &mut cfg.dataset.path,
                langs: &mut cfg.dataset.languages,
                lsa: &mut cfg.lsa,
                mlp: &mut cfg.mlp,
            });
            let report = run_ablation_config(&cfg)?;
            let mut text = if a.csv { report.render_csv() } else { report.render() };
            for row in report.rows.iter().filter(|r| r.error.is_some()) {
                text.push_str(&format!(
                    "failed: {} / {}: {}\n",
                    row.combo,
                    row.language.display_name(),
                    row.error.as_deref().unwrap_or_default()
                ));
            }
            Ok(Output {
                text,
                json: to_value(&report),
            })
        }
        Command::InspectEmb(a) => {
            let t = read_table(&a.path)?;
            let mut text = format!(
                "model: {}\nkind: {:?}\ndim: {}\nrecords: {}\n",
                t.model_name(),
                t.kind(),
                t.dim(),
                t.len()
            );
            let mut head = Vec::new();
            for (id, row) in t.rows().take(a.head) {
                let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:.4}")).collect();
                let more = if row.len() > 8 { " ..." } else { "" };
                text.push_str(&format!("{id}: [{}{more}]\n", shown.join(", ")));
                head.push(json!({ "id": id, "vector": row }));
            }
            let json = json!({
                "model_name": t.model_name(),
                "kind": t.kind(),
                "dim": t.dim(),
                "records": t.len(),
                "head": head,
            });
            Ok(Output { text, json })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("json output"));
            } else {
                print!("{}", out.text);
            }
            EXIT_OK
        }
        Err(e) => {
            let validation = e.is_validation();
            if cli.json {
                let kind = if validation { "validation" } else { "runtime" };
                println!("{}", json!({ "error": e.to_string(), "kind": kind }));
            }
            eprintln!("error: {e}");
            if validation {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
