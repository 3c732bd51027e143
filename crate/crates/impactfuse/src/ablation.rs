//! Ablation runs: several fusion combinations over one dataset, one row per
//! combination and language.

use std::fs;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use impactfuse_core::corpus::Lang;
use impactfuse_core::metrics::{render_csv, render_fixed_width, ScoreSummary, TableRow};
use serde::{Deserialize, Serialize};

use crate::artifacts::write_json;
use crate::config::{AblationConfig, ExperimentConfig};
use crate::dataset_io::load_dataset;
use crate::error::{Error, Result};
use crate::pipeline::{run_experiment, ExperimentReport};

pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TXT: &str = "ablation.txt";
pub const ABLATION_CSV: &str = "ablation.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub combo: String,
    pub language: Lang,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// The row's full experiment report: config, seeds and block offsets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ExperimentReport>,
}

impl AblationRow {
    pub fn table_row(&self) -> TableRow {
        match self.scores {
            Some(s) => TableRow::new(&self.combo, self.language.display_name(), s),
            None => TableRow::failed(&self.combo, self.language.display_name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn table_rows(&self) -> Vec<TableRow> {
        self.rows.iter().map(AblationRow::table_row).collect()
    }

    pub fn render(&self) -> String {
        render_fixed_width(&self.table_rows())
    }

    pub fn render_csv(&self) -> String {
        render_csv(&self.table_rows())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.scores.is_none()).count()
    }
}

/// Runs every combination once per language. Rows come out with
/// combinations in the given order and languages in the fixed order
/// en, fr, ja, zh. A failing row is recorded and the rest still run.
///
/// `languages = None` uses every language present in the dataset.
pub fn run_ablation(combos: &[ExperimentConfig], languages: Option<&[Lang]>) -> Result<AblationReport> {
    if combos.len() < 2 {
        return Err(Error::NeedTwoCombos);
    }
    let data_path = combos[0].dataset_path();
    if let Some(c) = combos.iter().find(|c| c.dataset_path() != data_path) {
        return Err(Error::Config(format!(
            "combination `{}` uses a different dataset; an ablation shares one",
            c.display_name()
        )));
    }
    for c in combos {
        c.validate_static()?;
    }
    let langs: Vec<Lang> = match languages {
        Some(ls) => Lang::ALL.into_iter().filter(|l| ls.contains(l)).collect(),
        None => load_dataset(&data_path, combos[0].dataset.format)?.langs(),
    };
    if langs.is_empty() {
        return Err(Error::Config("no languages to evaluate".into()));
    }

    let mut jobs = Vec::new();
    for combo in combos {
        for &lang in &langs {
            let mut cfg = combo.clone();
            cfg.dataset.languages = vec![lang];
            cfg.output_dir = combo.output_dir.join(lang.code());
            jobs.push(cfg);
        }
    }
    let results = run_parallel(&jobs);
    let rows = jobs
        .iter()
        .zip(results)
        .map(|(cfg, res)| {
            let combo = cfg.display_name();
            let language = cfg.dataset.languages[0];
            match res {
                Ok(report) => AblationRow {
                    combo,
                    language,
                    scores: Some(report.evaluation.scores.summary()),
                    error: None,
                    report: Some(report),
                },
                Err(e) => AblationRow {
                    combo,
                    language,
                    scores: None,
                    error: Some(e.to_string()),
                    report: None,
                },
            }
        })
        .collect();
    Ok(AblationReport { rows })
}

/// Runs each job on a small pool of threads. Results keep job order.
fn run_parallel(jobs: &[ExperimentConfig]) -> Vec<Result<ExperimentReport>> {
    let workers = thread::available_parallelism().map_or(1, NonZeroUsize::get).min(jobs.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ExperimentReport>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let res = run_experiment(job);
                *slots[i].lock().expect("slot lock") = Some(res);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// Runs an ablation config and writes the JSON report and both renderings
/// into its output directory.
pub fn run_ablation_config(cfg: &AblationConfig) -> Result<AblationReport> {
    let combos = cfg.experiments()?;
    let langs = (!cfg.dataset.languages.is_empty()).then_some(cfg.dataset.languages.as_slice());
    let report = run_ablation(&combos, langs)?;
    let dir = cfg.output_path();
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    write_json(&dir.join(ABLATION_JSON), &report)?;
    let txt = dir.join(ABLATION_TXT);
    fs::write(&txt, report.render()).map_err(Error::io(&txt))?;
    let csv = dir.join(ABLATION_CSV);
    fs::write(&csv, report.render_csv()).map_err(Error::io(&csv))?;
    Ok(report)
}
