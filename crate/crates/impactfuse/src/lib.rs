//! File formats, the experiment pipeline and the command-line tool built on
//! `impactfuse-core`.

#![forbid(unsafe_code)]

pub mod ablation;
pub mod artifacts;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod emb_io;
pub mod error;
pub mod pipeline;
pub mod reference;

pub use ablation::{run_ablation, run_ablation_config, AblationReport, AblationRow};
pub use config::{AblationConfig, Combo, EmbeddingRef, ExperimentConfig};
pub use error::{Error, Result, Stage};
pub use pipeline::{run_experiment, ExperimentReport};
