//! Core of the `impactfuse` ESG impact-type classifier.
//!
//! Everything in this crate is pure computation over in-memory data and builds
//! without `std` (an allocator is required). File formats, configuration and
//! the command line live in the companion `impactfuse` crate.
//!
//! The pipeline pieces are:
//!
//! - [`corpus`]: documents, the three canonical labels and their aliases,
//!   stratified splitting and a synthetic corpus generator.
//! - [`text`] and [`tfidf`]: tokenization and smoothed TF-IDF vectors.
//! - [`lsa`]: randomized truncated SVD of the TF-IDF matrix.
//! - [`mlp`]: a ReLU feed-forward classifier trained with Adam.
//! - [`emb`]: the `EMB1` interchange format for external embeddings and logits.
//! - [`fusion`]: early (concatenation) and late (logit averaging) fusion.
//! - [`metrics`]: confusion matrices and micro/macro/weighted F1.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod emb;
pub mod fusion;
pub mod linalg;
pub mod lsa;
pub mod metrics;
pub mod mlp;
pub mod synth;
pub mod text;
pub mod tfidf;

mod math;

pub use corpus::{CanonicalLabel, Dataset, Document, Lang, LabelAliasMap, Split};
pub use emb::{EmbeddingTable, TableKind};
pub use fusion::{FeatureBlock, FusionMode, FusionSpec, NormPolicy};
pub use linalg::Matrix;
pub use lsa::LsaModel;
pub use metrics::{ConfusionMatrix, ScoreReport, ScoreSummary};
pub use mlp::{MlpConfig, MlpModel, TrainReport};
pub use tfidf::{SparseVector, TfidfConfig, TfidfModel};
