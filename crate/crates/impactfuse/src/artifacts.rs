//! Fitted artifacts on disk: TF-IDF models (JSON), LSA models (EMB1
//! projection table plus JSON sidecar), MLP checkpoints and split files.
//!
//! Checkpoint layout: magic `IFMLP001`, u32 LE header length, a JSON header
//! (`config`, `shapes`, `seed`, `parameter_count`), then every parameter as a
//! little-endian f64. Parameters run layer by layer, weights (input-major)
//! before biases.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use impactfuse_core::corpus::Split;
use impactfuse_core::emb::{EmbeddingTable, TableKind};
use impactfuse_core::linalg::Matrix;
use impactfuse_core::lsa::LsaModel;
use impactfuse_core::mlp::{MlpConfig, MlpModel};
use impactfuse_core::tfidf::TfidfModel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IFMLP001";

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub fn save_tfidf(model: &TfidfModel, path: &Path) -> Result<()> {
    write_json(path, model)
}

pub fn load_tfidf(path: &Path) -> Result<TfidfModel> {
    read_json(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaSidecar {
    pub k: usize,
    pub requested_k: usize,
    pub seed: u64,
    pub vocab_dim: usize,
    pub singular_values: Vec<f64>,
}

/// Sidecar path next to an LSA table: `lsa.emb` -> `lsa.json`.
pub fn lsa_sidecar_path(table_path: &Path) -> std::path::PathBuf {
    table_path.with_extension("json")
}

/// Rounds the components to f32 so a model reloaded from disk is identical
/// to the one that was used in memory.
pub fn round_lsa(model: &LsaModel) -> LsaModel {
    let c = model.components();
    let data = c.data().iter().map(|&v| v as f32 as f64).collect();
    LsaModel::from_parts(
        Matrix::from_vec(c.rows(), c.cols(), data),
        model.singular_values().to_vec(),
        model.requested_k(),
        model.seed(),
    )
    .expect("shape unchanged")
}

pub fn save_lsa(model: &LsaModel, table_path: &Path) -> Result<()> {
    let emb_err = |source| Error::Emb {
        path: table_path.to_path_buf(),
        source,
    };
    let mut table = EmbeddingTable::new("lsa", TableKind::Projection, model.dim() as u32).map_err(emb_err)?;
    for (i, row) in model.components().row_iter().enumerate() {
        table
            .push(&format!("component-{i}"), row.iter().map(|&v| v as f32).collect())
            .map_err(emb_err)?;
    }
    crate::emb_io::write_table(&table, table_path)?;
    write_json(
        &lsa_sidecar_path(table_path),
        &LsaSidecar {
            k: model.k(),
            requested_k: model.requested_k(),
            seed: model.seed(),
            vocab_dim: model.dim(),
            singular_values: model.singular_values().to_vec(),
        },
    )
}

pub fn load_lsa(table_path: &Path) -> Result<LsaModel> {
    let table = crate::emb_io::read_table(table_path)?;
    let sidecar_path = lsa_sidecar_path(table_path);
    let sidecar: LsaSidecar = read_json(&sidecar_path)?;
    let bad = |message: String| Error::Checkpoint {
        path: table_path.to_path_buf(),
        message,
    };
    if table.kind() != TableKind::Projection {
        return Err(bad(format!("expected a projection table, found {:?}", table.kind())));
    }
    if table.len() != sidecar.k || table.dim() != sidecar.vocab_dim {
        return Err(bad(format!(
            "table is {}x{} but sidecar says {}x{}",
            table.len(),
            table.dim(),
            sidecar.k,
            sidecar.vocab_dim
        )));
    }
    let mut data = Vec::with_capacity(sidecar.k * sidecar.vocab_dim);
    for i in 0..sidecar.k {
        let row = table
            .get(&format!("component-{i}"))
            .ok_or_else(|| bad(format!("missing component-{i}")))?;
        data.extend(row.iter().map(|&v| v as f64));
    }
    LsaModel::from_parts(
        Matrix::from_vec(sidecar.k, sidecar.vocab_dim, data),
        sidecar.singular_values,
        sidecar.requested_k,
        sidecar.seed,
    )
    .map_err(|e| bad(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: MlpConfig,
    pub shapes: Vec<(usize, usize)>,
    pub seed: u64,
    pub parameter_count: usize,
}

pub fn encode_checkpoint(model: &MlpModel) -> Vec<u8> {
    let header = CheckpointHeader {
        config: model.config().clone(),
        shapes: model.config().layer_shapes(),
        seed: model.config().seed,
        parameter_count: model.parameter_count(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let params = model.parameters();
    let mut out = Vec::with_capacity(12 + json.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MlpModel, String> {
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err("not an MLP checkpoint".into());
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(format!("header truncated: need {len} bytes, have {}", body.len()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&body[..len]).map_err(|e| format!("bad header: {e}"))?;
    if header.shapes != header.config.layer_shapes() {
        return Err("layer shapes disagree with config".into());
    }
    let raw = &body[len..];
    if raw.len() != 8 * header.parameter_count {
        return Err(format!(
            "expected {} parameter bytes, found {}",
            8 * header.parameter_count,
            raw.len()
        ));
    }
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut model = MlpModel::zeroed(header.config).map_err(|e| e.to_string())?;
    if model.parameter_count() != params.len() {
        return Err("parameter count disagrees with config".into());
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err("non-finite parameter".into());
    }
    model.set_parameters(&params);
    Ok(model)
}

pub fn save_checkpoint(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(Error::io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<MlpModel> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode_checkpoint(&bytes).map_err(|message| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}

pub fn save_splits(splits: &BTreeMap<String, Split>, path: &Path) -> Result<()> {
    write_json(path, splits)
}

pub fn load_splits(path: &Path) -> Result<BTreeMap<String, Split>> {
    read_json(path)
}
