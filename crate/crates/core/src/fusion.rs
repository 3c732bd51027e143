//! Early fusion (row-normalized block concatenation ahead of the MLP) and
//! late fusion (weighted mean of per-model logits, then argmax).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CanonicalLabel;
use crate::linalg::Matrix;
use crate::math;
use crate::tfidf::SparseVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("nothing to fuse")]
    NoInputs,
    #[error("block {name:?} has {got} rows, expected {expected}")]
    RowMismatch { name: String, expected: usize, got: usize },
    #[error("duplicate block name {0:?}")]
    DuplicateName(String),
    #[error("logits table {index} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{weights} weights for {tables} tables")]
    WeightCount { weights: usize, tables: usize },
    #[error("weights must be finite, nonnegative and not all zero")]
    BadWeights,
    #[error("non-finite logit in row {0}")]
    NonFinite(usize),
    #[error("logits must have 3 columns, got {0}")]
    NotThreeClasses(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPolicy {
    #[default]
    L2PerRow,
    None,
}

/// Where a block's features come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSource {
    Tfidf,
    Lsa,
    External(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockData {
    Dense(Matrix),
    /// Densified row by row during fusion.
    Sparse { dim: usize, rows: Vec<SparseVector> },
}

impl BlockData {
    pub fn rows(&self) -> usize {
        match self {
            BlockData::Dense(m) => m.rows(),
            BlockData::Sparse { rows, .. } => rows.len(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            BlockData::Dense(m) => m.cols(),
            BlockData::Sparse { dim, .. } => *dim,
        }
    }

    fn write_row(&self, i: usize, out: &mut [f64]) {
        match self {
            BlockData::Dense(m) => out.copy_from_slice(m.row(i)),
            BlockData::Sparse { rows, .. } => {
                out.fill(0.0);
                for &(j, v) in rows[i].entries() {
                    out[j] = v;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    pub name: String,
    pub source: BlockSource,
    pub data: BlockData,
    pub norm: NormPolicy,
}

impl FeatureBlock {
    pub fn dense(name: &str, source: BlockSource, matrix: Matrix, norm: NormPolicy) -> Self {
        FeatureBlock {
            name: name.into(),
            source,
            data: BlockData::Dense(matrix),
            norm,
        }
    }

    pub fn sparse(name: &str, dim: usize, rows: Vec<SparseVector>, norm: NormPolicy) -> Self {
        FeatureBlock {
            name: name.into(),
            source: BlockSource::Tfidf,
            data: BlockData::Sparse { dim, rows },
            norm,
        }
    }
}

/// Column range a block occupies in the fused matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockOffset {
    pub name: String,
    pub start: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedMatrix {
    pub matrix: Matrix,
    pub offsets: Vec<BlockOffset>,
}

impl FusedMatrix {
    pub fn offset_of(&self, name: &str) -> Option<&BlockOffset> {
        self.offsets.iter().find(|o| o.name == name)
    }
}

/// Concatenates blocks in order, L2-normalizing each block's rows where its
/// policy asks for it. All-zero rows stay zero.
pub fn early_fuse(blocks: &[FeatureBlock]) -> Result<FusedMatrix, FusionError> {
    let first = blocks.first().ok_or(FusionError::NoInputs)?;
    let n = first.data.rows();
    let mut offsets: Vec<BlockOffset> = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for b in blocks {
        if b.data.rows() != n {
            return Err(FusionError::RowMismatch {
                name: b.name.clone(),
                expected: n,
                got: b.data.rows(),
            });
        }
        if offsets.iter().any(|o| o.name == b.name) {
            return Err(FusionError::DuplicateName(b.name.clone()));
        }
        offsets.push(BlockOffset {
            name: b.name.clone(),
            start,
            width: b.data.width(),
        });
        start += b.data.width();
    }
    let mut matrix = Matrix::zeros(n, start);
    for i in 0..n {
        let row = matrix.row_mut(i);
        for (b, off) in blocks.iter().zip(&offsets) {
            let seg = &mut row[off.start..off.start + off.width];
            b.data.write_row(i, seg);
            if b.norm == NormPolicy::L2PerRow {
                let norm = math::norm2(seg);
                if norm > 0.0 {
                    for v in seg.iter_mut() {
                        *v /= norm;
                    }
                }
            }
        }
    }
    Ok(FusedMatrix { matrix, offsets })
}

/// Elementwise weighted mean `sum(w_i * L_i) / sum(w_i)` of `n x 3` logit
/// matrices. `weights = None` means equal weights.
pub fn late_fuse(tables: &[&Matrix], weights: Option<&[f64]>) -> Result<Matrix, FusionError> {
    let first = tables.first().ok_or(FusionError::NoInputs)?;
    let shape = first.shape();
    if shape.1 != CanonicalLabel::COUNT {
        return Err(FusionError::NotThreeClasses(shape.1));
    }
    for (index, t) in tables.iter().enumerate() {
        if t.shape() != shape {
            return Err(FusionError::ShapeMismatch {
                index,
                expected: shape,
                got: t.shape(),
            });
        }
    }
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = alloc::vec![1.0; tables.len()];
            &ones
        }
    };
    if w.len() != tables.len() {
        return Err(FusionError::WeightCount {
            weights: w.len(),
            tables: tables.len(),
        });
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(FusionError::BadWeights);
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(FusionError::BadWeights);
    }
    if tables.len() == 1 {
        return Ok((*first).clone());
    }
    let mut out = Matrix::zeros(shape.0, shape.1);
    for i in 0..shape.0 {
        let row = out.row_mut(i);
        for (t, &wt) in tables.iter().zip(w) {
            for (o, &x) in row.iter_mut().zip(t.row(i)) {
                *o += wt * x;
            }
        }
        for o in row.iter_mut() {
            *o /= total;
        }
    }
    Ok(out)
}

/// Row-wise argmax with ties going to the lowest label code.
pub fn decide(fused: &Matrix) -> Result<Vec<CanonicalLabel>, FusionError> {
    if fused.cols() != CanonicalLabel::COUNT {
        return Err(FusionError::NotThreeClasses(fused.cols()));
    }
    fused
        .row_iter()
        .enumerate()
        .map(|(i, row)| CanonicalLabel::argmax(row).ok_or(FusionError::NonFinite(i)))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    #[default]
    Early,
    Late,
}

/// Name of the late-fusion member backed by the pipeline's own MLP.
pub const MLP_MEMBER: &str = "mlp";

/// Declares which blocks (early) or logit sources (late) are fused, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    #[serde(default)]
    pub mode: FusionMode,
    /// Early: block names (`tfidf`, `lsa` or an external table name).
    /// Late: logit sources (`mlp` or an external logits table name).
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub norm: NormPolicy,
    /// Blocks feeding the `mlp` member in late mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mlp_blocks: Vec<String>,
}

impl FusionSpec {
    pub fn early<S: AsRef<str>>(members: &[S]) -> Self {
        FusionSpec {
            mode: FusionMode::Early,
            members: members.iter().map(|s| String::from(s.as_ref())).collect(),
            weights: None,
            norm: NormPolicy::L2PerRow,
            mlp_blocks: Vec::new(),
        }
    }

    pub fn late<S: AsRef<str>>(members: &[S], mlp_blocks: &[S]) -> Self {
        FusionSpec {
            mode: FusionMode::Late,
            members: members.iter().map(|s| String::from(s.as_ref())).collect(),
            weights: None,
            norm: NormPolicy::L2PerRow,
            mlp_blocks: mlp_blocks.iter().map(|s| String::from(s.as_ref())).collect(),
        }
    }

    /// Blocks the pipeline's MLP is trained on, if it trains one.
    pub fn mlp_inputs(&self) -> Option<&[String]> {
        match self.mode {
            FusionMode::Early => Some(&self.members),
            FusionMode::Late if self.members.iter().any(|m| m == MLP_MEMBER) => Some(&self.mlp_blocks),
            FusionMode::Late => None,
        }
    }
}
