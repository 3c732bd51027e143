//! `EMB1`: id-keyed dense vectors (external embeddings or logits).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "EMB1" (0x45 0x4D 0x42 0x31)
//! version   u16      1
//! kind      u8       0 = embedding, 1 = logits, 2 = projection
//! dim       u32
//! count     u32
//! name_len  u16, then name_len bytes of UTF-8 model name
//! count records of:
//!   id_len  u16, then id_len bytes of UTF-8 id
//!   dim x f32 (IEEE-754)
//! ```
//!
//! Vectors are kept as `f32` in memory so that a write/read cycle is
//! bit-exact; [`align`] widens them to `f64`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Split};
use crate::linalg::Matrix;

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Embedding = 0,
    Logits = 1,
    /// Rows are model components (used for stored LSA projections).
    Projection = 2,
}

impl TableKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(TableKind::Embedding),
            1 => Some(TableKind::Logits),
            2 => Some(TableKind::Projection),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbError {
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown table kind byte {0}")]
    UnknownKind(u8),
    #[error("truncated input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 at offset {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("empty id")]
    EmptyId,
    #[error("non-finite value in row {id:?} at position {position}")]
    NonFinite { id: String, position: usize },
    #[error("row {id:?} has length {got}, table dimension is {dim}")]
    RowLength { id: String, got: usize, dim: usize },
    #[error("logits tables must have dim 3, got {0}")]
    LogitsDimension(u32),
    #[error("{what} too long for its length prefix ({len} bytes)")]
    TooLong { what: &'static str, len: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} document ids missing from table: {}", .0.len(), .0.join(", "))]
pub struct MissingIds(pub Vec<String>);

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    model_name: String,
    kind: TableKind,
    dim: u32,
    rows: Vec<(String, Vec<f32>)>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(model_name: &str, kind: TableKind, dim: u32) -> Result<Self, EmbError> {
        if dim == 0 {
            return Err(EmbError::ZeroDimension);
        }
        if kind == TableKind::Logits && dim != 3 {
            return Err(EmbError::LogitsDimension(dim));
        }
        if model_name.len() > u16::MAX as usize {
            return Err(EmbError::TooLong {
                what: "model name",
                len: model_name.len(),
            });
        }
        Ok(EmbeddingTable {
            model_name: model_name.into(),
            kind,
            dim,
            rows: Vec::new(),
            index: BTreeMap::new(),
        })
    }

    pub fn push(&mut self, id: &str, vector: Vec<f32>) -> Result<(), EmbError> {
        if id.is_empty() {
            return Err(EmbError::EmptyId);
        }
        if id.len() > u16::MAX as usize {
            return Err(EmbError::TooLong { what: "id", len: id.len() });
        }
        if vector.len() != self.dim as usize {
            return Err(EmbError::RowLength {
                id: id.into(),
                got: vector.len(),
                dim: self.dim as usize,
            });
        }
        if let Some(position) = vector.iter().position(|v| !v.is_finite()) {
            return Err(EmbError::NonFinite { id: id.into(), position });
        }
        if self.index.contains_key(id) {
            return Err(EmbError::DuplicateId(id.into()));
        }
        if self.rows.len() >= u32::MAX as usize {
            return Err(EmbError::TooLong {
                what: "record count",
                len: self.rows.len() + 1,
            });
        }
        self.index.insert(id.into(), self.rows.len());
        self.rows.push((id.into(), vector));
        Ok(())
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.rows[i].1.as_slice())
    }

    /// Rows in insertion (file) order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.rows.iter().map(|(id, v)| (id.as_str(), v.as_slice()))
    }

    pub fn encoded_len(&self) -> usize {
        4 + 2 + 1 + 4 + 4 + 2 + self.model_name.len() + self.rows.iter().map(|(id, _)| 2 + id.len() + 4 * self.dim as usize).sum::<usize>()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.model_name.len() as u16).to_le_bytes());
        out.extend_from_slice(self.model_name.as_bytes());
        for (id, v) in &self.rows {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EmbError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(EmbError::BadMagic(magic));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(EmbError::UnsupportedVersion(version));
        }
        let kind_byte = r.take(1)?[0];
        let kind = TableKind::from_byte(kind_byte).ok_or(EmbError::UnknownKind(kind_byte))?;
        let dim = r.u32()?;
        let count = r.u32()?;
        let name_len = r.u16()? as usize;
        let name = r.str(name_len)?;
        let mut table = EmbeddingTable::new(name, kind, dim)?;
        for _ in 0..count {
            let id_len = r.u16()? as usize;
            let id = r.str(id_len)?;
            let raw = r.take(4 * dim as usize)?;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            table.push(id, v)?;
        }
        if r.pos != bytes.len() {
            return Err(EmbError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(table)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbError> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(EmbError::Truncated {
                offset: self.bytes.len(),
                needed: n - left,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, EmbError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, EmbError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn str(&mut self, n: usize) -> Result<&'a str, EmbError> {
        let offset = self.pos;
        let b = self.take(n)?;
        core::str::from_utf8(b).map_err(|e| EmbError::InvalidUtf8 {
            offset: offset + e.valid_up_to(),
        })
    }
}

/// One `f64` row per document of `split`, in dataset order.
pub fn align(table: &EmbeddingTable, ds: &Dataset, split: Split) -> Result<Matrix, MissingIds> {
    align_docs(table, ds.split_docs(split).iter().map(|d| d.id.as_str()))
}

/// One `f64` row per id, in the given order. Every absent id is reported.
pub fn align_docs<'a, I>(table: &EmbeddingTable, ids: I) -> Result<Matrix, MissingIds>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut data = Vec::new();
    let mut missing = Vec::new();
    let mut n = 0;
    for id in ids {
        n += 1;
        match table.get(id) {
            Some(v) => data.extend(v.iter().map(|&x| f64::from(x))),
            None => missing.push(String::from(id)),
        }
    }
    if !missing.is_empty() {
        return Err(MissingIds(missing));
    }
    Ok(Matrix::from_vec(n, table.dim(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small() -> EmbeddingTable {
        let mut t = EmbeddingTable::new("fake", TableKind::Embedding, 2).unwrap();
        t.push("a", vec![1.0, 2.0]).unwrap();
        t.push("b", vec![0.0, -1.5]).unwrap();
        t
    }

    #[test]
    fn round_trip_small_table() {
        let t = small();
        let bytes = t.encode();
        assert_eq!(bytes.len(), t.encoded_len());
        assert_eq!(&bytes[..4], &[0x45, 0x4D, 0x42, 0x31]);
        assert_eq!(EmbeddingTable::decode(&bytes).unwrap(), t);
    }

    #[test]
    fn header_layout_is_fixed() {
        let t = small();
        let bytes = t.encode();
        assert_eq!(
            &bytes[..21],
            &[
                b'E', b'M', b'B', b'1', // magic
                1, 0, // version
                0, // kind
                2, 0, 0, 0, // dim
                2, 0, 0, 0, // count
                4, 0, b'f', b'a', b'k', b'e',
            ]
        );
        // first record: id "a" then 1.0f32, 2.0f32
        assert_eq!(&bytes[21..24], &[1, 0, b'a']);
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = small().encode();
        let cut = &bytes[..bytes.len() - 3];
        assert_eq!(
            EmbeddingTable::decode(cut).unwrap_err(),
            EmbError::Truncated {
                offset: cut.len(),
                needed: 3
            }
        );
        assert!(matches!(EmbeddingTable::decode(&bytes[..2]), Err(EmbError::Truncated { .. })));
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let mut bytes = small().encode();
        bytes[0] = b'X';
        assert!(matches!(EmbeddingTable::decode(&bytes), Err(EmbError::BadMagic(_))));
        let mut bytes = small().encode();
        bytes[4] = 2;
        assert_eq!(EmbeddingTable::decode(&bytes).unwrap_err(), EmbError::UnsupportedVersion(2));
        let mut bytes = small().encode();
        bytes[6] = 9;
        assert_eq!(EmbeddingTable::decode(&bytes).unwrap_err(), EmbError::UnknownKind(9));
        let mut bytes = small().encode();
        bytes.push(0);
        assert_eq!(EmbeddingTable::decode(&bytes).unwrap_err(), EmbError::TrailingBytes(1));
    }

    #[test]
    fn duplicate_ids_in_file_are_detected() {
        let mut bytes = small().encode();
        // rename "b" to "a"
        let pos = bytes.len() - 8 - 1;
        assert_eq!(bytes[pos], b'b');
        bytes[pos] = b'a';
        assert_eq!(EmbeddingTable::decode(&bytes).unwrap_err(), EmbError::DuplicateId("a".into()));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut t = EmbeddingTable::new("x", TableKind::Embedding, 2).unwrap();
        assert!(matches!(t.push("a", vec![1.0, f32::NAN]), Err(EmbError::NonFinite { position: 1, .. })));
        let mut bytes = small().encode();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(EmbeddingTable::decode(&bytes), Err(EmbError::NonFinite { .. })));
    }

    #[test]
    fn logits_tables_need_three_dims() {
        assert_eq!(
            EmbeddingTable::new("m", TableKind::Logits, 5).unwrap_err(),
            EmbError::LogitsDimension(5)
        );
        assert!(EmbeddingTable::new("m", TableKind::Logits, 3).is_ok());
    }

    #[test]
    fn align_reports_every_missing_id() {
        let t = small();
        let m = align_docs(&t, ["b", "a"]).unwrap();
        assert_eq!(m.row(0), &[0.0, -1.5]);
        assert_eq!(m.row(1), &[1.0, 2.0]);
        let err = align_docs(&t, ["a", "x", "y"]).unwrap_err();
        assert_eq!(err.0, vec![String::from("x"), String::from("y")]);
        let empty = align_docs(&t, []).unwrap();
        assert_eq!(empty.shape(), (0, 2));
    }
}
