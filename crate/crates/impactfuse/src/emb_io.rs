//! EMB1 files on disk.

use std::fs;
use std::path::Path;

use impactfuse_core::emb::EmbeddingTable;

use crate::error::{Error, Result};

pub fn read_table(path: &Path) -> Result<EmbeddingTable> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    EmbeddingTable::decode(&bytes).map_err(|source| Error::Emb {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_table(table: &EmbeddingTable, path: &Path) -> Result<()> {
    fs::write(path, table.encode()).map_err(Error::io(path))
}
