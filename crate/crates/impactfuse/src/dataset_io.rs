//! JSONL and CSV dataset files.
//!
//! JSONL: one object per line with `id`, `text`, `lang`, optional `label`
//! and optional `split`. CSV: header `id,text,lang,label` with an optional
//! trailing `split` column.

use std::fs;
use std::io::Write;
use std::path::Path;

use impactfuse_core::corpus::{Dataset, LabelAliasMap, RawRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// `.csv` is CSV, everything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            _ => Err(format!("unknown dataset format `{s}` (expected jsonl or csv)")),
        }
    }
}

pub fn parse_jsonl(path: &Path, content: &str) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn parse_csv(path: &Path, content: &str) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(content.as_bytes());
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let expected = ["id", "text", "lang", "label"];
    let cols: Vec<&str> = headers.iter().collect();
    let ok = cols.len() >= 4 && cols[..4] == expected && (cols.len() == 4 || (cols.len() == 5 && cols[4] == "split"));
    if !ok {
        return Err(parse_err(1, format!("expected header id,text,lang,label[,split], got {}", cols.join(","))));
    }
    let optional = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        records.push(RawRecord {
            id: row[0].to_string(),
            text: row[1].to_string(),
            lang: row[2].to_string(),
            label: optional(&row[3]),
            split: row.get(4).and_then(optional),
        });
    }
    Ok(records)
}

/// Reads and validates a dataset. Any `split` fields become the dataset's
/// split assignment.
pub fn load_dataset(path: &Path, format: Option<DatasetFormat>) -> Result<Dataset> {
    let content = fs::read_to_string(path).map_err(Error::io(path))?;
    let records = match format.unwrap_or_else(|| DatasetFormat::from_path(path)) {
        DatasetFormat::Jsonl => parse_jsonl(path, &content)?,
        DatasetFormat::Csv => parse_csv(path, &content)?,
    };
    Dataset::from_records(records, &LabelAliasMap::default()).map_err(|source| Error::Dataset {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_jsonl(ds: &Dataset) -> String {
    let mut out = String::new();
    for r in ds.to_records() {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn to_csv(ds: &Dataset) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let with_split = ds.has_splits();
    if with_split {
        w.write_record(["id", "text", "lang", "label", "split"])?;
    } else {
        w.write_record(["id", "text", "lang", "label"])?;
    }
    for r in ds.to_records() {
        let label = r.label.unwrap_or_default();
        if with_split {
            w.write_record([&r.id, &r.text, &r.lang, &label, &r.split.unwrap_or_default()])?;
        } else {
            w.write_record([&r.id, &r.text, &r.lang, &label])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_dataset(ds: &Dataset, path: &Path, format: Option<DatasetFormat>) -> Result<()> {
    let text = match format.unwrap_or_else(|| DatasetFormat::from_path(path)) {
        DatasetFormat::Jsonl => to_jsonl(ds),
        DatasetFormat::Csv => to_csv(ds).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?,
    };
    let mut file = fs::File::create(path).map_err(Error::io(path))?;
    file.write_all(text.as_bytes()).map_err(Error::io(path))
}
