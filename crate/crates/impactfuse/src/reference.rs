//! Bundled published results, rendered with the same table code as computed
//! runs. Golden renderings live in `fixtures/golden/<id>.txt` and `.csv`.

use impactfuse_core::metrics::{render_csv, render_fixed_width, ScoreSummary, TableRow};
use serde::Deserialize;

pub const REFERENCE_TABLES: &str = include_str!("../fixtures/reference_tables.toml");

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub name: String,
    pub language: String,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl ReferenceRow {
    pub fn summary(&self) -> ScoreSummary {
        ScoreSummary {
            micro_f1: self.micro_f1,
            macro_f1: self.macro_f1,
            weighted_f1: self.weighted_f1,
        }
    }

    pub fn table_row(&self) -> TableRow {
        TableRow::new(&self.name, &self.language, self.summary())
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ReferenceTable {
    pub id: String,
    pub title: String,
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTable {
    pub fn render(&self) -> String {
        render_fixed_width(&self.rows.iter().map(ReferenceRow::table_row).collect::<Vec<_>>())
    }

    pub fn render_csv(&self) -> String {
        render_csv(&self.rows.iter().map(ReferenceRow::table_row).collect::<Vec<_>>())
    }

    pub fn row(&self, name: &str, language: &str) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.name == name && r.language == language)
    }

    /// `(with, without)` row pairs where the first name is the second plus
    /// `suffix`, matched by language.
    pub fn pairs_with_suffix(&self, suffix: &str) -> Vec<(&ReferenceRow, &ReferenceRow)> {
        self.rows
            .iter()
            .filter_map(|r| {
                let base = r.name.strip_suffix(suffix)?;
                self.row(base, &r.language).map(|b| (r, b))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
struct File {
    tables: Vec<ReferenceTable>,
}

pub fn reference_tables() -> Vec<ReferenceTable> {
    toml::from_str::<File>(REFERENCE_TABLES).expect("bundled reference tables parse").tables
}

pub fn reference_table(id: &str) -> Option<ReferenceTable> {
    reference_tables().into_iter().find(|t| t.id == id)
}

/// Every title and rendered table, separated by blank lines.
pub fn render_all() -> String {
    reference_tables()
        .iter()
        .map(|t| format!("{}\n\n{}", t.title, t.render()))
        .collect::<Vec<_>>()
        .join("\n")
}
