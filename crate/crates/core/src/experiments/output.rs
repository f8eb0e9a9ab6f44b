//! Tidy result tables, CSV/JSON rendering and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    /// Unit label; "-" for dimensionless.
    pub unit: String,
}

impl Column {
    pub fn header(&self) -> String {
        format!("{}[{}]", self.name, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub study: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

impl ResultTable {
    pub fn new(study: &str, columns: &[(&str, &str)], provenance: Provenance) -> Self {
        Self {
            study: study.to_string(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric values of a column (text cells skipped).
    pub fn column(&self, name: &str) -> Vec<f64> {
        match self.column_index(name) {
            Some(i) => self.rows.iter().filter_map(|r| r[i].as_f64()).collect(),
            None => Vec::new(),
        }
    }

    /// Rows whose column `name` equals the given text or number.
    pub fn filter(&self, name: &str, value: &Cell) -> Vec<&Vec<Cell>> {
        match self.column_index(name) {
            Some(i) => self.rows.iter().filter(|r| &r[i] == value).collect(),
            None => Vec::new(),
        }
    }

    /// CSV with `#`-prefixed provenance lines and `name[unit]` headers.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# study={}", self.study);
        let _ = writeln!(s, "# config_sha256={}", self.provenance.config_sha256);
        let _ = writeln!(s, "# seed={}", self.provenance.seed);
        let _ = writeln!(s, "# tool_version={}", self.provenance.tool_version);
        let header: Vec<String> = self.columns.iter().map(Column::header).collect();
        let _ = writeln!(s, "{}", header.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// JSON document; non-finite numbers become strings.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c {
                        Cell::Num(v) if !v.is_finite() => serde_json::Value::String(c.render()),
                        _ => serde_json::to_value(c).expect("cell serializes"),
                    })
                    .collect()
            })
            .collect();
        let doc = serde_json::json!({
            "study": self.study,
            "columns": self.columns,
            "rows": rows,
            "provenance": self.provenance,
        });
        serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub study: String,
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub provenance: Provenance,
    pub format: String,
    pub outputs: Vec<ManifestEntry>,
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write each table plus `manifest.json` into `dir`.
pub fn write_tables(dir: &Path, tables: &[ResultTable], json: bool, provenance: &Provenance) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut outputs = Vec::new();
    for t in tables {
        let (file, body) = if json {
            (format!("{}.json", t.study), t.to_json())
        } else {
            (format!("{}.csv", t.study), t.to_csv())
        };
        write_file(&dir.join(&file), &body)?;
        outputs.push(ManifestEntry {
            study: t.study.clone(),
            file,
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
            rows: t.rows.len(),
            columns: t.columns.iter().map(Column::header).collect(),
        });
    }
    let manifest = Manifest {
        provenance: provenance.clone(),
        format: if json { "json" } else { "csv" }.into(),
        outputs,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&dir.join("manifest.json"), &body)?;
    Ok(manifest)
}
