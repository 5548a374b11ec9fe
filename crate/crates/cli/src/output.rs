//! Output files: CSV with a `#` header block, or JSON with a `meta` object.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub basis_checksum: Option<String>,
}

impl Meta {
    pub fn new(command: &str, config_hash: String) -> Self {
        Meta { tool: "hydromodes", version: hydromodes::VERSION, command: command.into(), config_hash, basis_checksum: None }
    }

    pub fn with_basis(&self, checksum: String) -> Self {
        Meta { basis_checksum: Some(checksum), ..self.clone() }
    }

    fn header_lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("# {} {} {}", self.tool, self.version, self.command),
            format!("# config_hash {}", self.config_hash),
        ];
        if let Some(b) = &self.basis_checksum {
            v.push(format!("# basis_checksum {b}"));
        }
        v
    }
}

/// A table of JSON scalars written as CSV or as an array of objects.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub struct Writer {
    pub dir: PathBuf,
    pub format: Format,
    pub meta: Meta,
}

impl Writer {
    pub fn new(dir: &Path, format: Format, meta: Meta) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer { dir: dir.to_path_buf(), format, meta })
    }

    pub fn with_basis(&self, checksum: String) -> Self {
        Writer { dir: self.dir.clone(), format: self.format, meta: self.meta.with_basis(checksum) }
    }

    /// Writes `stem.csv` or `stem.json` according to the selected format.
    pub fn table(&self, stem: &str, table: &Table) -> anyhow::Result<PathBuf> {
        match self.format {
            Format::Csv => self.csv(stem, table),
            Format::Json => {
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|r| Value::Object(table.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                    .collect();
                self.json(stem, &rows)
            }
        }
    }

    pub fn csv(&self, stem: &str, table: &Table) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(format!("{stem}.csv"));
        let mut f = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        for line in self.meta.header_lines() {
            writeln!(f, "{line}")?;
        }
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&table.columns)?;
        for r in &table.rows {
            w.write_record(r.iter().map(cell))?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, stem: &str, data: &T) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(format!("{stem}.json"));
        let doc = serde_json::json!({ "meta": self.meta, "data": data });
        let f = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(f, &doc)?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
