//! Tables of already-formatted cells, written once as CSV or JSON.

use crate::error::CliError;
use clap::ValueEnum;
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, headers: &[&'static str]) -> Self {
        Self {
            name,
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

pub struct Document {
    pub command: &'static str,
    pub tables: Vec<Table>,
}

fn timestamp() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}

pub fn render(doc: &Document, format: Format, stamp: bool) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => render_csv(doc, stamp),
        Format::Json => render_json(doc, stamp),
    }
}

fn render_csv(doc: &Document, stamp: bool) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    if stamp {
        writeln!(out, "# generated_unix={}", timestamp())?;
    }
    for (i, t) in doc.tables.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        if doc.tables.len() > 1 {
            writeln!(out, "# table={}", t.name)?;
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&t.headers).map_err(csv_io)?;
        for row in &t.rows {
            w.write_record(row).map_err(csv_io)?;
        }
        out.extend(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?);
    }
    Ok(out)
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn render_json(doc: &Document, stamp: bool) -> Result<Vec<u8>, CliError> {
    let mut tables = Map::new();
    for t in &doc.tables {
        let rows: Vec<Value> = t
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = t
                    .headers
                    .iter()
                    .zip(r)
                    .map(|(h, v)| (h.to_string(), Value::String(v.clone())))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        tables.insert(t.name.to_string(), Value::Array(rows));
    }
    let mut top = json!({ "command": doc.command, "tables": tables });
    if stamp {
        top["generated_unix"] = Value::String(timestamp());
    }
    let mut out = serde_json::to_vec_pretty(&top).map_err(|e| CliError::Io(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}
