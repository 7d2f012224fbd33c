use std::fs;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Format;
use crate::config::{output_path, RunConfig};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => csv_field(s),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub enum Body {
    Table(Table),
    /// Single-record result, written as `key,value` pairs in CSV.
    Report(Value),
}

pub struct Document {
    pub metadata: Value,
    pub body: Body,
}

fn render_csv(config: &RunConfig, doc: &Document) -> Result<String, CliError> {
    let mut out = String::new();
    out.push_str(&format!("# owgame {} schema_version={SCHEMA_VERSION}\n", config.command));
    out.push_str(&format!("# config: {}\n", serde_json::to_string(config)?));
    out.push_str(&format!("# metadata: {}\n", serde_json::to_string(&doc.metadata)?));
    match &doc.body {
        Body::Table(t) => {
            let header: Vec<String> = t.columns.iter().map(|c| csv_field(c)).collect();
            out.push_str(&header.join(","));
            out.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        Body::Report(v) => {
            out.push_str("key,value\n");
            if let Value::Object(map) = v {
                for (k, val) in map {
                    let s = match val {
                        Value::Number(n) => match n.as_f64() {
                            Some(f) if !n.is_i64() && !n.is_u64() => format_float(f),
                            _ => n.to_string(),
                        },
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    out.push_str(&format!("{},{}\n", csv_field(k), csv_field(&s)));
                }
            }
        }
    }
    Ok(out)
}

fn render_json(config: &RunConfig, doc: &Document) -> Result<String, CliError> {
    let mut root = json!({
        "schema_version": SCHEMA_VERSION,
        "command": config.command,
        "config": config,
        "metadata": doc.metadata,
    });
    match &doc.body {
        Body::Table(t) => {
            root["columns"] = json!(t.columns);
            root["rows"] = Value::Array(
                t.rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                    .collect(),
            );
        }
        Body::Report(v) => root["report"] = v.clone(),
    }
    let mut s = serde_json::to_string_pretty(&root)?;
    s.push('\n');
    Ok(s)
}

pub fn render(config: &RunConfig, doc: &Document) -> Result<String, CliError> {
    match config.format {
        Format::Csv => render_csv(config, doc),
        Format::Json => render_json(config, doc),
    }
}

/// Writes to `--output` (creating parent directories) or to stdout.
pub fn emit(config: &RunConfig, doc: &Document) -> Result<(), CliError> {
    let text = render(config, doc)?;
    match &config.output {
        Some(p) => {
            let path = output_path(p);
            if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn to_value<S: Serialize>(v: &S) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
