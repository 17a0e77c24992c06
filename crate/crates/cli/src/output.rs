//! Result tables and their serialization.
//!
//! CSV uses '.' decimals, no locale, and a fixed column order; floats print
//! in Rust's shortest round-trip form, so emitted values re-parse to the
//! exact in-memory bits and golden files are byte-stable. JSON mirrors the
//! same rows as an array of objects.

use std::io::Write;
use std::path::Path;

use crate::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Float(f64),
    Int(u64),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Float(v) => format!("{v}"),
            Cell::Int(v) => format!("{v}"),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => serde_json::Value::String(s.clone()),
            Cell::Float(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                // non-finite floats have no JSON number representation
                .unwrap_or(serde_json::Value::Null),
            Cell::Int(v) => serde_json::Value::Number((*v).into()),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

/// A rectangular result table with a fixed column order.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Table {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "ragged table row");
        self.rows.push(row);
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let map: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(col, cell)| (col.to_string(), cell.json()))
                    .collect();
                serde_json::Value::Object(map)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows).expect("table serializes");
        text.push('\n');
        text
    }

    /// Write to the path, or to stdout when no path is given.
    pub fn emit(&self, format: OutputFormat, out: Option<&Path>) -> std::io::Result<()> {
        let text = self.render(format);
        match out {
            Some(path) => std::fs::write(path, text),
            None => std::io::stdout().write_all(text.as_bytes()),
        }
    }
}
