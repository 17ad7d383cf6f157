//! CSV tables and the JSON sidecar.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits: enough to round-trip any f64
            Cell::Real(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Real(v) if v.is_nan() => "NaN".into(),
            Cell::Real(v) => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> csv::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct Meta {
    pub config: RunConfig,
    pub seed: u64,
    pub wall_time_s: f64,
    pub version: String,
    pub threads_used: usize,
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()
        }
    }
}

pub fn write_meta(path: &Path, meta: &Meta) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(meta).map_err(std::io::Error::other)?;
    s.push('\n');
    std::fs::write(path, s)
}
