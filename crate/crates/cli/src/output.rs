//! Tabular artifacts: CSV with a `# ` metadata header, or a JSON document
//! with the same content. Optionally gzip-compressed.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::{Format, RunConfig, OUT_DIR_ENV};
use crate::error::{CliError, Result};

/// One table entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Float(v.unwrap_or(f64::NAN))
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

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits, so every finite value parses back bit-exactly.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn non_finite(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => f.write_str(&format_float(*v)),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

// JSON has no non-finite numbers, so those floats travel as the strings
// "NaN", "inf" and "-inf". A text cell holding exactly one of these strings
// therefore reads back as a float.
impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Float(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Float(v) => s.serialize_str(&format_float(*v)),
            Cell::Bool(v) => s.serialize_bool(*v),
            Cell::Text(v) => s.serialize_str(v),
        }
    }
}

struct CellVisitor;

impl Visitor<'_> for CellVisitor {
    type Value = Cell;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number, boolean or string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Cell, E> {
        Ok(Cell::Int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Cell, E> {
        i64::try_from(v).map(Cell::Int).map_err(E::custom)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Cell, E> {
        Ok(Cell::Float(v))
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> std::result::Result<Cell, E> {
        Ok(Cell::Bool(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Cell, E> {
        Ok(non_finite(v).map_or_else(|| Cell::Text(v.to_string()), Cell::Float))
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Cell, D::Error> {
        d.deserialize_any(CellVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// JSON form of an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub command: String,
    pub config: RunConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

fn csv_bytes(command: &str, config: &RunConfig, table: &Table) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let cfg = serde_json::to_string(config).expect("config serialises");
    writeln!(out, "# command: {command}").expect("write to vec");
    writeln!(out, "# config: {cfg}").expect("write to vec");
    writeln!(out, "# seed: {}", config.seed).expect("write to vec");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| CliError::config(format!("csv: {e}"));
    w.write_record(&table.columns).map_err(err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.to_string())).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::config(format!("csv: {e}")))
}

/// Render a table in the configured format (uncompressed).
pub fn render(command: &str, config: &RunConfig, table: &Table) -> Result<Vec<u8>> {
    match config.format {
        Format::Csv => csv_bytes(command, config, table),
        Format::Json => {
            let doc = Document {
                command: command.to_string(),
                config: config.clone(),
                columns: table.columns.clone(),
                rows: table.rows.clone(),
            };
            let mut v = serde_json::to_vec_pretty(&doc).expect("document serialises");
            v.push(b'\n');
            Ok(v)
        }
    }
}

/// Parse the CSV form back: metadata lines and table.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Table)> {
    let meta: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with("# "))
        .map(|l| l[2..].to_string())
        .collect();
    let body: String = text.lines().skip(meta.len()).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let err = |e: csv::Error| CliError::config(format!("csv: {e}"));
    let columns = r.headers().map_err(err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(err)?.iter().map(parse_cell).collect());
    }
    Ok((meta, Table { columns, rows }))
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(v) = s.parse::<i64>() {
        Cell::Int(v)
    } else if let Some(v) = non_finite(s) {
        Cell::Float(v)
    } else if let Ok(v) = s.parse::<f64>() {
        Cell::Float(v)
    } else if let Ok(v) = s.parse::<bool>() {
        Cell::Bool(v)
    } else {
        Cell::Text(s.to_string())
    }
}

/// Where an artifact goes: `None` means stdout.
pub fn destination(command: &str, config: &RunConfig) -> Option<PathBuf> {
    match &config.out {
        Some(p) if p.as_os_str() == "-" => None,
        Some(p) => Some(p.clone()),
        None => std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(|dir| {
            let ext = match config.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let gz = if config.gzip { ".gz" } else { "" };
            Path::new(&dir).join(format!("{command}.{ext}{gz}"))
        }),
    }
}

fn gzip(bytes: &[u8]) -> Vec<u8> {
    // Default gzip header: no file name, mtime 0, so output is reproducible.
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes).expect("write to vec");
    enc.finish().expect("finish gzip stream")
}

/// Write rendered bytes to the configured destination, compressing when
/// asked to or when the file name ends in `.gz`.
pub fn emit(command: &str, config: &RunConfig, bytes: &[u8]) -> Result<Option<PathBuf>> {
    let dest = destination(command, config);
    let compress = config.gzip || dest.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "gz"));
    let data = if compress { gzip(bytes) } else { bytes.to_vec() };
    match &dest {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&data).and_then(|_| out.flush()).map_err(|e| CliError::io("stdout", e))?;
        }
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
            }
            std::fs::write(p, &data).map_err(|e| CliError::io(p.display().to_string(), e))?;
        }
    }
    Ok(dest)
}

/// Render and emit a table.
pub fn write_table(command: &str, config: &RunConfig, table: &Table) -> Result<Option<PathBuf>> {
    let bytes = render(command, config, table)?;
    emit(command, config, &bytes)
}
