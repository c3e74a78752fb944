//! CSV / JSONL tables and coarse schema inference.
//!
//! Rows are kept as JSON objects in both formats. CSV cells are always
//! strings; JSONL cells keep their JSON type.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::contract::Predicate;
use crate::error::{Error, Result};

pub type Row = Map<String, Value>;

/// Rows inspected when inferring column types.
pub const INFERENCE_ROWS: usize = 100;

const UTF8_BOM: &str = "\u{feff}";

/// Tokens read as "missing" in addition to JSON `null`.
const NA_TOKENS: &[&str] = &[
    "", "#N/A", "#N/A N/A", "#NA", "-1.#IND", "-1.#QNAN", "-NaN", "-nan", "1.#IND", "1.#QNAN",
    "<NA>", "N/A", "NA", "NULL", "NaN", "None", "n/a", "nan", "null",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Option<DataFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(DataFormat::Csv),
            "jsonl" | "ndjson" => Some(DataFormat::Jsonl),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataFormat::Csv => "csv",
            DataFormat::Jsonl => "jsonl",
        }
    }
}

impl std::fmt::Display for DataFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseType {
    Integer,
    Real,
    String,
    Boolean,
    DatetimeString,
}

impl CoarseType {
    pub fn as_str(self) -> &'static str {
        match self {
            CoarseType::Integer => "integer",
            CoarseType::Real => "real",
            CoarseType::String => "string",
            CoarseType::Boolean => "boolean",
            CoarseType::DatetimeString => "datetime-string",
        }
    }
}

impl std::fmt::Display for CoarseType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub format: DataFormat,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(format: DataFormat, columns: Vec<String>, rows: Vec<Row>) -> Self {
        Table {
            format,
            columns,
            rows,
        }
    }

    pub fn load(path: &Path) -> Result<Table> {
        let format = DataFormat::from_path(path)
            .ok_or_else(|| Error::data(path, "unsupported extension (expected .csv or .jsonl)"))?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text, format).map_err(|m| Error::data(path, m))
    }

    pub fn parse(text: &str, format: DataFormat) -> std::result::Result<Table, String> {
        let text = match text.strip_prefix(UTF8_BOM) {
            Some(rest) => {
                tracing::warn!("stripping UTF-8 byte-order mark");
                rest
            }
            None => text,
        };
        match format {
            DataFormat::Csv => parse_csv(text),
            DataFormat::Jsonl => parse_jsonl(text),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        match self.format {
            DataFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(self.columns.iter().map(|c| cell_text(row.get(c))))?;
                }
                w.flush()
            }
            DataFormat::Jsonl => {
                for row in &self.rows {
                    serde_json::to_writer(&mut *out, row)?;
                    out.write_all(b"\n")?;
                }
                Ok(())
            }
        }
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    /// Values of a column in row order; rows lacking the key yield `None`.
    pub fn column<'a>(&'a self, name: &'a str) -> impl Iterator<Item = Option<&'a Value>> + 'a {
        self.rows.iter().map(move |r| r.get(name))
    }

    pub fn infer_type(&self, column: &str) -> CoarseType {
        infer_type(
            self.rows
                .iter()
                .take(INFERENCE_ROWS)
                .filter_map(|r| r.get(column)),
        )
    }

    /// The first `n` rows rendered as compact JSON lines.
    pub fn sample_lines(&self, n: usize) -> Vec<String> {
        self.rows
            .iter()
            .take(n)
            .map(|r| serde_json::to_string(r).unwrap_or_default())
            .collect()
    }
}

fn parse_csv(text: &str) -> std::result::Result<Table, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| format!("bad CSV header: {e}"))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("bad CSV record {}: {e}", i + 2))?;
        let mut row = Row::new();
        for (col, cell) in columns.iter().zip(record.iter()) {
            row.insert(col.clone(), Value::String(cell.to_string()));
        }
        rows.push(row);
    }
    Ok(Table::new(DataFormat::Csv, columns, rows))
}

fn parse_jsonl(text: &str) -> std::result::Result<Table, String> {
    let mut columns: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        let Value::Object(row) = value else {
            return Err(format!("line {}: expected a JSON object", i + 1));
        };
        for key in row.keys() {
            if !columns.iter().any(|c| c == key) {
                columns.push(key.clone());
            }
        }
        rows.push(row);
    }
    Ok(Table::new(DataFormat::Jsonl, columns, rows))
}

/// Plain-text rendering of a cell: strings as-is, `null`/absent as empty,
/// everything else as JSON.
pub fn cell_text(value: Option<&Value>) -> String {
    match value {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

pub fn is_missing(value: Option<&Value>) -> bool {
    match value {
        None | Some(Value::Null) => true,
        Some(Value::String(s)) => NA_TOKENS.contains(&s.trim()),
        Some(Value::Number(n)) => n.as_f64().is_some_and(f64::is_nan),
        _ => false,
    }
}

/// Numeric reading of a cell, treating booleans as 0/1.
pub fn cell_f64(value: Option<&Value>) -> Option<f64> {
    match value? {
        Value::Number(n) => n.as_f64(),
        Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
        Value::String(s) => {
            let s = s.trim();
            match s {
                "True" | "true" | "TRUE" => Some(1.0),
                "False" | "false" | "FALSE" => Some(0.0),
                _ => s.parse::<f64>().ok(),
            }
        }
        _ => None,
    }
}

fn datetime_pattern() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        regex::Regex::new(
            r"^(\d{4}[-/.]\d{1,2}[-/.]\d{1,2}|\d{1,2}[-/.]\d{1,2}[-/.]\d{2,4})([ T]\d{1,2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$",
        )
        .expect("static regex")
    })
}

/// The most specific coarse type of a single present cell.
pub fn cell_type(value: &Value) -> CoarseType {
    match value {
        Value::Bool(_) => CoarseType::Boolean,
        Value::Number(n) if n.is_i64() || n.is_u64() => CoarseType::Integer,
        Value::Number(_) => CoarseType::Real,
        Value::String(s) => {
            let s = s.trim();
            if matches!(s, "true" | "false" | "True" | "False" | "TRUE" | "FALSE") {
                CoarseType::Boolean
            } else if s.parse::<i64>().is_ok() {
                CoarseType::Integer
            } else if s.parse::<f64>().is_ok() {
                CoarseType::Real
            } else if datetime_pattern().is_match(s) {
                CoarseType::DatetimeString
            } else {
                CoarseType::String
            }
        }
        _ => CoarseType::String,
    }
}

/// True when `value` can be read as `ty`. Every textual cell conforms to
/// `string`; integers conform to `real`.
pub fn conforms(value: &Value, ty: CoarseType) -> bool {
    let actual = cell_type(value);
    match ty {
        CoarseType::String => matches!(value, Value::String(_)),
        CoarseType::Real => matches!(actual, CoarseType::Real | CoarseType::Integer),
        other => actual == other,
    }
}

pub fn infer_type<'a>(values: impl Iterator<Item = &'a Value>) -> CoarseType {
    let mut seen: Option<CoarseType> = None;
    for value in values.filter(|v| !is_missing(Some(v))) {
        let ty = cell_type(value);
        seen = Some(match (seen, ty) {
            (None, t) => t,
            (Some(a), b) if a == b => a,
            (Some(CoarseType::Integer), CoarseType::Real)
            | (Some(CoarseType::Real), CoarseType::Integer) => CoarseType::Real,
            _ => CoarseType::String,
        });
        if seen == Some(CoarseType::String) {
            break;
        }
    }
    seen.unwrap_or(CoarseType::String)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: CoarseType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSchema {
    pub name: String,
    pub format: DataFormat,
    pub columns: Vec<ColumnSchema>,
    pub rows: usize,
}

/// Column names and coarse types of every input file of a task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub files: Vec<FileSchema>,
}

impl SchemaDescriptor {
    pub fn from_tables<'a>(tables: impl IntoIterator<Item = (&'a str, &'a Table)>) -> Self {
        let files = tables
            .into_iter()
            .map(|(name, table)| FileSchema {
                name: name.to_string(),
                format: table.format,
                columns: table
                    .columns
                    .iter()
                    .map(|c| ColumnSchema {
                        name: c.clone(),
                        ty: table.infer_type(c),
                    })
                    .collect(),
                rows: table.rows.len(),
            })
            .collect();
        SchemaDescriptor { files }
    }

    /// Loads every file and infers its schema. Returns the tables too so
    /// callers can draw samples without re-reading.
    pub fn load(paths: &[PathBuf]) -> Result<(SchemaDescriptor, Vec<Table>)> {
        let tables = paths
            .iter()
            .map(|p| Table::load(p))
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = paths.iter().map(|p| file_name(p)).collect();
        let schema = SchemaDescriptor::from_tables(names.iter().map(String::as_str).zip(&tables));
        Ok((schema, tables))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.files
            .iter()
            .any(|f| f.columns.iter().any(|c| c.name == name))
    }

    pub fn column_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for f in &self.files {
            for c in &f.columns {
                if !names.contains(&c.name.as_str()) {
                    names.push(&c.name);
                }
            }
        }
        names
    }

    /// Source facts the planner may assume before any operator runs.
    pub fn facts(&self) -> Vec<Predicate> {
        let mut facts = Vec::new();
        for file in &self.files {
            for col in &file.columns {
                let exists = Predicate::ColumnExists {
                    column: col.name.clone(),
                };
                let typed = Predicate::TypeIs {
                    column: col.name.clone(),
                    ty: col.ty,
                };
                for p in [exists, typed] {
                    if !facts.contains(&p) {
                        facts.push(p);
                    }
                }
            }
        }
        // Every input has at least as many rows as the smallest one.
        if let Some(min) = self.files.iter().map(|f| f.rows as u64).min() {
            facts.push(Predicate::RowCountMin { min });
        }
        facts
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for file in &self.files {
            let _ = writeln!(
                out,
                "- inputs/{} ({}, {} rows)",
                file.name, file.format, file.rows
            );
            for col in &file.columns {
                let _ = writeln!(out, "  - {}: {}", col.name, col.ty);
            }
        }
        out
    }
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a whole JSONL or CSV file into rows, for evaluators.
pub fn load_rows(path: &Path) -> Result<Vec<Row>> {
    Ok(Table::load(path)?.rows)
}
