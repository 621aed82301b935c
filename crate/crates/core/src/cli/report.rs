//! Tabular report merging and JSON/CSV conversion.
//!
//! A table is a named array of flat records. JSON files hold an object with a single array
//! field (for example `relations` or `rows`), a bare array, or one flat record; CSV files hold a header row.
//! Array-valued cells (spectra) are written to CSV as `;`-separated numbers.

use std::collections::BTreeSet;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// JSON object with one array field.
    Json,
    /// Comma-separated values with a header row.
    Csv,
}

/// Ordered columns and rows of one report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Name of the JSON array field.
    pub key: String,
    /// Column order.
    pub columns: Vec<String>,
    /// Rows as JSON objects.
    pub rows: Vec<Map<String, Value>>,
}

impl Table {
    /// Builds a table from a JSON value (object with one array field, a bare array, or one flat record).
    pub fn from_json(v: &Value, origin: &str) -> Result<Self> {
        let (key, arr) = match v {
            Value::Array(a) => ("rows".to_string(), a),
            Value::Object(o) => {
                let arrays: Vec<_> = o.iter().filter(|(_, x)| x.is_array()).collect();
                match arrays.as_slice() {
                    [(k, Value::Array(a))] => (k.to_string(), a),
                    [] if !o.values().any(Value::is_object) => {
                        let columns = o.keys().cloned().collect();
                        return Ok(Table { key: "rows".to_string(), columns, rows: vec![o.clone()] });
                    }
                    _ => return Err(Error::invalid(format!("{origin}: expected exactly one array field"))),
                }
            }
            _ => return Err(Error::invalid(format!("{origin}: not a JSON table"))),
        };
        let mut columns: Vec<String> = Vec::new();
        let mut rows = Vec::with_capacity(arr.len());
        for (i, r) in arr.iter().enumerate() {
            let Value::Object(obj) = r else {
                return Err(Error::invalid(format!("{origin}: row {i} is not an object")));
            };
            if i == 0 {
                columns = obj.keys().cloned().collect();
            } else if obj.keys().cloned().collect::<BTreeSet<_>>() != columns.iter().cloned().collect() {
                return Err(Error::invalid(format!("{origin}: row {i} has different columns")));
            }
            rows.push(obj.clone());
        }
        Ok(Table { key, columns, rows })
    }

    /// Reads a `.json` or `.csv` file.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::from_csv(&text, &origin)
        } else {
            let v: Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
            Self::from_json(&v, &origin)
        }
    }

    /// Parses CSV text; cells become numbers, `null` (empty), arrays (`;`-separated) or strings.
    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(origin, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(origin, i + 2, e.to_string()))?;
            let mut obj = Map::new();
            for (c, cell) in columns.iter().zip(rec.iter()) {
                obj.insert(c.clone(), parse_cell(cell));
            }
            rows.push(obj);
        }
        Ok(Table { key: "rows".to_string(), columns, rows })
    }

    /// JSON object `{key: [rows...]}` with columns in table order.
    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut o = Map::new();
                for c in &self.columns {
                    o.insert(c.clone(), r.get(c).cloned().unwrap_or(Value::Null));
                }
                Value::Object(o)
            })
            .collect();
        let mut top = Map::new();
        top.insert(self.key.clone(), Value::Array(rows));
        Value::Object(top)
    }

    /// CSV text with a header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| Error::invalid(e.to_string()))?;
        for r in &self.rows {
            let cells: Vec<String> = self.columns.iter().map(|c| format_cell(r.get(c).unwrap_or(&Value::Null))).collect();
            w.write_record(&cells).map_err(|e| Error::invalid(e.to_string()))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
            .map_err(|e| Error::invalid(e.to_string()))
    }

    /// Writes in the given format.
    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let text = match format {
            Format::Json => serde_json::to_string_pretty(&self.to_json()).map_err(|e| Error::invalid(e.to_string()))?,
            Format::Csv => self.to_csv()?,
        };
        super::manifest::write_atomic(path, text.as_bytes())
    }
}

fn format_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(format_cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

fn parse_cell(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    if let Some(v) = parse_number(s) {
        return v;
    }
    if s.contains(';') {
        let parts: Vec<Option<Value>> = s.split(';').map(parse_number).collect();
        if parts.iter().all(Option::is_some) {
            return Value::Array(parts.into_iter().map(Option::unwrap).collect());
        }
    }
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(s.to_string()),
    }
}

fn parse_number(s: &str) -> Option<Value> {
    if let Ok(i) = s.parse::<i64>() {
        return Some(Value::from(i));
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::from)
}

/// Concatenates tables that share one column set; differing schemas are an error.
pub fn merge(tables: Vec<Table>) -> Result<Table> {
    let mut it = tables.into_iter();
    let mut first = it.next().ok_or_else(|| Error::Usage("report needs at least one input".into()))?;
    let cols: BTreeSet<String> = first.columns.iter().cloned().collect();
    for (i, t) in it.enumerate() {
        let other: BTreeSet<String> = t.columns.iter().cloned().collect();
        if other != cols && !t.rows.is_empty() && !first.rows.is_empty() {
            let missing: Vec<_> = cols.symmetric_difference(&other).cloned().collect();
            return Err(Error::Mismatch(format!(
                "input {} has a different schema (columns differ: {})",
                i + 2,
                missing.join(", ")
            )));
        }
        if first.rows.is_empty() {
            first.columns = t.columns.clone();
        }
        first.rows.extend(t.rows);
    }
    Ok(first)
}
