//! Report values and their CSV/JSON emission.
//!
//! Floats are written with 17 significant digits so every value round-trips exactly, and
//! keys keep their insertion order so repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A report value: scalars, lists, or objects with ordered keys.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<Value>),
    Object(Row),
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::List(v.into_iter().map(Into::into).collect())
    }
}

impl From<Row> for Value {
    fn from(v: Row) -> Self {
        Value::Object(v)
    }
}

/// Keyed values in insertion order; inserting an existing key replaces it in place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    entries: Vec<(String, Value)>,
}

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Into<Value>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether any boolean entry named `pass` or ending in `_pass`, at any depth, is false.
    pub fn has_failure(&self) -> bool {
        self.entries.iter().any(|(k, v)| match v {
            Value::Bool(false) => k == "pass" || k.ends_with("_pass"),
            other => value_has_failure(other),
        })
    }
}

fn value_has_failure(v: &Value) -> bool {
    match v {
        Value::Object(row) => row.has_failure(),
        Value::List(items) => items.iter().any(value_has_failure),
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `x` with 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn write_json_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(x) if x.is_finite() => out.push_str(&format_float(*x)),
        Value::Float(_) => out.push_str("null"),
        Value::Text(s) => out.push_str(&json_string(s)),
        Value::List(items) => {
            out.push('[');
            for (idx, item) in items.iter().enumerate() {
                if idx > 0 {
                    out.push_str(", ");
                }
                write_json_value(out, item);
            }
            out.push(']');
        }
        Value::Object(row) => write_json_object(out, row, 0),
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn write_json_object(out: &mut String, row: &Row, indent: usize) {
    if row.is_empty() {
        out.push_str("{}");
        return;
    }
    let pad = "  ".repeat(indent + 1);
    out.push_str("{\n");
    for (idx, (k, v)) in row.entries.iter().enumerate() {
        let _ = write!(out, "{pad}{}: ", json_string(k));
        match v {
            Value::Object(inner) => write_json_object(out, inner, indent + 1),
            other => write_json_value(out, other),
        }
        out.push_str(if idx + 1 < row.entries.len() { ",\n" } else { "\n" });
    }
    out.push_str(&"  ".repeat(indent));
    out.push('}');
}

/// One JSON object, pretty-printed with a trailing newline.
pub fn to_json_object(row: &Row) -> String {
    let mut out = String::new();
    write_json_object(&mut out, row, 0);
    out.push('\n');
    out
}

/// A JSON array of objects.
pub fn to_json(rows: &[Row]) -> String {
    let mut out = String::from("[");
    for (idx, row) in rows.iter().enumerate() {
        out.push_str(if idx == 0 { "\n  " } else { ",\n  " });
        let mut obj = String::new();
        write_json_object(&mut obj, row, 1);
        out.push_str(&obj);
    }
    out.push_str(if rows.is_empty() { "]\n" } else { "\n]\n" });
    out
}

fn csv_cell(v: &Value) -> String {
    let raw = match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format_float(*x),
        Value::Text(s) => s.clone(),
        nested => {
            let mut s = String::new();
            write_json_value(&mut s, nested);
            s
        }
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

/// CSV with the union of keys as header, in order of first appearance; missing cells are blank.
pub fn to_csv(rows: &[Row]) -> String {
    let mut header: Vec<&str> = Vec::new();
    for row in rows {
        for k in row.keys() {
            if !header.contains(&k) {
                header.push(k);
            }
        }
    }
    let mut out = header.iter().map(|k| csv_cell(&Value::Text(k.to_string()))).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = header.iter().map(|k| row.get(k).map_or(String::new(), csv_cell)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn render(rows: &[Row], format: Format) -> String {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    }
}

/// Write `rows` to `path`, creating parent directories.
pub fn emit_report(rows: &[Row], format: Format, path: &Path) -> Result<()> {
    write_text(path, &render(rows, format))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row_csv() {
        let row = Row::new().with("R", 0.1).with("n", 3usize).with("pass", true);
        assert_eq!(to_csv(&[row]), "R,n,pass\n1.0000000000000001e-1,3,true\n");
    }

    #[test]
    fn mixed_rows_take_the_union_of_keys() {
        let a = Row::new().with("x", 1i64).with("y", 2i64);
        let b = Row::new().with("z", 3i64).with("x", 4i64);
        assert_eq!(to_csv(&[a, b]), "x,y,z\n1,2,\n4,,3\n");
    }

    #[test]
    fn json_round_trips() {
        let rows = vec![
            Row::new().with("a", 1.0 / 3.0).with("b", "text, \"quoted\"").with("c", vec![1.5e-300, -2.0]),
            Row::new().with("nested", Row::new().with("ok", false)).with("missing", Option::<f64>::None),
        ];
        let text = to_json(&rows);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed[0]["a"].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(parsed[0]["b"], "text, \"quoted\"");
        assert_eq!(parsed[0]["c"][0].as_f64().unwrap(), 1.5e-300);
        assert_eq!(parsed[1]["nested"]["ok"], false);
        assert!(parsed[1]["missing"].is_null());
        assert_eq!(to_json(&rows), text);
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = format_float(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn failure_flags_are_found_at_depth() {
        let ok = Row::new().with("pass", true).with("inner", Row::new().with("order_pass", true));
        assert!(!ok.has_failure());
        let bad = ok.clone().with("list", vec![Value::Object(Row::new().with("pass", false))]);
        assert!(bad.has_failure());
    }
}
