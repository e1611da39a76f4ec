use std::fs;
use std::path::{Path, PathBuf};

use isoprofile::report::fmt_num;
use serde_json::{json, Value};

use crate::exit::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV table with fixed 12-significant-digit numbers.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let cells: Vec<String> = cells.iter().map(Cell::render).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, Failure> {
        let path = dir.join(name);
        fs::write(&path, &self.text).map_err(Failure::io)?;
        Ok(path)
    }
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains(',') || s.contains('"') => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn num(x: f64) -> Cell {
    Cell::Num(x)
}

pub fn int(i: usize) -> Cell {
    Cell::Int(i as i64)
}

pub fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

/// JSON number, or a string for non-finite values.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_num(x))
    }
}

/// Writes `{schema_version, command, ...body}`.
pub fn write_json(dir: &Path, name: &str, command: &str, body: Value) -> Result<PathBuf, Failure> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(command));
    match body {
        Value::Object(map) => doc.extend(map),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(Failure::io)?;
    Ok(path)
}
