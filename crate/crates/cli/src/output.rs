use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::{Failure, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Rounds to 10 significant digits.
pub fn sig10(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = sig10(n.as_f64().unwrap());
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    round_value(serde_json::to_value(x).expect("serializable"))
}

/// Finite numbers as JSON numbers, anything else as null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(sig10(x)).map(Value::Number).unwrap_or(Value::Null)
}

/// A command result: the JSON document and, for tabular results, the rows
/// written in CSV mode.
pub struct Report {
    pub json: Value,
    pub rows: Option<Vec<Value>>,
}

impl Report {
    pub fn single(json: Value) -> Self {
        Self { json: round_value(json), rows: None }
    }

    pub fn table(json: Value, rows: Vec<Value>) -> Self {
        Self { json: round_value(json), rows: Some(rows.into_iter().map(round_value).collect()) }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_csv<W: Write>(rows: &[Value], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let flat: Vec<Vec<(String, Value)>> = rows
        .iter()
        .map(|r| {
            let mut f = Vec::new();
            flatten("", r, &mut f);
            f
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for row in &flat {
        for (k, _) in row {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    // A null object in one row must not add a column beside its fields from other rows.
    let nested: Vec<String> = header.iter().map(|k| format!("{k}.")).collect();
    header = header
        .iter()
        .zip(&nested)
        .filter(|(_, dot)| !header.iter().any(|h| h.starts_with(dot.as_str())))
        .map(|(k, _)| k.clone())
        .collect();
    w.write_record(&header)?;
    for row in &flat {
        let m: Map<String, Value> = row.iter().cloned().collect();
        w.write_record(header.iter().map(|k| m.get(k).map(cell).unwrap_or_default()))?;
    }
    w.flush()
}

pub fn write_report<W: Write>(report: &Report, format: Format, mut out: W) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report.json)?;
            writeln!(out)
        }
        Format::Csv => match &report.rows {
            Some(rows) => write_csv(rows, out),
            None => write_csv(std::slice::from_ref(&report.json), out),
        },
    }
}

pub fn emit(report: &Report, cfg: &RunConfig, default: Format) -> Result<(), Failure> {
    let format = cfg.format_or(default);
    match &cfg.output {
        Some(path) => write_report(report, format, create(path)?),
        None => write_report(report, format, io::stdout().lock()),
    }
    .map_err(Failure::io)
}

pub fn create(path: &Path) -> Result<io::BufWriter<File>, Failure> {
    File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}
