use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// One solve inside a run.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub solution: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: Value,
}

#[derive(Debug, Serialize)]
pub struct Document<S: Serialize> {
    pub schema: u32,
    pub command: &'static str,
    pub spec: S,
    pub results: Vec<RunRecord>,
    pub diagnostics: Value,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::Number(n) => {
            let s = match (n.as_i64(), n.as_u64()) {
                (Some(i), _) => i.to_string(),
                (None, Some(u)) => u.to_string(),
                _ => format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN)),
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), "nan".into())),
    }
}

/// `path,value` rows, one per leaf of the JSON document.
pub fn to_csv(doc: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", doc, &mut rows);
    let mut s = String::from("path,value\n");
    for (k, v) in rows {
        s.push_str(&csv_field(&k));
        s.push(',');
        s.push_str(&csv_field(&v));
        s.push('\n');
    }
    s
}

pub fn render<T: Serialize>(doc: &T, format: Format) -> Result<String, String> {
    let value = serde_json::to_value(doc).map_err(|e| e.to_string())?;
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).map_err(|e| e.to_string())?;
            s.push('\n');
            s
        }
        Format::Csv => to_csv(&value),
    })
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

pub fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && io::stdout().is_terminal()
}

pub fn status(passed: bool, color: bool) -> &'static str {
    match (passed, color) {
        (true, true) => "\x1b[32mpass\x1b[0m",
        (false, true) => "\x1b[31mFAIL\x1b[0m",
        (true, false) => "pass",
        (false, false) => "FAIL",
    }
}
