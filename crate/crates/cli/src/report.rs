//! Report assembly: named checks with tolerances, JSON emission, CSV tables.

use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::Path;

pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub struct Report {
    command: String,
    structure: String,
    depth: usize,
    checks: Vec<Check>,
    payload: Map<String, Value>,
    timestamp: bool,
}

impl Report {
    pub fn new(command: &str, structure: &str, depth: usize, timestamp: bool) -> Self {
        Report {
            command: command.to_string(),
            structure: structure.to_string(),
            depth,
            checks: Vec::new(),
            payload: Map::new(),
            timestamp,
        }
    }

    /// A check passes when |value| <= tolerance.
    pub fn check_residual(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value.abs() <= tolerance,
        });
    }

    pub fn check_flag(&mut self, name: &str, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            value: if pass { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass,
        });
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.payload.insert(key.to_string(), value);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "value": c.value,
                    "tolerance": c.tolerance,
                    "pass": c.pass,
                })
            })
            .collect();
        let mut root = Map::new();
        root.insert("schema_version".into(), json!(1));
        root.insert("command".into(), json!(self.command));
        root.insert("structure".into(), json!(self.structure));
        root.insert("depth".into(), json!(self.depth));
        if self.timestamp {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            root.insert("timestamp".into(), json!(secs));
        }
        root.insert("checks".into(), Value::Array(checks));
        root.insert("pass".into(), json!(self.all_pass()));
        for (k, v) in &self.payload {
            root.insert(k.clone(), v.clone());
        }
        Value::Object(root)
    }
}

/// One CSV table: a header line and float rows.
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.rows.push(cells.to_vec());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}
