//! CSV and JSON emitters. Both embed the resolved config; neither records
//! timestamps or worker counts, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Format, RunConfig};
use super::CliError;

/// First line of every CSV output.
pub const CONFIG_PREFIX: &str = "# config: ";

/// Tabular result of a command plus a structured summary for JSON output.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    /// Named summaries, written as `# name: {json}` lines in CSV.
    pub notes: Vec<(&'static str, Value)>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Self::default() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, name: &'static str, value: impl Serialize) {
        self.notes.push((name, serde_json::to_value(value).expect("summaries serialize")));
    }

    fn rows_as_objects(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), json!(v))).collect())
                })
                .collect(),
        )
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    seed: u64,
    version: &'a str,
}

pub fn render(report: &Report, config: &RunConfig, command: &str, format: Format) -> String {
    let config_json = serde_json::to_value(config).expect("config serializes");
    match format {
        Format::Csv => {
            let mut out = String::new();
            writeln!(out, "{CONFIG_PREFIX}{config_json}").unwrap();
            for (name, value) in &report.notes {
                writeln!(out, "# {name}: {value}").unwrap();
            }
            writeln!(out, "{}", report.columns.join(",")).unwrap();
            for row in &report.rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
            out
        }
        Format::Json => {
            let mut data = serde_json::Map::new();
            data.insert("rows".into(), report.rows_as_objects());
            for (name, value) in &report.notes {
                data.insert(name.to_string(), value.clone());
            }
            let provenance =
                Provenance { command, seed: config.mc.seed, version: env!("CARGO_PKG_VERSION") };
            let document = json!({ "config": config_json, "data": data, "provenance": provenance });
            let mut text = serde_json::to_string_pretty(&document).expect("output serializes");
            text.push('\n');
            text
        }
    }
}

/// Writes to `path`, or to standard output when no path is set.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}
