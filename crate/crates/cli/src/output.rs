//! Error rendering, path checks and file writers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub const CSV_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Input,
    Runtime,
}

/// Rendered as one JSON object on stderr.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<Value>,
}

impl CliError {
    pub fn input(code: &str, message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Input,
            code: code.to_string(),
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            code: "runtime".to_string(),
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn with_details(mut self, details: Vec<Value>) -> Self {
        self.details = details;
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 3,
            ErrorKind::Runtime => 1,
        }
    }

    pub fn emit(&self) {
        let line = serde_json::to_string(&json!({ "error": self })).expect("error serializes");
        eprintln!("{line}");
    }
}

pub fn check_input(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::input(
            "missing-input",
            format!("input file {} does not exist", path.display()),
        ));
    }
    Ok(())
}

pub fn check_output(path: &Path) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if !parent.is_dir() {
        return Err(CliError::input(
            "missing-output-dir",
            format!("output directory {} does not exist", parent.display()),
        ));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input("unreadable-input", format!("could not read {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::runtime(format!("could not write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::runtime(format!("could not write to stdout: {e}")))
        }
    }
}

/// `<path>.meta.json` next to a report.
pub fn meta_path(report: &Path) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Run metadata that would break byte-identical reports.
pub fn write_meta(report: &Path, timings: Value) -> Result<(), CliError> {
    let finished = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let meta = json!({
        "format_version": 1,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "finished_unix": finished,
        "timings": timings,
    });
    write_bytes(&meta_path(report), to_json(&meta).as_bytes())
}

/// CSV text with a leading `# format_version=1` line.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| CliError::runtime(format!("csv: {e}")))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::runtime(format!("csv: {e}")))?;
    }
    let body = w.into_inner().map_err(|e| CliError::runtime(format!("csv: {e}")))?;
    let mut out = format!("# format_version={CSV_FORMAT_VERSION}\n");
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    write_bytes(path, csv_text(header, rows)?.as_bytes())
}

/// Shortest round-trip representation; reports stay byte-stable because the
/// values themselves are deterministic.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
