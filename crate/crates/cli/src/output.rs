//! Output files, tables and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub enum Cell {
    Num(f64),
    Int(u64),
    Flag(bool),
    Text(String),
    Empty,
}

/// Rows under a mandatory header, written as CSV or as a JSON array of
/// objects.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(CliError::runtime)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(x) => x.to_string(),
                Cell::Int(n) => n.to_string(),
                Cell::Flag(b) => u8::from(*b).to_string(),
                Cell::Text(s) => s.clone(),
                Cell::Empty => String::new(),
            }))
            .map_err(CliError::runtime)?;
        }
        w.into_inner().map_err(CliError::runtime)
    }

    pub fn to_json(&self) -> Value {
        let rows = self.rows.iter().map(|row| {
            let obj: Map<String, Value> = self
                .header
                .iter()
                .zip(row)
                .map(|(k, c)| {
                    let v = match c {
                        Cell::Num(x) => serde_json::json!(x),
                        Cell::Int(n) => Value::from(*n),
                        Cell::Flag(b) => Value::Bool(*b),
                        Cell::Text(s) => Value::String(s.clone()),
                        Cell::Empty => Value::Null,
                    };
                    (k.clone(), v)
                })
                .collect();
            Value::Object(obj)
        });
        Value::Array(rows.collect())
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// sha256 of `config` serialized with sorted keys.
    pub config_digest: String,
    pub tool_version: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    /// s
    pub wall_time: f64,
    pub config: Value,
}

pub fn digest(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

/// Files of one run: `<dir>/<stem><suffix>`.
///
/// `--out` naming a file (it has an extension) fixes the directory and stem;
/// otherwise it is the directory and the command supplies the stem.
pub struct Output {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
    started: Instant,
}

impl Output {
    pub fn new(out: &Path, default_stem: &str) -> Self {
        let (dir, stem) = match (out.extension(), out.file_stem()) {
            (Some(_), Some(stem)) => (
                out.parent().map(Path::to_path_buf).unwrap_or_default(),
                stem.to_string_lossy().into_owned(),
            ),
            _ => (out.to_path_buf(), default_stem.to_string()),
        };
        Self {
            dir,
            stem,
            written: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    pub fn write(&mut self, suffix: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(suffix);
        if !self.dir.as_os_str().is_empty() {
            std::fs::create_dir_all(&self.dir)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", self.dir.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json(&mut self, suffix: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
        text.push('\n');
        self.write(suffix, text.as_bytes())
    }

    /// Writes `<stem><suffix>.csv` or `.json`.
    pub fn write_table(&mut self, suffix: &str, table: &Table, format: Format) -> Result<PathBuf, CliError> {
        match format {
            Format::Csv => self.write(&format!("{suffix}.csv"), &table.to_csv()?),
            Format::Json => self.write_json(&format!("{suffix}.json"), &table.to_json()),
        }
    }

    /// Writes the manifest next to the outputs and returns its path.
    pub fn finish(mut self, command: &str, config: Value, seed: u64) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest: digest(&config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            outputs: self.written.iter().map(|p| p.display().to_string()).collect(),
            wall_time: self.started.elapsed().as_secs_f64(),
            config,
        };
        let path = self.path(".manifest.json");
        self.write_json(".manifest.json", &manifest)?;
        Ok(path)
    }
}
