//! CSV and manifest writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::Settings;
use super::PipelineError;

/// Significant digits of every floating-point CSV field.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// C `%.12g` formatting: shortest of fixed or exponent notation, trailing
/// zeros removed.
pub fn format_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Real(f64),
    Int(u64),
    Text(&'static str),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Real(x) => format_g(*x),
            Field::Int(n) => n.to_string(),
            Field::Text(s) => (*s).to_string(),
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Real(x)
    }
}

impl From<u64> for Field {
    fn from(n: u64) -> Self {
        Field::Int(n)
    }
}

impl From<u32> for Field {
    fn from(n: u32) -> Self {
        Field::Int(n.into())
    }
}

impl From<usize> for Field {
    fn from(n: usize) -> Self {
        Field::Int(n as u64)
    }
}

impl From<&'static str> for Field {
    fn from(s: &'static str) -> Self {
        Field::Text(s)
    }
}

/// Header plus rows, written in one go.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Field::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(io_error(path))?;
    w.flush().map_err(io_error(path))
}

/// Provenance record written next to the CSV files of each command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    /// SHA-256 of the resolved settings as canonical JSON.
    pub config_sha256: String,
    pub master_seed: u64,
    pub replicates: u32,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub files: Vec<String>,
    pub settings: Settings,
}

pub fn settings_hash(settings: &Settings) -> String {
    let json = serde_json::to_vec(settings).expect("settings serialize");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn new(settings: &Settings, files: Vec<String>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        Self {
            command: settings.command.name(),
            config_sha256: settings_hash(settings),
            master_seed: settings.master_seed,
            replicates: settings.replicates,
            versions,
            files,
            settings: settings.clone(),
        }
    }
}

/// Writes every table as `<name>.csv` plus `<command>_manifest.json` into
/// `out_dir`, returning the paths in write order.
pub fn write_all(
    out_dir: &Path,
    settings: &Settings,
    tables: &[Table],
    extra: &[(String, String)],
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for table in tables {
        let name = format!("{}.csv", table.name);
        let path = out_dir.join(&name);
        write_text(&path, &table.to_csv_string())?;
        written.push(path);
        names.push(name);
    }
    for (name, text) in extra {
        let path = out_dir.join(name);
        write_text(&path, text)?;
        written.push(path);
        names.push(name.clone());
    }
    let manifest = Manifest::new(settings, names);
    let name = format!("{}_manifest.json", settings.command.name());
    let path = out_dir.join(name);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_text(&path, &text)?;
    written.push(path);
    Ok(written)
}
