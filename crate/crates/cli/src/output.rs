//! Deterministic serialization and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::fail::{CmdResult, OrExit};

/// Rounds to 6 significant digits and prints the shortest decimal that
/// reads back to the rounded value.
pub fn fmt_float(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.5e}")
        .parse()
        .expect("scientific notation parses");
    if rounded == 0.0 {
        // folds -0 into 0
        return "0".to_owned();
    }
    rounded.to_string()
}

/// Empty cell for absent values.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Writes `bytes` to `path` through a temporary sibling that is renamed
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).or_usage()?;
    tmp.write_all(bytes).or_internal()?;
    tmp.as_file().sync_all().or_internal()?;
    tmp.persist(path).map_err(|e| e.error).or_internal()?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir).or_usage()
}

/// Builds a CSV document in memory; fields are quoted only when needed.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CmdResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).or_internal()?;
    for r in rows {
        w.write_record(r).or_internal()?;
    }
    w.into_inner().or_internal()
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes(value: &impl Serialize) -> CmdResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).or_internal()?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseNote {
    pub case: String,
    pub reason: String,
}

/// Summary written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub seed: u64,
    pub n_cases_total: usize,
    pub n_cases_processed: usize,
    pub n_cases_skipped: usize,
    pub skipped: Vec<CaseNote>,
    /// Processed cases with a recoverable problem (e.g. undefined HD).
    pub warnings: Vec<CaseNote>,
    /// Output file names relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

pub struct ReportBuilder {
    subcommand: &'static str,
    seed: u64,
    started: Instant,
}

impl ReportBuilder {
    pub fn start(subcommand: &'static str, seed: u64) -> Self {
        Self {
            subcommand,
            seed,
            started: Instant::now(),
        }
    }

    pub fn finish(
        self,
        n_total: usize,
        skipped: Vec<CaseNote>,
        warnings: Vec<CaseNote>,
        outputs: Vec<String>,
    ) -> RunReport {
        RunReport {
            subcommand: self.subcommand.to_owned(),
            seed: self.seed,
            n_cases_total: n_total,
            n_cases_processed: n_total - skipped.len(),
            n_cases_skipped: skipped.len(),
            skipped,
            warnings,
            outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        }
    }
}

pub const REPORT_FILE: &str = "run_report.json";

/// Collects named outputs under one directory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CmdResult<Self> {
        ensure_dir(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` (which may contain one subdirectory level).
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CmdResult<()> {
        let target = self.root.join(name);
        if let Some(parent) = target.parent() {
            ensure_dir(parent)?;
        }
        write_atomic(&target, bytes)?;
        self.written.push(name.to_owned());
        Ok(())
    }

    pub fn outputs(&self) -> Vec<String> {
        self.written.clone()
    }

    pub fn write_report(&mut self, report: &RunReport) -> CmdResult<()> {
        let bytes = json_bytes(report)?;
        write_atomic(&self.root.join(REPORT_FILE), &bytes)
    }
}
