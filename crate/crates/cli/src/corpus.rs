//! Corpus layout, run reports and atomic file output.
//!
//! ```text
//! CORPUS/manifest.json
//! CORPUS/<member>/annotation.json
//! CORPUS/<member>/prediction/bundle.json   (+ map files)
//! WORK/<member>/targets/index.json         (+ map files)
//! WORK/<member>/refined.json
//! WORK/<member>/grid.json                  (+ grid.html)
//! WORK/eval.json
//! WORK/<command>_report.json
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tablestruct::formats::{read_json, FormatError};
use tablestruct::synth::SynthConfig;
use thiserror::Error;

pub const MANIFEST: &str = "manifest.json";
pub const RNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    pub name: String,
    pub table_seed: u64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub rng: String,
    pub seed: u64,
    pub config: SynthConfig,
    pub members: Vec<Member>,
}

pub fn is_corpus(path: &Path) -> bool {
    path.join(MANIFEST).is_file()
}

pub fn read_manifest(corpus: &Path) -> Result<Manifest, FormatError> {
    read_json(&corpus.join(MANIFEST))
}

pub fn annotation_path(corpus: &Path, member: &str) -> PathBuf {
    corpus.join(member).join("annotation.json")
}

pub fn bundle_path(corpus: &Path, member: &str) -> PathBuf {
    corpus.join(member).join("prediction").join("bundle.json")
}

#[derive(Debug, Error)]
pub enum StageError {
    /// Inputs were readable but describe no consistent table.
    #[error("{0}")]
    Structure(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl StageError {
    pub fn structure(e: impl std::fmt::Display) -> Self {
        StageError::Structure(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            StageError::Structure(_) => 2,
            StageError::Format(_) => 1,
        }
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> StageError {
    StageError::Format(FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StageError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), StageError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn remove_stale(path: &Path) {
    let _ = fs::remove_file(path);
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberReport {
    pub name: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl MemberReport {
    pub fn new(name: &str, result: Result<serde_json::Value, StageError>) -> (Self, u8) {
        match result {
            Ok(details) => (
                MemberReport {
                    name: name.to_string(),
                    status: "ok",
                    error: None,
                    details,
                },
                0,
            ),
            Err(e) => {
                let status = match e {
                    StageError::Structure(_) => "structure-error",
                    StageError::Format(_) => "format-error",
                };
                let code = e.exit_code();
                (
                    MemberReport {
                        name: name.to_string(),
                        status,
                        error: Some(e.to_string()),
                        details: serde_json::Value::Null,
                    },
                    code,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<C> {
    pub command: &'static str,
    pub config: C,
    pub exit_code: u8,
    pub members: Vec<MemberReport>,
}

/// Exit code for a batch: format errors dominate structure errors.
pub fn combine(codes: impl IntoIterator<Item = u8>) -> u8 {
    codes.into_iter().fold(0, |acc, c| match (acc, c) {
        (1, _) | (_, 1) => 1,
        (2, _) | (_, 2) => 2,
        _ => 0,
    })
}

/// Where a run report goes: inside an output directory, or next to an
/// output file.
pub fn report_path(output: &Path, command: &str, output_is_dir: bool) -> PathBuf {
    if output_is_dir {
        output.join(format!("{command}_report.json"))
    } else {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".report.json");
        output.with_file_name(name)
    }
}
