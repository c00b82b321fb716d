//! File formats: frame files, dataset manifests, descriptor sets, trained
//! models and evaluation reports.
//!
//! Structured files are JSON with a `schema_version` field. Floats are written
//! in shortest round-trip form and parsed with full precision, so every
//! save/load pair is exact.

mod frames;
mod manifest;
mod model;
mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::FeatureError;

pub use frames::{load_sequence, read_sequence, save_sequence, write_sequence, SequenceMeta};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry};
pub use model::{
    load_descriptors, load_model, save_descriptors, save_model, DescriptorSet, PrototypeModel,
};
pub use report::{render_confusion, render_table, report_json, save_report, ReportMeta};

/// Version written to, and required of, every structured file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        source: std::io::Error,
    },
    #[error("{origin}{}: {message}", location(*line, *column))]
    Parse {
        origin: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    #[error("{origin}, line {line}: {found} values, expected {expected} (3 per joint)")]
    JointCountMismatch {
        origin: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{origin}, line {line}, column {column}: value is not finite")]
    NonFiniteValue {
        origin: String,
        line: usize,
        column: usize,
    },
    #[error("{origin}: schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch {
        origin: String,
        found: u32,
        expected: u32,
    },
    #[error("{origin}: {source}")]
    Sequence {
        origin: String,
        source: FeatureError,
    },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(", line {l}, column {c}"),
        (Some(l), None) => format!(", line {l}"),
        _ => String::new(),
    }
}

impl IoError {
    pub(crate) fn parse(origin: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Parse {
            origin: origin.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }

    /// True when the failure came from numerical linear algebra rather than
    /// from the input's shape or syntax.
    pub fn is_numeric(&self) -> bool {
        match self {
            IoError::Sequence {
                source: FeatureError::Spd(e),
                ..
            } => e.is_numeric(),
            _ => false,
        }
    }
}

pub(crate) fn origin_of(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        origin: origin_of(path),
        source,
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

/// Creates `path`, writes through `f` and flushes.
pub(crate) fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), IoError> {
    let mut w = File::create(path).map(BufWriter::new).map_err(io_err(path))?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    #[serde(default)]
    kind: Option<String>,
}

fn json_error(origin: &str, e: serde_json::Error) -> IoError {
    IoError::Parse {
        origin: origin.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    }
}

/// Parses a structured file after checking its schema version and kind.
pub(crate) fn from_json<T: DeserializeOwned>(
    text: &str,
    origin: &str,
    kind: Option<&str>,
) -> Result<T, IoError> {
    let header: Header = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(IoError::SchemaVersionMismatch {
            origin: origin.to_string(),
            found: header.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if let Some(kind) = kind {
        if header.kind.as_deref() != Some(kind) {
            return Err(IoError::parse(
                origin,
                format!("expected kind {kind:?}, found {:?}", header.kind),
            ));
        }
    }
    serde_json::from_str(text).map_err(|e| json_error(origin, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, kind: Option<&str>) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    from_json(&text, &origin_of(path), kind)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<(), IoError> {
    write_file(path, |w| {
        if pretty {
            serde_json::to_writer_pretty(&mut *w, value)?;
        } else {
            serde_json::to_writer(&mut *w, value)?;
        }
        w.write_all(b"\n")
    })
}
