//! Frame files: one frame per line, `X,Y,Z` per joint in joint order.
//!
//! A first line with any non-numeric token is a header. Blank lines and lines
//! starting with `#` are skipped.

use std::io::{Read, Write};
use std::path::Path;

use super::{open, origin_of, write_file, IoError};
use crate::labels::EmotionLabel;
use crate::motion::SkeletonSequence;

/// Everything about a sequence that is not in its frame file.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub id: String,
    pub subject_id: String,
    pub label: Option<EmotionLabel>,
    pub fps: f64,
    pub n_joints: usize,
}

pub fn read_sequence(
    reader: impl Read,
    origin: &str,
    meta: SequenceMeta,
) -> Result<SkeletonSequence, IoError> {
    let stride = 3 * meta.n_joints;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut coords = Vec::new();
    let mut first = true;
    for record in csv.records() {
        let record = record.map_err(|e| IoError::Parse {
            origin: origin.to_string(),
            line: e.position().map(|p| p.line() as usize),
            column: None,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if std::mem::take(&mut first) && parsed.iter().any(Result::is_err) {
            continue;
        }
        if record.len() != stride {
            return Err(IoError::JointCountMismatch {
                origin: origin.to_string(),
                line,
                expected: stride,
                found: record.len(),
            });
        }
        for (i, v) in parsed.into_iter().enumerate() {
            let v = v.map_err(|_| IoError::Parse {
                origin: origin.to_string(),
                line: Some(line),
                column: Some(i + 1),
                message: format!("{:?} is not a number", &record[i]),
            })?;
            if !v.is_finite() {
                return Err(IoError::NonFiniteValue {
                    origin: origin.to_string(),
                    line,
                    column: i + 1,
                });
            }
            coords.push(v);
        }
    }
    SkeletonSequence::from_flat(
        meta.id,
        meta.subject_id,
        meta.label,
        meta.n_joints,
        meta.fps,
        coords,
    )
    .map_err(|source| IoError::Sequence {
        origin: origin.to_string(),
        source,
    })
}

/// Unlabeled sequence named after the file stem.
pub fn load_sequence(path: &Path, fps: f64, n_joints: usize) -> Result<SkeletonSequence, IoError> {
    let id = path
        .file_stem()
        .map_or_else(|| origin_of(path), |s| s.to_string_lossy().into_owned());
    let meta = SequenceMeta {
        id,
        subject_id: String::new(),
        label: None,
        fps,
        n_joints,
    };
    read_sequence(open(path)?, &origin_of(path), meta)
}

/// Header `j0_x,j0_y,j0_z,j1_x,…`, then one line per frame.
pub fn write_sequence(w: &mut impl Write, seq: &SkeletonSequence) -> std::io::Result<()> {
    let header: Vec<String> = (0..seq.n_joints())
        .flat_map(|j| ["x", "y", "z"].map(|a| format!("j{j}_{a}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for frame in seq.frames() {
        line.clear();
        for (i, v) in frame.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:?}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_sequence(path: &Path, seq: &SkeletonSequence) -> Result<(), IoError> {
    write_file(path, |w| write_sequence(w, seq))
}
