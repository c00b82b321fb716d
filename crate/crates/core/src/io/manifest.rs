//! Dataset manifests: which frame files make up a dataset, and their
//! subjects, labels, rates and joint counts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{open, origin_of, read_json, read_sequence, write_json, IoError, SequenceMeta, SCHEMA_VERSION};
use crate::labels::{EmotionLabel, LabelSet};
use crate::motion::SkeletonSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestFile {
    schema_version: u32,
    label_set: LabelSet,
    torso_joints: Vec<usize>,
    entries: Vec<RawEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawEntry {
    path: String,
    subject_id: String,
    label: String,
    fps: f64,
    n_joints: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// As written in the manifest, relative to its directory.
    pub path: String,
    pub subject_id: String,
    pub label: EmotionLabel,
    pub fps: f64,
    pub n_joints: usize,
}

impl ManifestEntry {
    /// Sequence id: the relative path without its extension.
    pub fn id(&self) -> String {
        Path::new(&self.path).with_extension("").to_string_lossy().into_owned()
    }
}

/// A validated manifest. Entries share one joint count and use only labels
/// from the label set.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub label_set: LabelSet,
    pub torso_joints: Vec<usize>,
    pub entries: Vec<ManifestEntry>,
    /// Directory entry paths are relative to.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn n_joints(&self) -> Option<usize> {
        self.entries.first().map(|e| e.n_joints)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<SkeletonSequence, IoError> {
        let path = self.resolve(entry);
        let meta = SequenceMeta {
            id: entry.id(),
            subject_id: entry.subject_id.clone(),
            label: Some(entry.label.clone()),
            fps: entry.fps,
            n_joints: entry.n_joints,
        };
        read_sequence(open(&path)?, &origin_of(&path), meta)
    }

    /// All sequences, in manifest order.
    pub fn load_sequences(&self) -> Result<Vec<SkeletonSequence>, IoError> {
        self.entries.iter().map(|e| self.load_entry(e)).collect()
    }

    /// Writes the manifest; entry paths are stored as given.
    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let file = ManifestFile {
            schema_version: SCHEMA_VERSION,
            label_set: self.label_set.clone(),
            torso_joints: self.torso_joints.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| RawEntry {
                    path: e.path.clone(),
                    subject_id: e.subject_id.clone(),
                    label: e.label.to_string(),
                    fps: e.fps,
                    n_joints: e.n_joints,
                })
                .collect(),
        };
        write_json(path, &file, true)
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IoError> {
    let origin = origin_of(path);
    let file: ManifestFile = read_json(path, None)?;
    let cite = |i: usize, e: &RawEntry, msg: String| {
        IoError::parse(origin.clone(), format!("entry {i} ({}): {msg}", e.path))
    };
    let mut entries = Vec::with_capacity(file.entries.len());
    for (i, e) in file.entries.iter().enumerate() {
        let label = file
            .label_set
            .parse(&e.label)
            .map_err(|err| cite(i, e, err.to_string()))?;
        if e.subject_id.is_empty() {
            return Err(cite(i, e, "empty subject_id".into()));
        }
        if !(e.fps.is_finite() && e.fps > 0.0) {
            return Err(cite(i, e, format!("fps {} is not positive", e.fps)));
        }
        if let Some(first) = file.entries.first() {
            if e.n_joints != first.n_joints {
                return Err(cite(
                    i,
                    e,
                    format!("n_joints {} differs from the first entry's {}", e.n_joints, first.n_joints),
                ));
            }
        }
        if let Some(&j) = file.torso_joints.iter().find(|&&j| j >= e.n_joints) {
            return Err(cite(i, e, format!("torso joint {j} is out of range for {} joints", e.n_joints)));
        }
        entries.push(ManifestEntry {
            path: e.path.clone(),
            subject_id: e.subject_id.clone(),
            label,
            fps: e.fps,
            n_joints: e.n_joints,
        });
    }
    if file.torso_joints.is_empty() {
        return Err(IoError::parse(origin, "torso_joints is empty"));
    }
    Ok(DatasetManifest {
        label_set: file.label_set,
        torso_joints: file.torso_joints,
        entries,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("manifest.json");
        std::fs::write(&p, text).unwrap();
        p
    }

    fn manifest(label: &str, version: u32) -> String {
        format!(
            r#"{{"schema_version": {version}, "label_set": ["anger", "joy"], "torso_joints": [0],
               "entries": [
                 {{"path": "a.csv", "subject_id": "s1", "label": "joy", "fps": 120, "n_joints": 1}},
                 {{"path": "b.csv", "subject_id": "s2", "label": "{label}", "fps": 120, "n_joints": 1}}
               ]}}"#
        )
    }

    #[test]
    fn loads_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x,y,z\n0,0,0\n1,0,0\n").unwrap();
        let m = load_manifest(&write(dir.path(), &manifest("Anger", 1))).unwrap();
        assert_eq!(m.entries[1].label.as_str(), "anger");
        assert_eq!(m.entries[0].id(), "a");
        let seq = m.load_entry(&m.entries[0]).unwrap();
        assert_eq!((seq.n_frames(), seq.subject_id()), (2, "s1"));
        assert!(matches!(m.load_entry(&m.entries[1]), Err(IoError::Io { .. })));
    }

    #[test]
    fn unknown_label_cites_entry() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_manifest(&write(dir.path(), &manifest("disgust", 1))).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, IoError::Parse { .. }));
        assert!(msg.contains("entry 1 (b.csv)") && msg.contains("disgust"), "{msg}");
    }

    #[test]
    fn schema_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_manifest(&write(dir.path(), &manifest("joy", 2))),
            Err(IoError::SchemaVersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_manifest(&write(dir.path(), &manifest("anger", 1))).unwrap();
        let out = dir.path().join("again.json");
        m.save(&out).unwrap();
        assert_eq!(load_manifest(&out).unwrap(), m);
    }
}
