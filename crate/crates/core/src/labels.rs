use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Labels used when no label set is configured.
pub const DEFAULT_LABELS: [&str; 5] = ["anger", "fear", "joy", "neutral", "sadness"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unknown label {label:?}; expected one of {allowed:?}")]
    Unknown { label: String, allowed: Vec<String> },
    #[error("invalid label {0:?}: labels are non-empty lowercase identifiers")]
    Malformed(String),
    #[error("duplicate label {0:?} in label set")]
    Duplicate(String),
    #[error("label set is empty")]
    Empty,
}

/// An emotion class name. Ordering is lexicographic on the name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionLabel(String);

impl EmotionLabel {
    fn new(name: &str) -> Result<Self, LabelError> {
        let ok = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-');
        if !ok {
            return Err(LabelError::Malformed(name.to_string()));
        }
        Ok(EmotionLabel(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `"anger"` → `"Anger"`, for table headers.
    pub fn title(&self) -> String {
        let mut chars = self.0.chars();
        match chars.next() {
            Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
            None => String::new(),
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The closed, ordered set of labels of one experiment.
///
/// The order is the row/column order of confusion matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet(Vec<EmotionLabel>);

impl LabelSet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, LabelError> {
        if names.is_empty() {
            return Err(LabelError::Empty);
        }
        let mut labels: Vec<EmotionLabel> = Vec::with_capacity(names.len());
        for n in names {
            let l = EmotionLabel::new(n.as_ref().trim())?;
            if labels.contains(&l) {
                return Err(LabelError::Duplicate(l.0));
            }
            labels.push(l);
        }
        Ok(LabelSet(labels))
    }

    /// Parses a label, accepting any ASCII case.
    pub fn parse(&self, name: &str) -> Result<EmotionLabel, LabelError> {
        let lower = name.trim().to_ascii_lowercase();
        self.0
            .iter()
            .find(|l| l.0 == lower)
            .cloned()
            .ok_or_else(|| LabelError::Unknown {
                label: name.to_string(),
                allowed: self.0.iter().map(|l| l.0.clone()).collect(),
            })
    }

    pub fn labels(&self) -> &[EmotionLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, label: &EmotionLabel) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &EmotionLabel) -> bool {
        self.index_of(label).is_some()
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        LabelSet::new(&DEFAULT_LABELS).expect("default labels are valid")
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = LabelError;

    fn try_from(v: Vec<String>) -> Result<Self, LabelError> {
        LabelSet::new(&v)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(s: LabelSet) -> Self {
        s.0.into_iter().map(|l| l.0).collect()
    }
}
