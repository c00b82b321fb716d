//! Trained prototype models and extracted descriptor sets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{origin_of, read_json, write_json, IoError, SCHEMA_VERSION};
use crate::classify::{LabeledDescriptor, Metric, PrototypeSet};
use crate::labels::{EmotionLabel, LabelSet};
use crate::motion::DescriptorConfig;
use crate::spd::SpdMatrix;

const MODEL_KIND: &str = "prototype_model";
const DESCRIPTORS_KIND: &str = "descriptor_set";

/// Prototypes plus the extraction settings needed to classify new sequences
/// the same way the training data was described.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    pub descriptor: DescriptorConfig,
    pub label_set: LabelSet,
    pub prototypes: PrototypeSet,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: String,
    metric: Metric,
    dim: usize,
    descriptor: DescriptorConfig,
    label_set: LabelSet,
    prototypes: Vec<PrototypeEntry>,
}

#[derive(Serialize, Deserialize)]
struct PrototypeEntry {
    label: EmotionLabel,
    matrix: SpdMatrix,
}

pub fn save_model(model: &PrototypeModel, path: &Path) -> Result<(), IoError> {
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        kind: MODEL_KIND.into(),
        metric: model.prototypes.metric,
        dim: model.prototypes.dim(),
        descriptor: model.descriptor.clone(),
        label_set: model.label_set.clone(),
        prototypes: model
            .prototypes
            .prototypes
            .iter()
            .map(|(label, matrix)| PrototypeEntry {
                label: label.clone(),
                matrix: matrix.clone(),
            })
            .collect(),
    };
    write_json(path, &file, false)
}

pub fn load_model(path: &Path) -> Result<PrototypeModel, IoError> {
    let origin = origin_of(path);
    let file: ModelFile = read_json(path, Some(MODEL_KIND))?;
    let mut prototypes = BTreeMap::new();
    for (i, p) in file.prototypes.into_iter().enumerate() {
        let cite = |msg: String| IoError::parse(origin.clone(), format!("prototype {i} ({}): {msg}", p.label));
        if !file.label_set.contains(&p.label) {
            return Err(cite("label is not in label_set".into()));
        }
        if p.matrix.dim() != file.dim {
            return Err(cite(format!("dimension {} differs from dim {}", p.matrix.dim(), file.dim)));
        }
        if prototypes.contains_key(&p.label) {
            return Err(cite("duplicate label".into()));
        }
        prototypes.insert(p.label, p.matrix);
    }
    if prototypes.is_empty() {
        return Err(IoError::parse(origin, "model has no prototypes"));
    }
    Ok(PrototypeModel {
        descriptor: file.descriptor,
        label_set: file.label_set,
        prototypes: PrototypeSet {
            prototypes,
            metric: file.metric,
        },
    })
}

/// Labeled descriptors with the settings they were extracted with.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub descriptor: DescriptorConfig,
    pub label_set: LabelSet,
    pub items: Vec<LabeledDescriptor>,
}

#[derive(Serialize, Deserialize)]
struct DescriptorFile {
    schema_version: u32,
    kind: String,
    descriptor: DescriptorConfig,
    label_set: LabelSet,
    items: Vec<LabeledDescriptor>,
}

pub fn save_descriptors(set: &DescriptorSet, path: &Path) -> Result<(), IoError> {
    let file = DescriptorFile {
        schema_version: SCHEMA_VERSION,
        kind: DESCRIPTORS_KIND.into(),
        descriptor: set.descriptor.clone(),
        label_set: set.label_set.clone(),
        items: set.items.clone(),
    };
    write_json(path, &file, false)
}

pub fn load_descriptors(path: &Path) -> Result<DescriptorSet, IoError> {
    let origin = origin_of(path);
    let file: DescriptorFile = read_json(path, Some(DESCRIPTORS_KIND))?;
    let dim = file.items.first().map(LabeledDescriptor::dim);
    for (i, d) in file.items.iter().enumerate() {
        let cite = |msg: String| {
            IoError::parse(origin.clone(), format!("item {i} ({}): {msg}", d.descriptor.source_id))
        };
        if !file.label_set.contains(&d.label) {
            return Err(cite(format!("label {} is not in label_set", d.label)));
        }
        if Some(d.dim()) != dim {
            return Err(cite(format!("dimension {} differs from the first item's", d.dim())));
        }
        if d.subject_id.is_empty() {
            return Err(cite("empty subject_id".into()));
        }
    }
    Ok(DescriptorSet {
        descriptor: file.descriptor,
        label_set: file.label_set,
        items: file.items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::build_prototypes;
    use crate::motion::MotionDescriptor;
    use crate::spd::SymMatrix;

    fn item(label: &str, subject: &str, d: [f64; 3]) -> LabeledDescriptor {
        let s = SymMatrix::from_fn(3, |i, j| if i == j { d[i] } else { 1e-7 / 3.0 });
        LabeledDescriptor {
            descriptor: MotionDescriptor {
                covariance: SpdMatrix::new(s).unwrap(),
                source_id: format!("{subject}_{label}"),
                window: (0, 5),
            },
            label: LabelSet::default().parse(label).unwrap(),
            subject_id: subject.into(),
        }
    }

    fn items() -> Vec<LabeledDescriptor> {
        vec![
            item("anger", "s1", [2.0, 1.0 / 7.0, 1e-5]),
            item("anger", "s2", [3.0, 0.2, 2e-5]),
            item("joy", "s1", [0.5, 0.3, 0.7]),
        ]
    }

    #[test]
    fn model_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = PrototypeModel {
            descriptor: DescriptorConfig::new(vec![0, 1, 2, 3]),
            label_set: LabelSet::default(),
            prototypes: build_prototypes(&items(), Metric::Lerm).unwrap(),
        };
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn descriptor_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let set = DescriptorSet {
            descriptor: DescriptorConfig::new(vec![0]),
            label_set: LabelSet::default(),
            items: items(),
        };
        save_descriptors(&set, &path).unwrap();
        assert_eq!(load_descriptors(&path).unwrap(), set);
    }

    #[test]
    fn model_rejects_wrong_kind_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let set = DescriptorSet {
            descriptor: DescriptorConfig::new(vec![0]),
            label_set: LabelSet::default(),
            items: items(),
        };
        save_descriptors(&set, &path).unwrap();
        assert!(matches!(load_model(&path), Err(IoError::Parse { .. })));

        let text = std::fs::read_to_string(&path).unwrap().replace("\"schema_version\":1", "\"schema_version\":9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_descriptors(&path),
            Err(IoError::SchemaVersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn model_rejects_non_spd_prototype() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let text = r#"{"schema_version":1,"kind":"prototype_model","metric":"lerm","dim":2,
            "descriptor":{"torso_joints":[0]},"label_set":["joy"],
            "prototypes":[{"label":"joy","matrix":{"dim":2,"packed":[1.0,2.0,1.0]}}]}"#;
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_model(&path), Err(IoError::Parse { line: Some(_), .. })));
    }
}
