//! Nearest-prototype and k-nearest-neighbour classification of covariance
//! descriptors.
//!
//! A class prototype is the log-Euclidean mean of the class's training
//! descriptors. Both supported distances reduce to a Frobenius distance after
//! a per-metric embedding (the matrix logarithm for LERM, the identity for
//! Frobenius), so descriptors can be embedded once and compared many times.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::EmotionLabel;
use crate::motion::MotionDescriptor;
use crate::spd::{canonical_mean, spd_exp, spd_log, SpdError, SpdMatrix, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("no training descriptors")]
    EmptyInput,
    #[error("descriptor dimension {found} does not match the expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} exceeds the {available} available training descriptors")]
    KTooLarge { k: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("training descriptor {index} has an empty subject id")]
    EmptySubject { index: usize },
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// Distance used to compare descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Log-Euclidean: `‖log A − log B‖_F`.
    Lerm,
    /// `‖A − B‖_F`.
    Frobenius,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Lerm => "lerm",
            Metric::Frobenius => "frobenius",
        }
    }

    /// Maps a matrix into the space where this metric is a Frobenius distance.
    pub fn embed(self, c: &SpdMatrix) -> Result<SymMatrix, SpdError> {
        match self {
            Metric::Lerm => spd_log(c),
            Metric::Frobenius => Ok(c.as_sym().clone()),
        }
    }

    pub fn distance(self, a: &SpdMatrix, b: &SpdMatrix) -> Result<f64, SpdError> {
        a.as_sym().check_dim(b.as_sym())?;
        self.embed(a)?.frobenius_distance(&self.embed(b)?)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lerm" => Ok(Metric::Lerm),
            "frobenius" => Ok(Metric::Frobenius),
            other => Err(format!("unknown metric {other:?} (expected lerm or frobenius)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDescriptor {
    pub descriptor: MotionDescriptor,
    pub label: EmotionLabel,
    pub subject_id: String,
}

impl LabeledDescriptor {
    pub fn dim(&self) -> usize {
        self.descriptor.dim()
    }
}

/// One prototype matrix per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub prototypes: BTreeMap<EmotionLabel, SpdMatrix>,
    /// Distance the set was built to be queried with.
    pub metric: Metric,
}

impl PrototypeSet {
    pub fn dim(&self) -> usize {
        self.prototypes.values().next().map_or(0, SpdMatrix::dim)
    }

    pub fn labels(&self) -> impl Iterator<Item = &EmotionLabel> {
        self.prototypes.keys()
    }

    pub fn get(&self, label: &EmotionLabel) -> Option<&SpdMatrix> {
        self.prototypes.get(label)
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }
}

fn check_training(train: &[LabeledDescriptor]) -> Result<usize, ClassifyError> {
    let dim = train.first().ok_or(ClassifyError::EmptyInput)?.dim();
    for (index, d) in train.iter().enumerate() {
        if d.dim() != dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: dim,
                found: d.dim(),
            });
        }
        if d.subject_id.is_empty() {
            return Err(ClassifyError::EmptySubject { index });
        }
    }
    Ok(dim)
}

/// Log-Euclidean mean of each label's training descriptors.
pub fn build_prototypes(
    train: &[LabeledDescriptor],
    metric: Metric,
) -> Result<PrototypeSet, ClassifyError> {
    check_training(train)?;
    let logs = train
        .iter()
        .map(|d| spd_log(&d.descriptor.covariance))
        .collect::<Result<Vec<_>, _>>()?;
    prototypes_from_logs(train.iter().map(|d| &d.label).zip(&logs), metric)
}

/// Per-label mean of already-computed matrix logarithms.
fn log_means<'a>(
    items: impl IntoIterator<Item = (&'a EmotionLabel, &'a SymMatrix)>,
) -> Result<BTreeMap<EmotionLabel, SymMatrix>, ClassifyError> {
    let mut groups: BTreeMap<&EmotionLabel, Vec<&SymMatrix>> = BTreeMap::new();
    for (label, log) in items {
        groups.entry(label).or_default().push(log);
    }
    if groups.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    groups
        .into_iter()
        .map(|(label, logs)| Ok((label.clone(), canonical_mean(logs.iter().copied())?)))
        .collect()
}

/// Builds prototypes from already-computed matrix logarithms.
fn prototypes_from_logs<'a>(
    items: impl IntoIterator<Item = (&'a EmotionLabel, &'a SymMatrix)>,
    metric: Metric,
) -> Result<PrototypeSet, ClassifyError> {
    let prototypes = log_means(items)?
        .into_iter()
        .map(|(label, mean)| Ok((label, spd_exp(&mean)?)))
        .collect::<Result<_, SpdError>>()?;
    Ok(PrototypeSet { prototypes, metric })
}

/// Result of a nearest-prototype query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: EmotionLabel,
    /// Every prototype's distance, nearest first; ties in label order.
    pub ranked: Vec<(EmotionLabel, f64)>,
}

/// Prototypes embedded once for repeated queries.
#[derive(Debug, Clone)]
pub struct PreparedPrototypes {
    metric: Metric,
    dim: usize,
    entries: Vec<(EmotionLabel, SymMatrix)>,
}

impl PreparedPrototypes {
    pub fn new(pems: &PrototypeSet, metric: Metric) -> Result<Self, ClassifyError> {
        let entries = pems
            .prototypes
            .iter()
            .map(|(l, p)| Ok((l.clone(), metric.embed(p)?)))
            .collect::<Result<Vec<_>, SpdError>>()?;
        if entries.is_empty() {
            return Err(ClassifyError::EmptyInput);
        }
        Ok(PreparedPrototypes {
            metric,
            dim: pems.dim(),
            entries,
        })
    }

    /// Same prototypes as [`build_prototypes`] followed by [`PreparedPrototypes::new`],
    /// from matrix logarithms. Under LERM the mean logarithm is the embedding,
    /// so no exp/log round trip is made.
    pub(crate) fn from_logs<'a>(
        items: impl IntoIterator<Item = (&'a EmotionLabel, &'a SymMatrix)>,
        metric: Metric,
    ) -> Result<Self, ClassifyError> {
        let means = log_means(items)?;
        let dim = means.values().next().map_or(0, SymMatrix::dim);
        let entries = means
            .into_iter()
            .map(|(label, mean)| {
                let embedded = match metric {
                    Metric::Lerm => mean,
                    Metric::Frobenius => spd_exp(&mean)?.into_sym(),
                };
                Ok((label, embedded))
            })
            .collect::<Result<Vec<_>, SpdError>>()?;
        Ok(PreparedPrototypes { metric, dim, entries })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Ranks prototypes against a query already embedded with [`Metric::embed`].
    pub fn rank_embedded(&self, query: &SymMatrix) -> Result<Prediction, ClassifyError> {
        if query.dim() != self.dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim,
                found: query.dim(),
            });
        }
        let mut ranked = self
            .entries
            .iter()
            .map(|(l, p)| Ok((l.clone(), query.frobenius_distance(p)?)))
            .collect::<Result<Vec<_>, SpdError>>()?;
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Prediction {
            label: ranked[0].0.clone(),
            ranked,
        })
    }

    pub fn classify(&self, c: &SpdMatrix) -> Result<Prediction, ClassifyError> {
        if c.dim() != self.dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim,
                found: c.dim(),
            });
        }
        self.rank_embedded(&self.metric.embed(c)?)
    }
}

/// Label of the nearest prototype under `metric`, plus the full ranking.
pub fn classify_prototype(
    c: &SpdMatrix,
    pems: &PrototypeSet,
    metric: Metric,
) -> Result<Prediction, ClassifyError> {
    PreparedPrototypes::new(pems, metric)?.classify(c)
}

/// Embedded training set for k-NN queries.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    metric: Metric,
    k: usize,
    dim: usize,
    entries: Vec<(EmotionLabel, SymMatrix)>,
}

impl KnnIndex {
    pub fn new(train: &[LabeledDescriptor], k: usize, metric: Metric) -> Result<Self, ClassifyError> {
        check_training(train)?;
        let entries = train
            .iter()
            .map(|d| Ok((d.label.clone(), metric.embed(&d.descriptor.covariance)?)))
            .collect::<Result<Vec<_>, SpdError>>()?;
        Self::from_embedded(entries, k, metric)
    }

    /// `entries` must already be embedded with `metric`.
    pub fn from_embedded(
        entries: Vec<(EmotionLabel, SymMatrix)>,
        k: usize,
        metric: Metric,
    ) -> Result<Self, ClassifyError> {
        if k == 0 {
            return Err(ClassifyError::ZeroK);
        }
        let dim = entries.first().ok_or(ClassifyError::EmptyInput)?.1.dim();
        if k > entries.len() {
            return Err(ClassifyError::KTooLarge {
                k,
                available: entries.len(),
            });
        }
        if let Some((_, m)) = entries.iter().find(|(_, m)| m.dim() != dim) {
            return Err(ClassifyError::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        Ok(KnnIndex {
            metric,
            k,
            dim,
            entries,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    fn check_query(&self, query: &SymMatrix) -> Result<(), ClassifyError> {
        if query.dim() != self.dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim,
                found: query.dim(),
            });
        }
        Ok(())
    }

    /// Majority label among the k nearest. Distance ties are ordered by label,
    /// then training index; vote ties go to the lexicographically smaller label.
    pub fn classify_embedded(&self, query: &SymMatrix) -> Result<EmotionLabel, ClassifyError> {
        Ok(self.classify_many(std::slice::from_ref(query))?.remove(0))
    }

    /// [`KnnIndex::classify_embedded`] for several queries, reading each
    /// training matrix once for the whole batch.
    pub fn classify_many(&self, queries: &[SymMatrix]) -> Result<Vec<EmotionLabel>, ClassifyError> {
        for q in queries {
            self.check_query(q)?;
        }
        let mut table = vec![Vec::with_capacity(self.entries.len()); queries.len()];
        for (_, m) in &self.entries {
            for (q, row) in queries.iter().zip(&mut table) {
                row.push(q.frobenius_distance(m)?);
            }
        }
        Ok(table.iter().map(|row| self.vote(row)).collect())
    }

    fn vote(&self, dists: &[f64]) -> EmotionLabel {
        let mut order: Vec<(f64, &EmotionLabel, usize)> = dists
            .iter()
            .zip(&self.entries)
            .enumerate()
            .map(|(i, (&d, (l, _)))| (d, l, i))
            .collect();
        order.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| a.1.cmp(b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut votes: BTreeMap<&EmotionLabel, usize> = BTreeMap::new();
        for (_, l, _) in order.iter().take(self.k) {
            *votes.entry(l).or_default() += 1;
        }
        // Votes come in label order; a later label needs strictly more votes to win.
        let (label, _) = votes
            .into_iter()
            .fold(None::<(&EmotionLabel, usize)>, |best, (l, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((l, n)),
            })
            .expect("k >= 1");
        label.clone()
    }

    pub fn classify(&self, c: &SpdMatrix) -> Result<EmotionLabel, ClassifyError> {
        self.check_query(c.as_sym())?;
        self.classify_embedded(&self.metric.embed(c)?)
    }
}

/// k-nearest-neighbour label of `c` among `train`.
pub fn classify_knn(
    c: &SpdMatrix,
    train: &[LabeledDescriptor],
    k: usize,
    metric: Metric,
) -> Result<EmotionLabel, ClassifyError> {
    KnnIndex::new(train, k, metric)?.classify(c)
}
