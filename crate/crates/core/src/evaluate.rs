//! Leave-one-subject-out cross-validation.
//!
//! Each fold holds out every sequence of one subject, trains on the rest and
//! classifies the held-out sequences. Per-fold confusion matrices are pooled
//! by summing raw counts, which is the same as weighting each fold's rates by
//! its number of test samples.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    ClassifyError, KnnIndex, LabeledDescriptor, Metric, PreparedPrototypes,
};
use crate::labels::{EmotionLabel, LabelSet};
use crate::spd::{spd_log, SpdError, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("leave-one-subject-out needs at least two subjects, found {found}")]
    SingleSubject { found: usize },
    #[error("confusion matrices have different label orders")]
    LabelMismatch,
    #[error("label {0:?} is not part of the experiment's label set")]
    UnknownLabel(String),
    #[error("fold for subject {subject:?}: training data has no samples of {missing:?}")]
    MissingClassInTraining {
        subject: String,
        missing: Vec<String>,
    },
    #[error("fold for subject {0:?} shares a subject between train and test")]
    SubjectLeak(String),
    #[error("pooled fold counts disagree with the concatenated predictions")]
    AggregationMismatch,
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

impl From<SpdError> for EvalError {
    fn from(e: SpdError) -> Self {
        EvalError::Classify(ClassifyError::Spd(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub held_out_subject: String,
    /// Dataset indices of the held-out subject's sequences.
    pub test: Vec<usize>,
    pub train: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// One fold per distinct subject, in sorted subject order.
pub fn plan_loso(dataset: &[LabeledDescriptor]) -> Result<FoldPlan, EvalError> {
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in dataset.iter().enumerate() {
        by_subject.entry(d.subject_id.as_str()).or_default().push(i);
    }
    if by_subject.len() < 2 {
        return Err(EvalError::SingleSubject {
            found: by_subject.len(),
        });
    }
    let folds = by_subject
        .iter()
        .map(|(&subject, test)| Fold {
            held_out_subject: subject.to_string(),
            test: test.clone(),
            train: (0..dataset.len())
                .filter(|&i| dataset[i].subject_id != subject)
                .collect(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

/// Counts of (true, predicted) pairs; rows are true labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<EmotionLabel>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: &LabelSet) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels: labels.labels().to_vec(),
            counts: vec![vec![0; n]; n],
        }
    }

    /// From explicit counts, e.g. to re-derive a published table.
    pub fn from_counts(labels: &LabelSet, counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(EvalError::LabelMismatch);
        }
        Ok(ConfusionMatrix {
            labels: labels.labels().to_vec(),
            counts,
        })
    }

    pub fn from_pairs<'a>(
        labels: &LabelSet,
        pairs: impl IntoIterator<Item = (&'a EmotionLabel, &'a EmotionLabel)>,
    ) -> Result<Self, EvalError> {
        let mut m = Self::new(labels);
        for (t, p) in pairs {
            m.record(t, p)?;
        }
        Ok(m)
    }

    fn index(&self, l: &EmotionLabel) -> Result<usize, EvalError> {
        self.labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| EvalError::UnknownLabel(l.to_string()))
    }

    pub fn record(&mut self, truth: &EmotionLabel, predicted: &EmotionLabel) -> Result<(), EvalError> {
        let (i, j) = (self.index(truth)?, self.index(predicted)?);
        self.counts[i][j] += 1;
        Ok(())
    }

    pub fn labels(&self) -> &[EmotionLabel] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.row_total(i)).sum()
    }

    /// Row-normalized rates; `None` for a label with no test samples.
    pub fn row_rates(&self, i: usize) -> Option<Vec<f64>> {
        let total = self.row_total(i);
        (total > 0).then(|| {
            self.counts[i]
                .iter()
                .map(|&c| c as f64 / total as f64)
                .collect()
        })
    }

    pub fn rates(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.labels.len()).map(|i| self.row_rates(i)).collect()
    }

    pub fn per_class_accuracy(&self) -> Vec<(EmotionLabel, Option<f64>)> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), self.row_rates(i).map(|r| r[i])))
            .collect()
    }

    /// Unweighted mean of the diagonal rates over labels that were tested.
    pub fn average_accuracy(&self) -> Option<f64> {
        let diag: Vec<f64> = self
            .per_class_accuracy()
            .into_iter()
            .filter_map(|(_, a)| a)
            .collect();
        (!diag.is_empty()).then(|| macro_average(&diag))
    }
}

/// Plain mean of per-class accuracies.
pub fn macro_average(per_class: &[f64]) -> f64 {
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

/// Pools per-fold counts. Folds must share one label order.
pub fn aggregate_confusions(per_fold: &[ConfusionMatrix]) -> Result<ConfusionMatrix, EvalError> {
    let first = per_fold.first().ok_or(EvalError::LabelMismatch)?;
    let mut out = first.clone();
    for m in &per_fold[1..] {
        if m.labels != out.labels {
            return Err(EvalError::LabelMismatch);
        }
        for (ro, rm) in out.counts.iter_mut().zip(&m.counts) {
            for (o, c) in ro.iter_mut().zip(rm) {
                *o += c;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Nearest log-Euclidean class mean.
    Prototype,
    /// k nearest training descriptors.
    Knn,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Prototype => "prototype",
            Mode::Knn => "knn",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "prototype" => Ok(Mode::Prototype),
            "knn" => Ok(Mode::Knn),
            other => Err(format!("unknown mode {other:?} (expected prototype or knn)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub mode: Mode,
    pub metric: Metric,
    /// Neighbour count; only meaningful for [`Mode::Knn`].
    pub k: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            mode: Mode::Prototype,
            metric: Metric::Lerm,
            k: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CrossvalOptions {
    /// Evaluate folds on the rayon pool. Results are identical either way.
    pub parallel: bool,
    /// Fail instead of flagging folds whose training data lacks a tested label.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub source_id: String,
    pub truth: EmotionLabel,
    pub predicted: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub held_out_subject: String,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<PredictionRecord>,
    /// Labels present in the test set but absent from training.
    pub missing_labels: Vec<EmotionLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ClassifierConfig,
    pub folds: Vec<FoldOutcome>,
    pub overall: ConfusionMatrix,
    pub average_accuracy: f64,
    pub per_class_accuracy: Vec<(EmotionLabel, Option<f64>)>,
}

impl EvalReport {
    pub fn labels(&self) -> &[EmotionLabel] {
        self.overall.labels()
    }

    pub fn flagged_folds(&self) -> impl Iterator<Item = &FoldOutcome> {
        self.folds.iter().filter(|f| !f.missing_labels.is_empty())
    }

    /// Every (true, predicted) pair in fold order.
    pub fn all_predictions(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.folds.iter().flat_map(|f| f.predictions.iter())
    }
}

enum Trained {
    Prototype(PreparedPrototypes),
    Knn(KnnIndex),
}

/// A dataset with every descriptor's matrix logarithm computed once, for
/// running several configurations on the same data.
#[derive(Debug, Clone)]
pub struct PreparedDataset<'a> {
    items: &'a [LabeledDescriptor],
    logs: Vec<SymMatrix>,
}

impl<'a> PreparedDataset<'a> {
    pub fn new(items: &'a [LabeledDescriptor], parallel: bool) -> Result<Self, EvalError> {
        let log = |d: &LabeledDescriptor| spd_log(&d.descriptor.covariance);
        let logs = if parallel {
            items.par_iter().map(log).collect::<Result<Vec<_>, _>>()?
        } else {
            items.iter().map(log).collect::<Result<Vec<_>, _>>()?
        };
        Ok(PreparedDataset { items, logs })
    }

    pub fn items(&self) -> &'a [LabeledDescriptor] {
        self.items
    }

    /// Leave-one-subject-out evaluation of one classifier configuration.
    pub fn crossval(
        &self,
        labels: &LabelSet,
        config: &ClassifierConfig,
        options: CrossvalOptions,
    ) -> Result<EvalReport, EvalError> {
        let frobenius: Vec<SymMatrix>;
        let queries = match config.metric {
            Metric::Lerm => &self.logs,
            Metric::Frobenius => {
                frobenius = self
                    .items
                    .iter()
                    .map(|d| d.descriptor.covariance.as_sym().clone())
                    .collect();
                &frobenius
            }
        };
        crossval_embedded(self.items, &self.logs, queries, labels, config, options)
    }
}

fn run_fold(
    dataset: &[LabeledDescriptor],
    labels: &LabelSet,
    fold: &Fold,
    logs: &[SymMatrix],
    queries: &[SymMatrix],
    config: &ClassifierConfig,
    strict: bool,
) -> Result<FoldOutcome, EvalError> {
    let train_subjects: BTreeSet<&str> = fold
        .train
        .iter()
        .map(|&i| dataset[i].subject_id.as_str())
        .collect();
    if fold
        .test
        .iter()
        .any(|&i| train_subjects.contains(dataset[i].subject_id.as_str()))
    {
        return Err(EvalError::SubjectLeak(fold.held_out_subject.clone()));
    }

    let trained_labels: BTreeSet<&EmotionLabel> =
        fold.train.iter().map(|&i| &dataset[i].label).collect();
    let missing: Vec<EmotionLabel> = fold
        .test
        .iter()
        .map(|&i| &dataset[i].label)
        .filter(|l| !trained_labels.contains(l))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    if strict && !missing.is_empty() {
        return Err(EvalError::MissingClassInTraining {
            subject: fold.held_out_subject.clone(),
            missing: missing.iter().map(|l| l.to_string()).collect(),
        });
    }

    let trained = match config.mode {
        Mode::Prototype => Trained::Prototype(PreparedPrototypes::from_logs(
            fold.train.iter().map(|&i| (&dataset[i].label, &logs[i])),
            config.metric,
        )?),
        Mode::Knn => Trained::Knn(KnnIndex::from_embedded(
            fold.train
                .iter()
                .map(|&i| (dataset[i].label.clone(), queries[i].clone()))
                .collect(),
            config.k,
            config.metric,
        )?),
    };

    let predicted: Vec<EmotionLabel> = match &trained {
        Trained::Prototype(p) => fold
            .test
            .iter()
            .map(|&i| Ok(p.rank_embedded(&queries[i])?.label))
            .collect::<Result<_, ClassifyError>>()?,
        Trained::Knn(k) => {
            let batch: Vec<SymMatrix> = fold.test.iter().map(|&i| queries[i].clone()).collect();
            k.classify_many(&batch)?
        }
    };
    let mut confusion = ConfusionMatrix::new(labels);
    let mut predictions = Vec::with_capacity(fold.test.len());
    for (&i, predicted) in fold.test.iter().zip(predicted) {
        confusion.record(&dataset[i].label, &predicted)?;
        predictions.push(PredictionRecord {
            source_id: dataset[i].descriptor.source_id.clone(),
            truth: dataset[i].label.clone(),
            predicted,
        });
    }
    Ok(FoldOutcome {
        held_out_subject: fold.held_out_subject.clone(),
        confusion,
        predictions,
        missing_labels: missing,
    })
}

fn crossval_embedded(
    dataset: &[LabeledDescriptor],
    logs: &[SymMatrix],
    queries: &[SymMatrix],
    labels: &LabelSet,
    config: &ClassifierConfig,
    options: CrossvalOptions,
) -> Result<EvalReport, EvalError> {
    if let Some(d) = dataset.iter().find(|d| !labels.contains(&d.label)) {
        return Err(EvalError::UnknownLabel(d.label.to_string()));
    }
    if config.mode == Mode::Knn && config.k == 0 {
        return Err(ClassifyError::ZeroK.into());
    }
    let plan = plan_loso(dataset)?;

    let run = |fold: &Fold| run_fold(dataset, labels, fold, logs, queries, config, options.strict);
    let folds: Vec<FoldOutcome> = if options.parallel {
        plan.folds.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        plan.folds.iter().map(run).collect::<Result<_, _>>()?
    };

    let per_fold: Vec<ConfusionMatrix> = folds.iter().map(|f| f.confusion.clone()).collect();
    let overall = aggregate_confusions(&per_fold)?;
    let pooled = ConfusionMatrix::from_pairs(
        labels,
        folds
            .iter()
            .flat_map(|f| f.predictions.iter().map(|p| (&p.truth, &p.predicted))),
    )?;
    if pooled != overall {
        return Err(EvalError::AggregationMismatch);
    }

    Ok(EvalReport {
        config: *config,
        average_accuracy: overall.average_accuracy().unwrap_or(0.0),
        per_class_accuracy: overall.per_class_accuracy(),
        overall,
        folds,
    })
}

/// Leave-one-subject-out evaluation of one classifier configuration.
pub fn run_crossval(
    dataset: &[LabeledDescriptor],
    labels: &LabelSet,
    config: &ClassifierConfig,
    options: CrossvalOptions,
) -> Result<EvalReport, EvalError> {
    if config.mode == Mode::Knn && config.metric == Metric::Frobenius {
        let raw: Vec<SymMatrix> = dataset
            .iter()
            .map(|d| d.descriptor.covariance.as_sym().clone())
            .collect();
        return crossval_embedded(dataset, &[], &raw, labels, config, options);
    }
    PreparedDataset::new(dataset, options.parallel)?.crossval(labels, config, options)
}
