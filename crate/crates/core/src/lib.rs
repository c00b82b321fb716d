//! Emotion recognition from skeleton motion with covariance descriptors on
//! the manifold of symmetric positive definite matrices.
//!
//! A walk becomes the covariance of its per-frame posture and velocity
//! vectors. Classes are summarized by log-Euclidean means of their training
//! descriptors, and a new walk gets the label of the nearest mean under the
//! log-Euclidean distance.

pub mod classify;
pub mod evaluate;
pub mod io;
pub mod labels;
pub mod motion;
pub mod spd;
pub mod synth;

use thiserror::Error;

/// Any failure of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spd(#[from] spd::SpdError),
    #[error(transparent)]
    Label(#[from] labels::LabelError),
    #[error(transparent)]
    Feature(#[from] motion::FeatureError),
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Eval(#[from] evaluate::EvalError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

impl Error {
    /// True for numerical failures (non-SPD input, non-convergence,
    /// overflow); false for malformed or inconsistent data.
    pub fn is_numeric(&self) -> bool {
        let spd = match self {
            Error::Spd(e) => Some(e),
            Error::Feature(motion::FeatureError::Spd(e)) => Some(e),
            Error::Classify(classify::ClassifyError::Spd(e)) => Some(e),
            Error::Eval(evaluate::EvalError::Classify(classify::ClassifyError::Spd(e))) => Some(e),
            Error::Io(e) => return e.is_numeric(),
            _ => None,
        };
        spd.is_some_and(spd::SpdError::is_numeric)
    }
}
