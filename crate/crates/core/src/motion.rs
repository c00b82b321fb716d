//! From joint trajectories to covariance descriptors.
//!
//! A sequence of `N_J` joints becomes, per frame, the `6·N_J` vector
//! `[p(t), v(t)]` of (normalized) joint coordinates followed by their
//! frame-to-frame displacement, with `v(0) = 0`. The descriptor is the sample
//! covariance of those vectors over the observation window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::EmotionLabel;
use crate::spd::{dot, regularize, sym_eig, Epsilon, SpdError, SpdMatrix, SymMatrix};

/// Fraction of the largest torso variance below which the second principal
/// variance counts as zero (collinear or coincident torso points).
const TORSO_RANK_TOL: f64 = 1e-10;

/// Relative magnitude a torso joint's projection needs to fix an axis sign.
const AXIS_SIGN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("sequence has {found} frames; at least 2 are required")]
    TooFewFrames { found: usize },
    #[error("frame {frame} has {found} coordinates, expected {expected}")]
    JointCountMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame}, coordinate {coordinate} is not finite")]
    NonFiniteValue { frame: usize, coordinate: usize },
    #[error("joint count must be positive")]
    NoJoints,
    #[error("frame rate {0} is not a positive finite number")]
    InvalidFps(f64),
    #[error("torso joint index {index} is out of range for {n_joints} joints")]
    JointIndexOutOfRange { index: usize, n_joints: usize },
    #[error("no torso joints given")]
    EmptyTorso,
    #[error("torso joints at the first frame span fewer than two dimensions")]
    DegenerateTorso,
    #[error("window [{start}, {end}) does not fit a sequence of {n_frames} frames")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        n_frames: usize,
    },
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// Per-frame joint coordinates of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    id: String,
    subject_id: String,
    label: Option<EmotionLabel>,
    n_joints: usize,
    fps: f64,
    /// Index of `coords`' first frame in the original recording.
    frame_offset: usize,
    /// `n_frames × 3·n_joints`, row-major.
    coords: Vec<f64>,
}

impl SkeletonSequence {
    pub fn new(
        id: impl Into<String>,
        subject_id: impl Into<String>,
        label: Option<EmotionLabel>,
        n_joints: usize,
        fps: f64,
        frames: Vec<Vec<f64>>,
    ) -> Result<Self, FeatureError> {
        let stride = 3 * n_joints;
        let mut coords = Vec::with_capacity(frames.len() * stride);
        for (t, f) in frames.iter().enumerate() {
            if f.len() != stride {
                return Err(FeatureError::JointCountMismatch {
                    frame: t,
                    expected: stride,
                    found: f.len(),
                });
            }
            coords.extend_from_slice(f);
        }
        Self::from_flat(id, subject_id, label, n_joints, fps, coords)
    }

    /// `coords` holds frames back to back, `3·n_joints` values each.
    pub fn from_flat(
        id: impl Into<String>,
        subject_id: impl Into<String>,
        label: Option<EmotionLabel>,
        n_joints: usize,
        fps: f64,
        coords: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if n_joints == 0 {
            return Err(FeatureError::NoJoints);
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(FeatureError::InvalidFps(fps));
        }
        let stride = 3 * n_joints;
        if coords.len() % stride != 0 {
            return Err(FeatureError::JointCountMismatch {
                frame: coords.len() / stride,
                expected: stride,
                found: coords.len() % stride,
            });
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteValue {
                frame: i / stride,
                coordinate: i % stride,
            });
        }
        let n_frames = coords.len() / stride;
        if n_frames < 2 {
            return Err(FeatureError::TooFewFrames { found: n_frames });
        }
        Ok(SkeletonSequence {
            id: id.into(),
            subject_id: subject_id.into(),
            label,
            n_joints,
            fps,
            frame_offset: 0,
            coords,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn label(&self) -> Option<&EmotionLabel> {
        self.label.as_ref()
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn n_frames(&self) -> usize {
        self.coords.len() / (3 * self.n_joints)
    }

    /// `(first, one past last)` frame indices relative to the original recording.
    pub fn frame_range(&self) -> (usize, usize) {
        (self.frame_offset, self.frame_offset + self.n_frames())
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let stride = 3 * self.n_joints;
        &self.coords[t * stride..(t + 1) * stride]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(3 * self.n_joints)
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let f = self.frame(t);
        [f[3 * j], f[3 * j + 1], f[3 * j + 2]]
    }

    /// Applies `f` to every joint position of every frame.
    pub fn map_points(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self, FeatureError> {
        let mut coords = self.coords.clone();
        for p in coords.chunks_exact_mut(3) {
            let q = f([p[0], p[1], p[2]]);
            p.copy_from_slice(&q);
        }
        let mut out = Self::from_flat(
            self.id.clone(),
            self.subject_id.clone(),
            self.label.clone(),
            self.n_joints,
            self.fps,
            coords,
        )?;
        out.frame_offset = self.frame_offset;
        Ok(out)
    }

    /// Frames `[start, start + len)`; `len = None` runs to the end.
    pub fn window(&self, start: usize, len: Option<usize>) -> Result<Self, FeatureError> {
        let n = self.n_frames();
        let end = len.map_or(n, |l| start.saturating_add(l));
        if start >= n || end > n || end <= start {
            return Err(FeatureError::WindowOutOfRange {
                start,
                end,
                n_frames: n,
            });
        }
        if end - start < 2 {
            return Err(FeatureError::TooFewFrames { found: end - start });
        }
        let stride = 3 * self.n_joints;
        Ok(SkeletonSequence {
            id: self.id.clone(),
            subject_id: self.subject_id.clone(),
            label: self.label.clone(),
            n_joints: self.n_joints,
            fps: self.fps,
            frame_offset: self.frame_offset + start,
            coords: self.coords[start * stride..end * stride].to_vec(),
        })
    }
}

/// Skeleton-centred coordinate system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationFrame {
    pub origin: [f64; 3],
    /// `axes[k]` is the k-th basis vector (the k-th column of the basis matrix).
    pub axes: [[f64; 3]; 3],
}

impl NormalizationFrame {
    pub fn identity() -> Self {
        NormalizationFrame {
            origin: [0.0; 3],
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// `basisᵀ · (x − origin)`.
    #[inline]
    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let d = [
            x[0] - self.origin[0],
            x[1] - self.origin[1],
            x[2] - self.origin[2],
        ];
        self.axes.map(|a| dot3(a, d))
    }
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn check_joints(joints: &[usize], n_joints: usize) -> Result<(), FeatureError> {
    if joints.is_empty() {
        return Err(FeatureError::EmptyTorso);
    }
    if let Some(&index) = joints.iter().find(|&&j| j >= n_joints) {
        return Err(FeatureError::JointIndexOutOfRange { index, n_joints });
    }
    Ok(())
}

/// Principal axes of the torso joints at the first frame.
///
/// Axes are ordered by decreasing variance. Each of the first two is oriented
/// so that the first torso joint (in the given order) with a non-negligible
/// projection onto it projects positively; the third is their cross product.
/// The orientation therefore depends only on the body's own geometry, which
/// makes the frame follow any rigid motion of the whole sequence.
pub fn torso_frame(
    seq: &SkeletonSequence,
    torso_joints: &[usize],
) -> Result<NormalizationFrame, FeatureError> {
    check_joints(torso_joints, seq.n_joints())?;
    let pts: Vec<[f64; 3]> = torso_joints.iter().map(|&j| seq.joint(0, j)).collect();
    let n = pts.len() as f64;
    let mut origin = [0.0; 3];
    for p in &pts {
        for k in 0..3 {
            origin[k] += p[k];
        }
    }
    origin = origin.map(|v| v / n);
    let centered: Vec<[f64; 3]> = pts
        .iter()
        .map(|p| [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]])
        .collect();

    let scatter = SymMatrix::from_fn(3, |a, b| {
        centered.iter().map(|c| c[a] * c[b]).sum::<f64>() / n
    });
    let eig = sym_eig(&scatter)?;
    let vals = eig.values();
    if !(vals[0] > 0.0) || vals[1] <= TORSO_RANK_TOL * vals[0] {
        return Err(FeatureError::DegenerateTorso);
    }

    let mut axes = [[0.0; 3]; 3];
    for (k, axis) in axes.iter_mut().take(2).enumerate() {
        let v = eig.vector(k);
        let mut a = [v[0], v[1], v[2]];
        let proj: Vec<f64> = centered.iter().map(|c| dot3(a, *c)).collect();
        let largest = proj.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        if let Some(p) = proj.iter().find(|p| p.abs() > AXIS_SIGN_TOL * largest) {
            if *p < 0.0 {
                a = a.map(|x| -x);
            }
        }
        *axis = a;
    }
    axes[2] = cross3(axes[0], axes[1]);
    Ok(NormalizationFrame { origin, axes })
}

/// The per-frame `[p(t), v(t)]` vectors of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    dim: usize,
    /// `len × dim`, row-major.
    data: Vec<f64>,
    source_id: String,
    window: (usize, usize),
}

impl FeatureSequence {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    /// Multiplies every feature by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Posture/velocity features. With `norm`, every joint is first mapped into the
/// skeleton-centred frame; velocities are backward differences in that frame.
pub fn extract_features(
    seq: &SkeletonSequence,
    norm: Option<&NormalizationFrame>,
) -> Result<FeatureSequence, FeatureError> {
    let n = seq.n_frames();
    if n < 2 {
        return Err(FeatureError::TooFewFrames { found: n });
    }
    let half = 3 * seq.n_joints();
    let dim = 2 * half;
    let mut data = vec![0.0; n * dim];
    for (t, frame) in seq.frames().enumerate() {
        let row = &mut data[t * dim..t * dim + half];
        match norm {
            Some(nf) => {
                for (dst, src) in row.chunks_exact_mut(3).zip(frame.chunks_exact(3)) {
                    dst.copy_from_slice(&nf.apply([src[0], src[1], src[2]]));
                }
            }
            None => row.copy_from_slice(frame),
        }
    }
    for t in 1..n {
        let (prev, cur) = data.split_at_mut(t * dim);
        let prev_pos = &prev[(t - 1) * dim..(t - 1) * dim + half];
        let (pos, vel) = cur[..dim].split_at_mut(half);
        for ((v, p), q) in vel.iter_mut().zip(pos.iter()).zip(prev_pos) {
            *v = p - q;
        }
    }
    Ok(FeatureSequence {
        dim,
        data,
        source_id: seq.id().to_string(),
        window: seq.frame_range(),
    })
}

/// Unbiased sample covariance `(1/(n−1)) Σ (fᵢ−μ)(fᵢ−μ)ᵀ`, without regularization.
pub fn covariance_matrix(feats: &FeatureSequence) -> Result<SymMatrix, FeatureError> {
    let n = feats.len();
    if n < 2 {
        return Err(FeatureError::TooFewFrames { found: n });
    }
    let d = feats.dim();
    let mut mean = vec![0.0; d];
    for v in feats.vectors() {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // Centred data, one contiguous row per feature so each entry is a dot product.
    let mut cols = vec![0.0; d * n];
    for (t, v) in feats.vectors().enumerate() {
        for (i, (x, m)) in v.iter().zip(&mean).enumerate() {
            cols[i * n + t] = x - m;
        }
    }
    let denom = (n - 1) as f64;
    Ok(SymMatrix::from_fn(d, |i, j| {
        dot(&cols[i * n..(i + 1) * n], &cols[j * n..(j + 1) * n]) / denom
    }))
}

/// Covariance descriptor of one observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionDescriptor {
    pub covariance: SpdMatrix,
    pub source_id: String,
    /// `(first, one past last)` frame of the window.
    pub window: (usize, usize),
}

impl MotionDescriptor {
    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }
}

/// Sample covariance, shifted by `εI` when its smallest eigenvalue is at or
/// below ε so the result is always SPD.
pub fn covariance_descriptor(
    feats: &FeatureSequence,
    epsilon: Epsilon,
) -> Result<MotionDescriptor, FeatureError> {
    let cov = covariance_matrix(feats)?;
    let eps = epsilon.resolve(&cov)?;
    Ok(MotionDescriptor {
        covariance: regularize(&cov, eps)?,
        source_id: feats.source_id().to_string(),
        window: feats.window(),
    })
}

/// Torso normalization, features and covariance in one step.
pub fn describe_sequence(
    seq: &SkeletonSequence,
    torso_joints: &[usize],
    epsilon: Epsilon,
) -> Result<MotionDescriptor, FeatureError> {
    let frame = torso_frame(seq, torso_joints)?;
    let feats = extract_features(seq, Some(&frame))?;
    covariance_descriptor(&feats, epsilon)
}

/// Descriptor extraction settings shared by training, classification and
/// cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub torso_joints: Vec<usize>,
    #[serde(default)]
    pub epsilon: Epsilon,
    /// First frame of the observation window.
    #[serde(default)]
    pub window_start: usize,
    /// Window length in frames; `None` runs to the end of the sequence.
    #[serde(default)]
    pub window_len: Option<usize>,
}

impl DescriptorConfig {
    pub fn new(torso_joints: Vec<usize>) -> Self {
        DescriptorConfig {
            torso_joints,
            epsilon: Epsilon::default(),
            window_start: 0,
            window_len: None,
        }
    }

    pub fn describe(&self, seq: &SkeletonSequence) -> Result<MotionDescriptor, FeatureError> {
        if self.window_start == 0 && self.window_len.is_none() {
            describe_sequence(seq, &self.torso_joints, self.epsilon)
        } else {
            let w = seq.window(self.window_start, self.window_len)?;
            describe_sequence(&w, &self.torso_joints, self.epsilon)
        }
    }
}
