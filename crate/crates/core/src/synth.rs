//! Parametric synthetic gait with label-dependent dynamics.
//!
//! Each sequence is a stick figure whose limbs swing sinusoidally at the
//! label's stride frequency while the body walks a U-shaped path: a straight
//! leg, a half-circle turn to the left, and the way back. Subjects differ by
//! body size, gait scale, start pose and phase; repetitions add small jitter.
//!
//! Output is a pure function of the parameters and the seed. Every sequence
//! draws from its own ChaCha stream, so no sequence depends on generation
//! order.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{EmotionLabel, LabelSet};
use crate::motion::SkeletonSequence;

/// Joints with their own kinematics; any further joints are rigid markers.
pub const BASE_JOINTS: usize = 19;

/// Hips then shoulders: the torso used for normalization.
pub const TORSO_JOINTS: [usize; 4] = [0, 1, 2, 3];

const STRAIGHT_LEG_M: f64 = 3.0;
const TURN_RADIUS_M: f64 = 0.6;

/// Relative per-repetition jitter of frequency, amplitude and speed.
const REP_JITTER: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

/// Gait dynamics of one emotion class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDynamics {
    /// Full gait cycles per second.
    pub stride_frequency: f64,
    /// Multiplier on limb swing, bob and sway.
    pub amplitude_scale: f64,
    /// Metres per second along the path.
    pub forward_speed: f64,
    /// Forward tilt of the upper body, radians.
    pub posture_lean: f64,
    /// Standard deviation of per-coordinate Gaussian noise, metres.
    pub noise_sigma: f64,
}

impl LabelDynamics {
    fn validate(&self, label: &EmotionLabel) -> Result<(), SynthError> {
        let positive = [
            ("stride_frequency", self.stride_frequency),
            ("amplitude_scale", self.amplitude_scale),
            ("forward_speed", self.forward_speed),
            ("posture_lean", self.posture_lean),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::InvalidParams(format!(
                    "{label}: {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidParams(format!(
                "{label}: noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Default dynamics for the five standard labels, or `None` for others.
pub fn default_dynamics(label: &str) -> Option<LabelDynamics> {
    let (stride_frequency, amplitude_scale, forward_speed, posture_lean) = match label {
        "sadness" => (0.55, 0.63, 0.8, 0.30),
        "neutral" => (0.70, 0.80, 1.2, 0.05),
        "fear" => (0.88, 0.50, 1.0, 0.12),
        "joy" => (1.10, 1.00, 1.4, 0.02),
        "anger" => (1.38, 1.25, 1.6, 0.18),
        _ => return None,
    };
    Some(LabelDynamics {
        stride_frequency,
        amplitude_scale,
        forward_speed,
        posture_lean,
        noise_sigma: 0.01,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    /// Dynamics per label, in label-set order.
    pub labels: Vec<(EmotionLabel, LabelDynamics)>,
    pub n_joints: usize,
    pub fps: f64,
    /// Seconds per sequence.
    pub duration: f64,
    pub seed: u64,
    /// Scales the spread of per-subject factors; 0 makes all subjects
    /// identical up to start pose and phase.
    pub subject_variability: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        let labels = LabelSet::default()
            .labels()
            .iter()
            .map(|l| (l.clone(), default_dynamics(l.as_str()).expect("default label")))
            .collect();
        GaitParams {
            labels,
            n_joints: 43,
            fps: 120.0,
            duration: 5.0,
            seed: 0,
            subject_variability: 1.0,
        }
    }
}

impl GaitParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sets the same noise level for every label.
    pub fn with_noise(mut self, sigma: f64) -> Self {
        for (_, d) in &mut self.labels {
            d.noise_sigma = sigma;
        }
        self
    }

    pub fn label_set(&self) -> LabelSet {
        let names: Vec<&str> = self.labels.iter().map(|(l, _)| l.as_str()).collect();
        LabelSet::new(&names).expect("labels validated")
    }

    pub fn n_frames(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidParams(msg));
        if self.labels.is_empty() {
            return bad("no labels".into());
        }
        let names: Vec<&str> = self.labels.iter().map(|(l, _)| l.as_str()).collect();
        if let Err(e) = LabelSet::new(&names) {
            return bad(e.to_string());
        }
        for (l, d) in &self.labels {
            d.validate(l)?;
        }
        if self.n_joints < BASE_JOINTS {
            return bad(format!(
                "n_joints must be at least {BASE_JOINTS}, got {}",
                self.n_joints
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.n_frames() < 2 {
            return bad("duration·fps must give at least 2 frames".into());
        }
        if !(self.subject_variability.is_finite() && self.subject_variability >= 0.0) {
            return bad(format!(
                "subject_variability must be non-negative, got {}",
                self.subject_variability
            ));
        }
        Ok(())
    }
}

/// Per-subject body and gait factors.
#[derive(Debug, Clone, Copy)]
struct Subject {
    height: f64,
    amplitude: f64,
    frequency: f64,
    speed: f64,
}

impl Subject {
    fn draw(rng: &mut ChaCha8Rng, spread: f64) -> Self {
        let mut factor = |half_width: f64| 1.0 + spread * rng.gen_range(-half_width..=half_width);
        Subject {
            height: factor(0.08),
            amplitude: factor(0.10),
            frequency: factor(0.08),
            speed: factor(0.10),
        }
    }
}

/// Everything one sequence needs beyond the global parameters.
#[derive(Debug, Clone, Copy)]
struct Performance {
    height: f64,
    amplitude: f64,
    frequency: f64,
    speed: f64,
    lean: f64,
    phase: f64,
    heading: f64,
    start: [f64; 2],
}

/// Position and heading after walking `s` metres along the U path.
fn path_pose(s: f64) -> ([f64; 2], f64) {
    let turn_len = PI * TURN_RADIUS_M;
    if s <= STRAIGHT_LEG_M {
        ([s, 0.0], 0.0)
    } else if s <= STRAIGHT_LEG_M + turn_len {
        let a = (s - STRAIGHT_LEG_M) / TURN_RADIUS_M;
        (
            [
                STRAIGHT_LEG_M + TURN_RADIUS_M * a.sin(),
                TURN_RADIUS_M * (1.0 - a.cos()),
            ],
            a,
        )
    } else {
        let back = s - STRAIGHT_LEG_M - turn_len;
        ([STRAIGHT_LEG_M - back, 2.0 * TURN_RADIUS_M], PI)
    }
}

/// Fixed body-frame offset of extra marker `k` from its anchor joint.
fn marker_offset(k: usize) -> [f64; 3] {
    let k = k as f64;
    [
        0.05 * (1.3 * k).sin(),
        0.05 * (2.1 * k).cos(),
        0.04 * (0.7 * k).sin(),
    ]
}

/// Joint positions in the body frame: x forward, y left, z up, origin on the
/// ground below the pelvis.
fn body_pose(p: &Performance, n_joints: usize, phase: f64, out: &mut Vec<[f64; 3]>) {
    let h = p.height;
    let a = p.amplitude;
    let bob = 0.02 * a * h * (2.0 * phase).cos();
    let sway = 0.03 * a * phase.sin();
    let hip_z = 0.95 * h + bob;
    let (ls, lc) = p.lean.sin_cos();
    // Upper-body point at height `z` above the hips, leaned forward.
    let upper = |y: f64, z: f64| [z * ls, y + sway, hip_z + z * lc];

    out.clear();
    let hip_l = [0.0, 0.1 * h + sway, hip_z];
    let hip_r = [0.0, -0.1 * h + sway, hip_z];
    let sh_l = upper(0.18 * h, 0.50 * h);
    let sh_r = upper(-0.18 * h, 0.50 * h);
    out.extend([hip_l, hip_r, sh_l, sh_r]);
    out.push([0.0, sway, hip_z + 0.03 * h]);
    out.push(upper(0.0, 0.20 * h));
    out.push(upper(0.0, 0.35 * h));
    out.push(upper(0.0, 0.55 * h));
    out.push(upper(0.0, 0.70 * h));

    for (hip, side) in [(hip_l, 0.0), (hip_r, PI)] {
        let ph = phase + side;
        let thigh = 0.35 * a * ph.sin();
        let knee_flex = 0.5 * a * (0.5 + 0.5 * (ph + 0.5 * PI).sin());
        let knee = [
            hip[0] + 0.45 * h * thigh.sin(),
            hip[1],
            hip[2] - 0.45 * h * thigh.cos(),
        ];
        let shin = thigh - knee_flex;
        let ankle = [
            knee[0] + 0.45 * h * shin.sin(),
            knee[1],
            knee[2] - 0.45 * h * shin.cos(),
        ];
        let toe = [ankle[0] + 0.12 * h * shin.cos(), ankle[1], ankle[2] + 0.12 * h * shin.sin() - 0.03 * h];
        out.extend([knee, ankle, toe]);
    }

    for (sh, side) in [(sh_l, PI), (sh_r, 0.0)] {
        let ph = phase + side;
        let swing = 0.3 * a * ph.sin();
        let elbow = [
            sh[0] + 0.30 * h * swing.sin(),
            sh[1],
            sh[2] - 0.30 * h * swing.cos(),
        ];
        let fore = swing + 0.3 * a * (0.5 + 0.5 * ph.sin());
        let wrist = [
            elbow[0] + 0.28 * h * fore.sin(),
            elbow[1],
            elbow[2] - 0.28 * h * fore.cos(),
        ];
        out.extend([elbow, wrist]);
    }
    debug_assert_eq!(out.len(), BASE_JOINTS);

    for k in BASE_JOINTS..n_joints {
        let anchor = out[k % BASE_JOINTS];
        let o = marker_offset(k);
        out.push([anchor[0] + o[0] * h, anchor[1] + o[1] * h, anchor[2] + o[2] * h]);
    }
}

fn render(
    p: &Performance,
    n_joints: usize,
    fps: f64,
    n_frames: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let (hs, hc) = p.heading.sin_cos();
    let mut joints = Vec::with_capacity(n_joints);
    let mut coords = Vec::with_capacity(n_frames * 3 * n_joints);
    for t in 0..n_frames {
        let time = t as f64 / fps;
        let phase = p.phase + TAU * p.frequency * time;
        let ([px, py], psi) = path_pose(p.speed * time);
        let (ps, pc) = psi.sin_cos();
        body_pose(p, n_joints, phase, &mut joints);
        for j in &joints {
            // Body frame to path frame, then path frame to world.
            let (x, y) = (pc * j[0] - ps * j[1] + px, ps * j[0] + pc * j[1] + py);
            let world = [
                hc * x - hs * y + p.start[0],
                hs * x + hc * y + p.start[1],
                j[2],
            ];
            for v in world {
                let n = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
                coords.push(v + n);
            }
        }
    }
    coords
}

/// Stream id of one draw; distinct for every (subject, label, repetition).
fn stream_id(subject: usize, label: Option<usize>, rep: usize) -> u64 {
    let label = label.map_or(0, |l| l as u64 + 1);
    ((subject as u64) << 40) | (label << 20) | rep as u64
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn subject_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

pub fn sequence_id(subject: usize, label: &EmotionLabel, rep: usize) -> String {
    format!("{}_{}_{:02}", subject_id(subject), label, rep + 1)
}

/// `subjects × labels × reps` labeled sequences, ordered by subject, then
/// label, then repetition.
pub fn generate_dataset(
    params: &GaitParams,
    subjects: usize,
    reps_per_label: usize,
) -> Result<Vec<SkeletonSequence>, SynthError> {
    params.validate()?;
    if subjects == 0 || reps_per_label == 0 {
        return Err(SynthError::InvalidParams(
            "subjects and repetitions must be positive".into(),
        ));
    }
    let n_frames = params.n_frames();
    let mut out = Vec::with_capacity(subjects * params.labels.len() * reps_per_label);
    for s in 0..subjects {
        let subject = Subject::draw(
            &mut rng_for(params.seed, stream_id(s, None, 0)),
            params.subject_variability,
        );
        for (li, (label, dyn_)) in params.labels.iter().enumerate() {
            for r in 0..reps_per_label {
                let mut rng = rng_for(params.seed, stream_id(s, Some(li), r));
                let mut jitter = || 1.0 + rng.gen_range(-REP_JITTER..=REP_JITTER);
                let (jf, ja, js) = (jitter(), jitter(), jitter());
                let perf = Performance {
                    height: subject.height,
                    amplitude: dyn_.amplitude_scale * subject.amplitude * ja,
                    frequency: dyn_.stride_frequency * subject.frequency * jf,
                    speed: dyn_.forward_speed * subject.speed * js,
                    lean: dyn_.posture_lean,
                    phase: rng.gen_range(0.0..TAU),
                    heading: rng.gen_range(0.0..TAU),
                    start: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                };
                let coords = render(
                    &perf,
                    params.n_joints,
                    params.fps,
                    n_frames,
                    dyn_.noise_sigma,
                    &mut rng,
                );
                let seq = SkeletonSequence::from_flat(
                    sequence_id(s, label, r),
                    subject_id(s),
                    Some(label.clone()),
                    params.n_joints,
                    params.fps,
                    coords,
                )
                .map_err(|e| SynthError::InvalidParams(e.to_string()))?;
                out.push(seq);
            }
        }
    }
    Ok(out)
}
