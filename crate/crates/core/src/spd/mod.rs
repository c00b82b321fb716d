//! Geometry of symmetric positive-definite matrices under the log-Euclidean
//! metric.
//!
//! Everything here is a pure function of its inputs. Matrix functions go
//! through [`sym_eig`], so `log`/`exp` are exact up to the eigensolver's
//! backward error, and results are deterministic bit for bit.

mod eigen;
mod sym;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eigen::{sym_eig, sym_eigenvalues, EigenPair, SWEEPS_PER_DIM};
pub(crate) use sym::dot;
pub use sym::SymMatrix;

/// Relative positivity floor: λ_min must exceed `POSITIVITY_FLOOR · max(1, λ_max)`.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Default scale-aware regularization factor: ε = factor · trace(C) / dim.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:e} is below the floor {floor:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, floor: f64 },
    #[error("symmetric eigensolver did not converge within {iterations} iterations")]
    IterationFailure { iterations: usize },
    #[error("matrix exponential overflows: eigenvalue {eigenvalue} is out of range")]
    Overflow { eigenvalue: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid epsilon {0}: must be positive and finite")]
    InvalidEpsilon(f64),
    #[error("invalid matrix data: {0}")]
    InvalidData(String),
}

impl SpdError {
    /// Numeric failures (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            SpdError::NotPositiveDefinite { .. }
                | SpdError::IterationFailure { .. }
                | SpdError::Overflow { .. }
        )
    }
}

/// A symmetric matrix whose eigenvalues clear the positivity floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatrix", into = "SymMatrix")]
pub struct SpdMatrix(SymMatrix);

impl TryFrom<SymMatrix> for SpdMatrix {
    type Error = SpdError;

    fn try_from(s: SymMatrix) -> Result<Self, SpdError> {
        SpdMatrix::new(s)
    }
}

impl From<SpdMatrix> for SymMatrix {
    fn from(m: SpdMatrix) -> Self {
        m.0
    }
}

fn positivity_floor(lambda_max: f64) -> f64 {
    POSITIVITY_FLOOR * lambda_max.max(1.0)
}

fn check_spectrum(values_desc: &[f64]) -> Result<(), SpdError> {
    let max = values_desc[0];
    let min = *values_desc.last().unwrap();
    let floor = positivity_floor(max);
    if !(min > floor) {
        return Err(SpdError::NotPositiveDefinite {
            min_eigenvalue: min,
            floor,
        });
    }
    Ok(())
}

impl SpdMatrix {
    /// Validates positivity. Near-singular input is rejected, never repaired;
    /// use [`regularize`] for that.
    pub fn new(s: SymMatrix) -> Result<Self, SpdError> {
        let values = sym_eigenvalues(&s)?;
        check_spectrum(&values)?;
        Ok(SpdMatrix(s))
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix(SymMatrix::identity(dim))
    }

    /// Diagonal matrix; every entry must be positive.
    pub fn from_diag(diag: &[f64]) -> Result<Self, SpdError> {
        Self::new(SymMatrix::from_diag(diag))
    }

    pub(crate) fn new_unchecked(s: SymMatrix) -> Self {
        SpdMatrix(s)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn log(&self) -> Result<SymMatrix, SpdError> {
        spd_log(self)
    }
}

/// Matrix logarithm `V · diag(ln λ) · Vᵀ`.
pub fn spd_log(c: &SpdMatrix) -> Result<SymMatrix, SpdError> {
    let eig = sym_eig(c.as_sym())?;
    check_spectrum(eig.values())?;
    Ok(eig.reconstruct_with(f64::ln))
}

/// Matrix exponential `V · diag(exp λ) · Vᵀ`.
pub fn spd_exp(s: &SymMatrix) -> Result<SpdMatrix, SpdError> {
    let eig = sym_eig(s)?;
    let mapped: Vec<f64> = eig.values().iter().map(|&l| l.exp()).collect();
    if let Some(i) = mapped.iter().position(|m| !m.is_finite()) {
        return Err(SpdError::Overflow {
            eigenvalue: eig.values()[i],
        });
    }
    let min = *mapped.last().unwrap();
    if min <= 0.0 {
        return Err(SpdError::NotPositiveDefinite {
            min_eigenvalue: min,
            floor: 0.0,
        });
    }
    Ok(SpdMatrix::new_unchecked(eig.reconstruct_from(&mapped)))
}

/// Log-Euclidean distance `‖log c1 − log c2‖_F`.
pub fn lerm_distance(c1: &SpdMatrix, c2: &SpdMatrix) -> Result<f64, SpdError> {
    c1.as_sym().check_dim(c2.as_sym())?;
    spd_log(c1)?.frobenius_distance(&spd_log(c2)?)
}

/// Plain `‖c1 − c2‖_F`.
pub fn frobenius_distance(c1: &SpdMatrix, c2: &SpdMatrix) -> Result<f64, SpdError> {
    c1.as_sym().frobenius_distance(c2.as_sym())
}

/// Arithmetic mean of symmetric matrices with a canonical summation order.
///
/// Summands are sorted by their packed entries (total order on `f64`) before
/// accumulation, so the result does not depend on input order, bit for bit.
pub fn canonical_mean<'a>(
    items: impl IntoIterator<Item = &'a SymMatrix>,
) -> Result<SymMatrix, SpdError> {
    let mut items: Vec<&SymMatrix> = items.into_iter().collect();
    let first = *items.first().ok_or(SpdError::EmptyInput)?;
    for m in &items {
        first.check_dim(m)?;
    }
    items.sort_by(|a, b| {
        a.packed()
            .iter()
            .zip(b.packed())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut acc = SymMatrix::zeros(first.dim());
    for m in &items {
        for (a, b) in acc.packed_mut().iter_mut().zip(m.packed()) {
            *a += b;
        }
    }
    acc.scale(1.0 / items.len() as f64);
    Ok(acc)
}

/// Closed-form Riemannian centre of mass under the log-Euclidean metric:
/// `exp((1/N) Σ log Cᵢ)`.
pub fn log_euclidean_mean(cs: &[SpdMatrix]) -> Result<SpdMatrix, SpdError> {
    if cs.is_empty() {
        return Err(SpdError::EmptyInput);
    }
    let dim = cs[0].dim();
    if let Some(bad) = cs.iter().find(|c| c.dim() != dim) {
        return Err(SpdError::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let logs = cs.iter().map(spd_log).collect::<Result<Vec<_>, _>>()?;
    spd_exp(&canonical_mean(&logs)?)
}

/// `Σᵢ lerm_distance(c, cᵢ)²`, the quantity the centre of mass minimizes.
pub fn karcher_objective(c: &SpdMatrix, cs: &[SpdMatrix]) -> Result<f64, SpdError> {
    let log_c = spd_log(c)?;
    cs.iter().try_fold(0.0, |acc, ci| {
        c.as_sym().check_dim(ci.as_sym())?;
        let d = log_c.frobenius_distance(&spd_log(ci)?)?;
        Ok(acc + d * d)
    })
}

/// How the regularization shift ε is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// A fixed shift.
    Absolute(f64),
    /// `factor · trace(C) / dim`, so the shift follows the data scale.
    Relative(f64),
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::Relative(DEFAULT_RELATIVE_EPSILON)
    }
}

impl Epsilon {
    pub fn validate(self) -> Result<Self, SpdError> {
        let v = match self {
            Epsilon::Absolute(v) | Epsilon::Relative(v) => v,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(SpdError::InvalidEpsilon(v));
        }
        Ok(self)
    }

    /// The absolute shift for `s`. A zero-trace matrix under the relative rule
    /// falls back to the factor itself.
    pub fn resolve(self, s: &SymMatrix) -> Result<f64, SpdError> {
        match self.validate()? {
            Epsilon::Absolute(v) => Ok(v),
            Epsilon::Relative(f) => {
                let eps = f * s.trace() / s.dim() as f64;
                if eps.is_finite() && eps > 0.0 {
                    Ok(eps)
                } else {
                    Ok(f)
                }
            }
        }
    }
}

/// Returns `s + εI` when `λ_min(s) ≤ ε`, otherwise `s` unchanged.
pub fn regularize(s: &SymMatrix, epsilon: f64) -> Result<SpdMatrix, SpdError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(SpdError::InvalidEpsilon(epsilon));
    }
    let mut values = sym_eigenvalues(s)?;
    let min = *values.last().unwrap();
    let mut out = s.clone();
    if min <= epsilon {
        out.add_diagonal(epsilon);
        values.iter_mut().for_each(|v| *v += epsilon);
    }
    check_spectrum(&values)?;
    Ok(SpdMatrix::new_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn rotation2(theta: f64) -> [f64; 4] {
        let (s, c) = theta.sin_cos();
        [c, -s, s, c]
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = spd_log(&SpdMatrix::identity(4)).unwrap();
        assert!(l.packed().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn log_of_diagonal() {
        let c = SpdMatrix::from_diag(&[E, E * E]).unwrap();
        let l = spd_log(&c).unwrap();
        assert_abs_diff_eq!(l.get(0, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.get(1, 1), 2.0, epsilon = 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn log_commutes_with_rotation() {
        let r = rotation2(0.7);
        let c = SpdMatrix::new(SymMatrix::from_diag(&[E, E * E]).congruence(&r).unwrap()).unwrap();
        let l = spd_log(&c).unwrap();
        let expect = SymMatrix::from_diag(&[1.0, 2.0]).congruence(&r).unwrap();
        assert!(l.frobenius_distance(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        let i = spd_exp(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(i, SpdMatrix::identity(3));
        let d = spd_exp(&SymMatrix::from_diag(&[1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(d.get(0, 0), E, epsilon = 1e-15);
        assert_abs_diff_eq!(d.get(1, 1), E * E, epsilon = 1e-14);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn exp_overflow_is_reported() {
        let err = spd_exp(&SymMatrix::from_diag(&[800.0, 0.0])).unwrap_err();
        assert!(matches!(err, SpdError::Overflow { .. }));
    }

    #[test]
    fn lerm_worked_examples() {
        let i2 = SpdMatrix::identity(2);
        let a = SpdMatrix::from_diag(&[E * E, 1.0]).unwrap();
        assert_abs_diff_eq!(lerm_distance(&i2, &a).unwrap(), 2.0, epsilon = 1e-14);
        let b = SpdMatrix::from_diag(&[E, E]).unwrap();
        assert_abs_diff_eq!(lerm_distance(&b, &i2).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(lerm_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn lerm_dimension_mismatch() {
        let err = lerm_distance(&SpdMatrix::identity(2), &SpdMatrix::identity(3)).unwrap_err();
        assert_eq!(err, SpdError::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn frobenius_worked_examples() {
        let a = SpdMatrix::from_diag(&[1.0, 1.0]).unwrap();
        let b = SpdMatrix::from_diag(&[3.0, 1.0]).unwrap();
        assert_eq!(frobenius_distance(&a, &b).unwrap(), 2.0);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);

        let eps = 1e-6;
        let mut ones = SymMatrix::from_fn(2, |_, _| 1.0);
        ones.add_diagonal(eps);
        let ones = SpdMatrix::new(ones).unwrap();
        let d = frobenius_distance(&SpdMatrix::identity(2), &ones).unwrap();
        assert_abs_diff_eq!(d, 2f64.sqrt(), epsilon = 2.0 * eps);
    }

    #[test]
    fn mean_examples() {
        let c = SpdMatrix::new(SymMatrix::from_dense(2, &[2.0, 0.3, 0.3, 1.0], 0.0).unwrap()).unwrap();
        let m = log_euclidean_mean(std::slice::from_ref(&c)).unwrap();
        assert!(m.as_sym().frobenius_distance(c.as_sym()).unwrap() < 1e-14);

        let ids = vec![SpdMatrix::identity(2); 3];
        assert_eq!(log_euclidean_mean(&ids).unwrap(), SpdMatrix::identity(2));

        let scalars = [SpdMatrix::from_diag(&[1.0]).unwrap(), SpdMatrix::from_diag(&[E * E]).unwrap()];
        assert_abs_diff_eq!(log_euclidean_mean(&scalars).unwrap().get(0, 0), E, epsilon = 1e-15);

        assert_eq!(log_euclidean_mean(&[]).unwrap_err(), SpdError::EmptyInput);
        let mixed = [SpdMatrix::identity(2), SpdMatrix::identity(3)];
        assert!(matches!(
            log_euclidean_mean(&mixed).unwrap_err(),
            SpdError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn karcher_objective_examples() {
        let c = SpdMatrix::from_diag(&[2.0, 3.0]).unwrap();
        assert_eq!(karcher_objective(&c, std::slice::from_ref(&c)).unwrap(), 0.0);
        let a = SpdMatrix::from_diag(&[E * E, 1.0]).unwrap();
        let v = karcher_objective(&SpdMatrix::identity(2), &[a]).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-13);
    }

    #[test]
    fn constructor_enforces_floor() {
        assert!(SpdMatrix::from_diag(&[1.0, 0.0]).is_err());
        assert!(SpdMatrix::from_diag(&[1.0, -1.0]).is_err());
        // floor is 1e-12 * 1e6 = 1e-6
        assert!(SpdMatrix::from_diag(&[1e6, 2e-6]).is_ok());
        assert!(SpdMatrix::from_diag(&[1e6, 1e-7]).is_err());
        assert!(SpdMatrix::from_diag(&[0.5, 2e-12]).is_ok());
    }

    #[test]
    fn regularize_examples() {
        let z = regularize(&SymMatrix::zeros(2), 1e-6).unwrap();
        assert_eq!(z.as_sym(), &SymMatrix::from_diag(&[1e-6, 1e-6]));

        let c = SymMatrix::from_dense(2, &[1.0, 0.5, 0.5, 1.0], 0.0).unwrap(); // λ = 1.5, 0.5
        assert_eq!(regularize(&c, 1e-6).unwrap().as_sym(), &c);

        let r = regularize(&SymMatrix::from_diag(&[1.0, 0.0]), 1e-6).unwrap();
        assert_eq!(r.as_sym(), &SymMatrix::from_diag(&[1.0 + 1e-6, 1e-6]));

        assert!(regularize(&c, 0.0).is_err());
        assert!(regularize(&c, f64::NAN).is_err());
    }

    #[test]
    fn relative_epsilon_scales_with_trace() {
        let s = SymMatrix::from_diag(&[4.0, 2.0]);
        assert_eq!(Epsilon::Relative(1e-6).resolve(&s).unwrap(), 3e-6);
        assert_eq!(Epsilon::Absolute(0.5).resolve(&s).unwrap(), 0.5);
        assert_eq!(Epsilon::Relative(1e-6).resolve(&SymMatrix::zeros(2)).unwrap(), 1e-6);
        assert!(Epsilon::Absolute(-1.0).resolve(&s).is_err());
    }

    #[test]
    fn canonical_mean_is_order_independent() {
        let a = SymMatrix::from_fn(3, |i, j| 0.1 * (i + 2 * j) as f64 + 1e-3);
        let b = SymMatrix::from_fn(3, |i, j| -0.37 * (i * j) as f64 + 1.0 / 3.0);
        let c = SymMatrix::from_fn(3, |i, j| 1.0 / (1.0 + (i + j) as f64));
        let m1 = canonical_mean([&a, &b, &c]).unwrap();
        let m2 = canonical_mean([&c, &a, &b]).unwrap();
        let m3 = canonical_mean([&b, &c, &a]).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1, m3);
    }

    #[test]
    fn serde_rejects_non_spd() {
        let json = r#"{"dim":2,"packed":[1.0,0.0,-1.0]}"#;
        assert!(serde_json::from_str::<SpdMatrix>(json).is_err());
        let json = r#"{"dim":2,"packed":[1.0,0.0,2.0]}"#;
        let m: SpdMatrix = serde_json::from_str(json).unwrap();
        assert_eq!(m.get(1, 1), 2.0);
    }
}
