use serde::{Deserialize, Serialize};

use super::SpdError;

/// Dense symmetric matrix holding only its upper triangle.
///
/// Entries are packed row by row: row `i` stores columns `i..dim`. Symmetry is
/// therefore exact by construction; `get(i, j)` and `get(j, i)` read the same
/// slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PackedRepr", into = "PackedRepr")]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PackedRepr {
    dim: usize,
    packed: Vec<f64>,
}

impl TryFrom<PackedRepr> for SymMatrix {
    type Error = SpdError;

    fn try_from(r: PackedRepr) -> Result<Self, SpdError> {
        SymMatrix::from_packed(r.dim, r.packed)
    }
}

impl From<SymMatrix> for PackedRepr {
    fn from(m: SymMatrix) -> Self {
        PackedRepr {
            dim: m.dim,
            packed: m.packed,
        }
    }
}

#[inline]
/// Dot product over four interleaved partial sums. The summation order is
/// fixed, so results are reproducible.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            dim,
            packed: vec![0.0; packed_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        let mut packed = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                packed.push(f(i, j));
            }
        }
        SymMatrix { dim, packed }
    }

    pub fn from_packed(dim: usize, packed: Vec<f64>) -> Result<Self, SpdError> {
        if dim == 0 {
            return Err(SpdError::InvalidData("dimension must be at least 1".into()));
        }
        if packed.len() != packed_len(dim) {
            return Err(SpdError::InvalidData(format!(
                "packed upper triangle of a {dim}x{dim} matrix needs {} values, got {}",
                packed_len(dim),
                packed.len()
            )));
        }
        if let Some(pos) = packed.iter().position(|v| !v.is_finite()) {
            return Err(SpdError::InvalidData(format!(
                "non-finite entry at packed index {pos}"
            )));
        }
        Ok(SymMatrix { dim, packed })
    }

    /// Builds from a row-major dense matrix, requiring `|a_ij - a_ji| <= tol * max|a|`.
    /// The stored value is the mean of the two triangles.
    pub fn from_dense(dim: usize, dense: &[f64], tol: f64) -> Result<Self, SpdError> {
        if dim == 0 || dense.len() != dim * dim {
            return Err(SpdError::InvalidData(format!(
                "expected {} dense entries for dimension {dim}, got {}",
                dim * dim,
                dense.len()
            )));
        }
        if dense.iter().any(|v| !v.is_finite()) {
            return Err(SpdError::InvalidData("non-finite entry".into()));
        }
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (dense[i * dim + j], dense[j * dim + i]);
                if (a - b).abs() > tol * scale {
                    return Err(SpdError::InvalidData(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| {
            0.5 * (dense[i * dim + j] + dense[j * dim + i])
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper triangle, row by row.
    #[inline]
    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    #[inline]
    pub(crate) fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.packed
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(c < self.dim);
        r * self.dim - r * (r + 1) / 2 + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.packed[k] = value;
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                out[i * n + j] = self.packed[k];
                out[j * n + i] = self.packed[k];
                k += 1;
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.dim {
            let k = self.index(i, i);
            self.packed[k] += value;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.packed.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_scaled(&mut self, other: &SymMatrix, factor: f64) -> Result<(), SpdError> {
        self.check_dim(other)?;
        for (a, b) in self.packed.iter_mut().zip(&other.packed) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq_of(&self.packed, |a, _| a).sqrt()
    }

    /// `‖self − other‖_F`. Exactly symmetric in its arguments.
    pub fn frobenius_distance(&self, other: &SymMatrix) -> Result<f64, SpdError> {
        self.check_dim(other)?;
        Ok(self.frobenius_sq_of(&other.packed, |a, b| a - b).sqrt())
    }

    /// Squared Frobenius norm of the matrix with packed entries
    /// `entry(self[k], other[k])`: twice the packed sum of squares minus the
    /// diagonal's.
    fn frobenius_sq_of(&self, other: &[f64], entry: impl Fn(f64, f64) -> f64) -> f64 {
        let (ca, cb) = (self.packed.chunks_exact(4), other.chunks_exact(4));
        let tail: f64 = ca
            .remainder()
            .iter()
            .zip(cb.remainder())
            .map(|(&a, &b)| entry(a, b).powi(2))
            .sum();
        let mut acc = [0.0; 4];
        for (x, y) in ca.zip(cb) {
            for l in 0..4 {
                let v = entry(x[l], y[l]);
                acc[l] += v * v;
            }
        }
        let all = (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
        let mut diag = 0.0;
        let mut k = 0;
        for i in 0..self.dim {
            let v = entry(self.packed[k], other[k]);
            diag += v * v;
            k += self.dim - i;
        }
        2.0 * all - diag
    }

    /// `Q · self · Qᵀ` for a row-major square `q` of matching size.
    pub fn congruence(&self, q: &[f64]) -> Result<SymMatrix, SpdError> {
        let n = self.dim;
        if q.len() != n * n {
            return Err(SpdError::DimensionMismatch {
                expected: n * n,
                found: q.len(),
            });
        }
        let a = self.to_dense();
        // t = q · a
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let qik = q[i * n + k];
                if qik == 0.0 {
                    continue;
                }
                let row = &a[k * n..(k + 1) * n];
                for (tj, aj) in t[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *tj += qik * aj;
                }
            }
        }
        Ok(SymMatrix::from_fn(n, |i, j| {
            let ti = &t[i * n..(i + 1) * n];
            let qj = &q[j * n..(j + 1) * n];
            ti.iter().zip(qj).map(|(x, y)| x * y).sum()
        }))
    }

    pub(crate) fn check_dim(&self, other: &SymMatrix) -> Result<(), SpdError> {
        if self.dim != other.dim {
            return Err(SpdError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}
