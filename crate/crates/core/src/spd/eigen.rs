//! Symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! algorithm with Wilkinson-style shifts (the EISPACK `tred2`/`tql2` pair as
//! popularized by JAMA). Only symmetric input is accepted, so the spectrum is
//! real and the computed eigenvectors are orthonormal to working precision.
//!
//! Output is canonicalized: eigenvalues in descending order, and every
//! eigenvector's first non-negligible component is positive. Repeated runs on
//! the same input produce bit-identical results.

use super::sym::dot;
use super::{SpdError, SymMatrix};

/// Sweeps allowed per unit of dimension before the QL iteration gives up.
pub const SWEEPS_PER_DIM: usize = 30;

/// Components at or below this magnitude are skipped when fixing eigenvector signs.
const SIGN_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    dim: usize,
    values: Vec<f64>,
    /// Row-major `dim × dim`; column `i` pairs with `values[i]`.
    vectors: Vec<f64>,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues, largest first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row-major eigenvector matrix `V`; column `i` is the eigenvector of `values()[i]`.
    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.vectors[r * self.dim + i]).collect()
    }

    /// `V · diag(f(λ)) · Vᵀ`, assembled one upper-triangle entry at a time.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        self.reconstruct_from(&mapped)
    }

    pub(crate) fn reconstruct_from(&self, mapped: &[f64]) -> SymMatrix {
        let n = self.dim;
        let v = &self.vectors;
        let mut scaled = vec![0.0; n * n];
        for r in 0..n {
            for i in 0..n {
                scaled[r * n + i] = v[r * n + i] * mapped[i];
            }
        }
        SymMatrix::from_fn(n, |r, c| dot(&scaled[r * n..(r + 1) * n], &v[c * n..(c + 1) * n]))
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eig(s: &SymMatrix) -> Result<EigenPair, SpdError> {
    let n = s.dim();
    let mut v = s.to_dense();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e, n, true);
    // `v` now holds Vᵀ, so QL rotations of column pairs of V touch contiguous rows.
    let mut vt = v;
    ql_implicit(&mut d, &mut e, Some(&mut vt), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));

    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        let src_row = &vt[src * n..(src + 1) * n];
        let pivot = src_row
            .iter()
            .copied()
            .find(|x| x.abs() > SIGN_THRESHOLD)
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (r, x) in src_row.iter().enumerate() {
            vectors[r * n + col] = sign * x;
        }
    }
    Ok(EigenPair {
        dim: n,
        values,
        vectors,
    })
}

/// Eigenvalues only, largest first. Skips the eigenvector accumulation.
pub fn sym_eigenvalues(s: &SymMatrix) -> Result<Vec<f64>, SpdError> {
    let n = s.dim();
    let mut v = s.to_dense();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e, n, false);
    ql_implicit(&mut d, &mut e, None, n)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// Householder reduction of the row-major symmetric matrix in `v` to tridiagonal
/// form: diagonal in `d`, subdiagonal in `e[1..]`. With `accumulate`, `v` ends up
/// holding the transpose of the orthogonal transformation, row-major.
fn tridiagonalize(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize, accumulate: bool) {
    // Element (i, j) lives at the transposed position. The input is symmetric,
    // and the inner loops below run down columns, which become contiguous rows.
    let at = |i: usize, j: usize| j * n + i;

    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = v[at(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let g = dot(&v[at(0, i + 1)..=at(i, i + 1)], &v[at(0, j)..=at(i, j)]);
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`. Rotations are applied to the rows
/// of `vt` (the transposed eigenvector matrix) when given.
fn ql_implicit(
    d: &mut [f64],
    e: &mut [f64],
    mut vt: Option<&mut [f64]>,
    n: usize,
) -> Result<(), SpdError> {
    let cap = SWEEPS_PER_DIM * n.max(1);
    let mut iterations = 0usize;

    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);

        if m > l {
            loop {
                iterations += 1;
                if iterations > cap {
                    return Err(SpdError::IterationFailure { iterations: cap });
                }

                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(vt) = vt.as_deref_mut() {
                        let (lo, hi) = vt[i * n..(i + 2) * n].split_at_mut(n);
                        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                            let h = *b;
                            *b = s * *a + c * h;
                            *a = c * *a - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(SpdError::IterationFailure { iterations });
    }
    Ok(())
}
