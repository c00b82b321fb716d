//! Reference implementations and random samplers shared by the test suites.
//! Nothing here calls the library's linear algebra.
#![allow(dead_code)]

use emogait::spd::{SpdMatrix, SymMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Cyclic Jacobi eigendecomposition of a dense row-major symmetric matrix.
/// Returns eigenvalues and row-major eigenvectors (column i ↔ value i), unsorted.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// `V · diag(f(λ)) · Vᵀ` from a Jacobi decomposition.
pub fn oracle_fn(s: &SymMatrix, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = s.dim();
    let (vals, v) = jacobi_eigen(&s.to_dense(), n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| v[i * n + k] * f(vals[k]) * v[j * n + k]).sum();
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i * n + j] += a[i * n + k] * b[k * n + j];
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    (0..n * n).map(|k| a[(k % n) * n + k / n]).collect()
}

/// Haar-ish random orthogonal matrix: Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &cols {
                let d: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(c.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut q = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[i * n + j] = c[i];
        }
    }
    q
}

/// `Q · diag(λ) · Qᵀ` with `log10 λ` uniform over `max_log10_cond` decades,
/// shifted by a random overall scale in `[1e-2, 1e2]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, max_log10_cond: f64) -> SpdMatrix {
    let q = random_orthogonal(rng, n);
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let lambdas: Vec<f64> = (0..n)
        .map(|_| scale * 10f64.powf(rng.gen_range(0.0..=max_log10_cond)))
        .collect();
    let s = SymMatrix::from_fn(n, |i, j| (0..n).map(|k| q[i * n + k] * lambdas[k] * q[j * n + k]).sum());
    SpdMatrix::new(s).expect("well-conditioned by construction")
}

/// Random symmetric matrix with unit Frobenius norm.
pub fn random_symmetric_unit(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let mut s = SymMatrix::from_fn(n, |_, _| rng.sample(StandardNormal));
    let norm = s.frobenius_norm();
    s.scale(1.0 / norm);
    s
}

/// Two-pass unbiased sample covariance of row vectors.
pub fn two_pass_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

/// Posture/velocity rows `[p(t), p(t) − p(t−1)]` with a zero first velocity.
pub fn posture_velocity_rows(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let mut row = f.clone();
            if t == 0 {
                row.extend(std::iter::repeat_n(0.0, f.len()));
            } else {
                row.extend(f.iter().zip(&frames[t - 1]).map(|(a, b)| a - b));
            }
            row
        })
        .collect()
}
