//! Thin wrapper over faer's sparse LU for assembled systems.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("singular or ill-conditioned system (relative residual {0:e})")]
    Singular(f64),
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Triplets {
        Triplets { n, entries: Vec::new() }
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    /// Replace row `r` by the identity row.
    pub fn set_identity_rows(&mut self, rows: &[bool]) {
        self.entries.retain(|&(r, _, _)| !rows[r]);
        for (r, &on) in rows.iter().enumerate() {
            if on {
                self.entries.push((r, r, 1.0));
            }
        }
    }

    pub fn to_matrix(&self) -> SparseColMat<usize, f64> {
        let t: Vec<Triplet<usize, usize, f64>> =
            self.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).expect("indices in range")
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for &(r, c, v) in &self.entries {
            a[r][c] += v;
        }
        a
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }
}

/// Statistics of one direct solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub n: usize,
    pub nnz: usize,
    pub relative_residual: f64,
}

fn rms_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve with sparse LU; rejects results whose relative residual exceeds `tol`.
pub fn solve(a: &Triplets, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats), LinearError> {
    let mat = a.to_matrix();
    let lu = mat.sp_lu().map_err(|e| LinearError::Factorization(format!("{e:?}")))?;
    let rhs = Col::from_fn(a.n, |i| b[i]);
    let sol = lu.solve(&rhs);
    let x: Vec<f64> = (0..a.n).map(|i| sol[i]).collect();
    if !x.iter().all(|v| v.is_finite()) {
        return Err(LinearError::Singular(f64::INFINITY));
    }
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let rel = rms_norm(&r) / rms_norm(b).max(f64::MIN_POSITIVE);
    let stats = SolveStats { n: a.n, nnz: mat.compute_nnz(), relative_residual: rel };
    if rel > tol && rms_norm(&r) > tol {
        return Err(LinearError::Singular(rel));
    }
    Ok((x, stats))
}

/// Singular values of a dense matrix, descending.
pub fn singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let cols = a.first().map_or(0, |r| r.len());
    let m = Mat::from_fn(a.len(), cols, |i, j| a[i][j]);
    let s = m.singular_values().expect("svd converges");
    s.to_vec()
}
