//! Symmetric positive definite solves for killed Laplacians.
//!
//! Small systems use a dense Cholesky factorization; larger ones use
//! Jacobi-preconditioned conjugate gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Systems with at most this many unknowns are factorized densely.
pub const DENSE_LIMIT: usize = 256;
pub const CG_TOLERANCE: f64 = 1e-10;

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *val.last_mut().expect("entry exists") += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col[span.clone()].iter().copied().zip(self.val[span].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).filter(|&(c, _)| c == r).map(|(_, v)| v).sum()).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Dense(Cholesky<f64, Dyn>),
    Cg { matrix: CsrMatrix, inv_diag: Vec<f64> },
}

/// A factorized (or preconditioned) symmetric positive definite system.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    n: usize,
    backend: Backend,
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if matrix.n() <= DENSE_LIMIT {
            Self::dense(&matrix)
        } else {
            Self::iterative(matrix)
        }
    }

    pub fn dense(matrix: &CsrMatrix) -> Result<Self> {
        let chol = Cholesky::new(matrix.to_dense()).ok_or(Error::NotPositiveDefinite)?;
        Ok(SpdSolver { n: matrix.n(), backend: Backend::Dense(chol) })
    }

    pub fn iterative(matrix: CsrMatrix) -> Result<Self> {
        let diag = matrix.diagonal();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let inv_diag = diag.iter().map(|d| 1.0 / d).collect();
        Ok(SpdSolver { n: matrix.n(), backend: Backend::Cg { matrix, inv_diag } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::LengthMismatch { left: b.len(), right: self.n });
        }
        match &self.backend {
            Backend::Dense(chol) => Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()),
            Backend::Cg { matrix, inv_diag } => conjugate_gradient(matrix, inv_diag, b),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG from zero; stops at relative residual `CG_TOLERANCE`.
fn conjugate_gradient(a: &CsrMatrix, inv_diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n.max(1);
    let mut res = b_norm;
    for _ in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt();
        if res <= CG_TOLERANCE * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDidNotConverge { iterations: max_iter, residual: res / b_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Killed path Laplacian of length n: tridiagonal 2, −1.
    fn path_laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (1, 1, 4.0)]);
        assert_eq!(m.diagonal(), vec![3.0, 4.0]);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 3.0]);
    }

    #[test]
    fn dense_and_cg_agree_with_closed_form() {
        // Inverse of the killed path Laplacian: min(i,j)·(n+1−max(i,j))/(n+1), 1-based.
        for n in [5, 300] {
            let m = path_laplacian(n);
            let mut b = vec![0.0; n];
            b[1] = 1.0;
            let exact: Vec<f64> = (1..=n).map(|i| (i.min(2) * (n + 1 - i.max(2))) as f64 / (n + 1) as f64).collect();
            for solver in [SpdSolver::dense(&m).unwrap(), SpdSolver::iterative(m.clone()).unwrap()] {
                let x = solver.solve(&b).unwrap();
                for (a, e) in x.iter().zip(&exact) {
                    assert!((a - e).abs() < 1e-8 * e.abs().max(1.0), "{a} vs {e}");
                }
            }
        }
        assert!(SpdSolver::new(path_laplacian(300)).map(|s| !s.is_dense()).unwrap());
        assert!(SpdSolver::new(path_laplacian(10)).map(|s| s.is_dense()).unwrap());
    }

    #[test]
    fn indefinite_rejected() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(SpdSolver::dense(&m), Err(Error::NotPositiveDefinite)));
        let singular = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 0.0)]);
        assert!(SpdSolver::iterative(singular).is_err());
    }

    #[test]
    fn zero_rhs_and_length_check() {
        let s = SpdSolver::iterative(path_laplacian(4)).unwrap();
        assert_eq!(s.solve(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(s.solve(&[0.0; 3]).is_err());
    }
}
