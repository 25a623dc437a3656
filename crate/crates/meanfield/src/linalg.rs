//! Thin sparse linear algebra layer over `faer`.
//!
//! Vectors are plain `Vec<f64>`; matrices are assembled from triplets into
//! compressed sparse column form. The mean field Jacobian is a sparse matrix
//! plus a rank-one term, which [`Rank1Solver`] handles via Sherman-Morrison.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{MfError, Result};

/// Caps the global linear-algebra parallelism; `1` forces sequential runs.
pub fn set_thread_cap(n: usize) {
    let par = if n <= 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    };
    faer::set_global_parallelism(par);
}

/// Sparse matrix assembled from (row, col, value) triplets.
#[derive(Debug, Clone)]
pub struct SparseMat {
    pub mat: SparseColMat<usize, f64>,
}

impl SparseMat {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let trips: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(nrows, ncols, &trips)
            .map_err(|e| MfError::LinearSolve(format!("assembly failed: {e:?}")))?;
        Ok(SparseMat { mat })
    }

    pub fn nrows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.mat.ncols()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let xm = Mat::from_fn(x.len(), 1, |i, _| x[i]);
        let ym = &self.mat * &xm;
        (0..self.nrows()).map(|i| ym[(i, 0)]).collect()
    }

    pub fn lu(&self) -> Result<LuFactor> {
        let lu = self
            .mat
            .sp_lu()
            .map_err(|e| MfError::LinearSolve(format!("sparse LU failed: {e:?}")))?;
        Ok(LuFactor { lu })
    }
}

/// Cached sparse LU factorization.
pub struct LuFactor {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(&m);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Solves (S + c u v^T) x = r given a factorization of S.
pub struct Rank1Solver<'a> {
    factor: &'a LuFactor,
    s_inv_u: Vec<f64>,
    v: &'a [f64],
    denom: f64,
    c: f64,
}

impl<'a> Rank1Solver<'a> {
    pub fn new(factor: &'a LuFactor, u: &[f64], v: &'a [f64], c: f64) -> Result<Self> {
        let s_inv_u = factor.solve_vec(u);
        let denom = 1.0 + c * dot(v, &s_inv_u);
        if denom.abs() < 1e-300 {
            return Err(MfError::LinearSolve(
                "rank-one update is singular".into(),
            ));
        }
        Ok(Rank1Solver {
            factor,
            s_inv_u,
            v,
            denom,
            c,
        })
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = self.factor.solve_vec(rhs);
        let coeff = self.c * dot(self.v, &x) / self.denom;
        for (xi, si) in x.iter_mut().zip(&self.s_inv_u) {
            *xi -= coeff * si;
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Eigen-decomposition of a small dense symmetric matrix; returns
/// eigenvalues ascending with matching eigenvectors as columns.
pub fn dense_sym_eig(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| MfError::LinearSolve(format!("dense eigensolve failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].partial_cmp(&s[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| u[(i, j)]).collect())
        .collect();
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = SparseMat::from_triplets(
            2,
            2,
            &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        )
        .unwrap();
        let lu = a.lu().unwrap();
        let x = lu.solve_vec(&[1.0, 0.0]);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sherman_morrison_matches_dense() {
        // S = diag(2, 3, 4), u = (1,1,0), v = (0,1,1), c = 0.5
        let s = SparseMat::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0)]).unwrap();
        let lu = s.lu().unwrap();
        let u = [1.0, 1.0, 0.0];
        let v = [0.0, 1.0, 1.0];
        let solver = Rank1Solver::new(&lu, &u, &v, 0.5).unwrap();
        let rhs = [1.0, 2.0, 3.0];
        let x = solver.solve_vec(&rhs);
        // verify (S + c u v^T) x = rhs
        let full = [
            [2.0, 0.5, 0.5],
            [0.0 + 0.0, 3.0 + 0.5, 0.5],
            [0.0, 0.0, 4.0],
        ];
        for i in 0..3 {
            let got: f64 = (0..3).map(|j| full[i][j] * x[j]).sum();
            assert!((got - rhs[i]).abs() < 1e-12, "row {i}: {got}");
        }
    }

    #[test]
    fn dense_eig_on_known_matrix() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = dense_sym_eig(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // eigenvector of 1.0 is (1,-1)/sqrt2 up to sign
        assert!((vecs[0][0] + vecs[0][1]).abs() < 1e-10);
    }
}
