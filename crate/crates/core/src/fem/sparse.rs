//! Compressed-row sparse matrices and direct solves.
//!
//! Factorizations are delegated to `faer`'s sparse LU. A CSR matrix has the
//! same arrays as the CSC form of its transpose, so the factorization is
//! computed for `Aᵀ` and systems with `A` use the transposed solve.

use std::sync::Arc;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, MatMut};

use crate::error::{Error, Result};

/// Row pointers and sorted column indices of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsePattern {
    /// Pattern coupling every pair of DOFs that share a cell.
    pub fn from_cells(n: usize, cell_dofs: &[usize], n_local: usize) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for cell in cell_dofs.chunks_exact(n_local) {
            for &i in cell {
                rows[i].extend_from_slice(cell);
            }
        }
        Self::from_rows(rows)
    }

    /// Pattern from arbitrary per-row column lists (duplicates allowed).
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage position of entry `(i, j)`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Square CSR matrix over a shared pattern.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("entry ({i},{j}) outside {n}x{n}")));
            }
            rows[i].push(j);
        }
        let mut m = Self::zeros(Arc::new(SparsePattern::from_rows(rows)));
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t).expect("indices in range")
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha A x`.
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            *yi += alpha * s;
        }
    }

    /// `y += alpha Aᵀ x`.
    pub fn mul_transpose_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, &xi) in x.iter().enumerate() {
            let s = alpha * xi;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                y[p.col_idx[k]] += self.values[k] * s;
            }
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let p = &self.pattern;
        (0..self.n())
            .map(|i| {
                let mut s = 0.0;
                for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                    s += self.values[k] * y[p.col_idx[k]];
                }
                x[i] * s
            })
            .sum()
    }

    /// `self += alpha other`; both must share the same pattern.
    pub fn axpy(&mut self, alpha: f64, other: &SparseMatrix) -> Result<()> {
        if self.pattern != other.pattern {
            return Err(Error::InvalidArgument("sparsity patterns differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `max |A - Aᵀ| / max |A|`.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Replaces the rows and columns of `dofs` by those of the identity.
    pub fn eliminate(&mut self, mask: &[bool]) {
        let p = self.pattern.clone();
        for i in 0..self.n() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                if mask[i] || mask[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n()]; self.n()];
        let p = &self.pattern;
        for (i, row) in d.iter_mut().enumerate() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                row[p.col_idx[k]] += self.values[k];
            }
        }
        d
    }

    fn infinity_norm(&self) -> f64 {
        let p = &self.pattern;
        (0..self.n())
            .map(|i| self.values[p.row_ptr[i]..p.row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Symbolic LU analysis reusable for every matrix sharing one pattern.
#[derive(Clone)]
pub struct LuAnalysis {
    pattern: Arc<SparsePattern>,
    symbolic_csc: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLu<usize>,
}

impl LuAnalysis {
    pub fn new(pattern: Arc<SparsePattern>) -> Result<Self> {
        let symbolic_csc = SymbolicSparseColMat::new_checked(
            pattern.n,
            pattern.n,
            pattern.row_ptr.clone(),
            None,
            pattern.col_idx.clone(),
        );
        let symbolic = SymbolicLu::try_new(symbolic_csc.as_ref()).map_err(|e| Error::SolverFailure {
            reason: format!("symbolic analysis failed: {e:?}"),
            residual: f64::NAN,
            condition: f64::NAN,
        })?;
        Ok(Self {
            pattern,
            symbolic_csc,
            symbolic,
        })
    }

    pub fn factor(&self, a: &SparseMatrix) -> Result<SparseLu> {
        if *a.pattern != *self.pattern {
            return Err(Error::InvalidArgument("matrix pattern differs from the analysed one".into()));
        }
        let at = SparseColMatRef::new(self.symbolic_csc.as_ref(), &a.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), at).map_err(|e| Error::SolverFailure {
            reason: format!("numeric factorization failed: {e:?}"),
            residual: f64::NAN,
            condition: f64::INFINITY,
        })?;
        Ok(SparseLu { lu, n: a.n() })
    }
}

/// Numeric LU factors of a [`SparseMatrix`].
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        LuAnalysis::new(a.pattern.clone())?.factor(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        self.lu
            .solve_transpose_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(b, n, 1));
    }

    /// Overwrites `b` with `A⁻ᵀ b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        self.lu
            .solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(b, n, 1));
    }
}

/// Solves `A x = b` to relative residual `1e-10`, with one refinement step.
pub fn solve_sparse(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-10;
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.len(),
        });
    }
    let lu = SparseLu::new(a)?;
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);
    let bnorm = norm2(b);
    let residual = |x: &[f64]| {
        let mut r = b.to_vec();
        a.mul_add(-1.0, x, &mut r);
        r
    };
    let mut r = residual(&x);
    let mut rel = if bnorm > 0.0 { norm2(&r) / bnorm } else { norm2(&r) };
    if rel > TOL && rel.is_finite() {
        lu.solve_in_place(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        r = residual(&x);
        rel = if bnorm > 0.0 { norm2(&r) / bnorm } else { norm2(&r) };
    }
    if !(rel <= TOL) {
        let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Err(Error::SolverFailure {
            reason: "residual above tolerance after refinement".into(),
            residual: rel,
            condition: a.infinity_norm() * xnorm / bmax.max(f64::MIN_POSITIVE),
        });
    }
    Ok(x)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_returns_rhs() {
        let a = SparseMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        assert_eq!(solve_sparse(&a, &b).unwrap(), b);
    }

    #[test]
    fn nonsymmetric_solve_and_transpose_solve() {
        let t = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, -2.0), (1, 1, 3.0), (2, 1, 0.5), (2, 2, 2.0)];
        let a = SparseMatrix::from_triplets(3, &t).unwrap();
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let x = solve_sparse(&a, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
        let lu = SparseLu::new(&a).unwrap();
        let mut bt = vec![0.0; 3];
        a.mul_transpose_add(1.0, &x_true, &mut bt);
        lu.solve_transpose_in_place(&mut bt);
        for (u, v) in bt.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(solve_sparse(&a, &[1.0, 0.0]), Err(Error::SolverFailure { .. })));
    }

    #[test]
    fn eliminate_keeps_unit_diagonal() {
        let mut a = SparseMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        a.eliminate(&[true, false]);
        assert_eq!(a.to_dense(), vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
    }

    #[test]
    fn random_spd_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let b_mat = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let spd = &b_mat * b_mat.transpose() + nalgebra::DMatrix::<f64>::identity(n, n) * n as f64;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, spd[(i, j)]));
            }
        }
        let a = SparseMatrix::from_triplets(n, &t).unwrap();
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_sparse(&a, &rhs).unwrap();
        let oracle = spd.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        let diff: f64 = x.iter().zip(oracle.iter()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-9, "{diff}");
    }
}
