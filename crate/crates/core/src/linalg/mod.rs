//! Dense and structured kernels shared by the factorization, screening and
//! solver layers. Everything here is a pure function of its inputs.

mod cholesky;
mod eig;
mod solve;
mod svd;

pub use cholesky::{pivoted_cholesky, PivotedCholesky};
pub use eig::{nonsym_eig, sym_eig, EigPairs, NonsymEig};
pub use solve::{frobenius, solve_spd, spectral_norm, sym_sqrt};
pub(crate) use svd::eps_rank;
pub use svd::{truncated_svd, TruncatedSvd};

use nalgebra::{DMatrix, DVector};

/// Real symmetric matrix. The upper triangle is authoritative; construction
/// mirrors it into the lower triangle so storage is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn from_upper(mut m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "SymMatrix needs a square matrix");
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                m[(i, j)] = m[(j, i)];
            }
        }
        SymMatrix(m)
    }

    /// Symmetrizes as `(m + mᵀ) / 2`.
    pub fn from_average(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "SymMatrix needs a square matrix");
        SymMatrix((m + m.transpose()) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Low-rank matrix `left · core · rightᵀ`.
///
/// A missing `core` means identity, a missing `right` means the factor is
/// symmetric in use (`right = left`). Over-complete factors (rank larger
/// than the row count) are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    left: DMatrix<f64>,
    core: Option<DMatrix<f64>>,
    right: Option<DMatrix<f64>>,
}

impl LowRankFactor {
    /// `L · Lᵀ`.
    pub fn symmetric(left: DMatrix<f64>) -> Self {
        LowRankFactor { left, core: None, right: None }
    }

    /// `L · Rᵀ`.
    pub fn product(left: DMatrix<f64>, right: DMatrix<f64>) -> Self {
        assert_eq!(left.ncols(), right.ncols(), "factor ranks differ");
        LowRankFactor { left, core: None, right: Some(right) }
    }

    /// `L · K · Rᵀ` with an explicit `R×R` core.
    pub fn with_core(left: DMatrix<f64>, core: DMatrix<f64>, right: Option<DMatrix<f64>>) -> Self {
        assert_eq!(core.nrows(), left.ncols(), "core rows must match left rank");
        let rc = right.as_ref().map_or(left.ncols(), |r| r.ncols());
        assert_eq!(core.ncols(), rc, "core cols must match right rank");
        LowRankFactor { left, core: Some(core), right }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        LowRankFactor::product(DMatrix::zeros(rows, 0), DMatrix::zeros(cols, 0))
    }

    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right().nrows()
    }

    /// Inner dimension of the factorization.
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<f64> {
        self.right.as_ref().unwrap_or(&self.left)
    }

    pub fn core(&self) -> Option<&DMatrix<f64>> {
        self.core.as_ref()
    }

    /// Folds the core into the left factor, returning `(L·K, R)`.
    pub fn to_pair(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let left = match &self.core {
            Some(k) => &self.left * k,
            None => self.left.clone(),
        };
        (left, self.right().clone())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (l, r) = self.to_pair();
        l * r.transpose()
    }

    /// `y = (L K Rᵀ) x`, never forming the full matrix.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut t = self.right().tr_mul(x);
        if let Some(k) = &self.core {
            t = k * t;
        }
        &self.left * t
    }

    /// `y = (L K Rᵀ)ᵀ x`.
    pub fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut t = self.left.tr_mul(x);
        if let Some(k) = &self.core {
            t = k.tr_mul(&t);
        }
        self.right() * t
    }
}

/// Machine epsilon for `f64`.
pub(crate) const EPS: f64 = f64::EPSILON;
