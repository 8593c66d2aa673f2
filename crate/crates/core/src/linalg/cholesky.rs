use nalgebra::DMatrix;

use super::{LowRankFactor, EPS};
use crate::error::{Error, Result};

/// Output of [`pivoted_cholesky`]: `B ≈ L Lᵀ` with `L` of shape `n × rank`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    pub factor: DMatrix<f64>,
    /// Pivot row chosen at each step, in order.
    pub pivots: Vec<usize>,
    /// `Σᵢ (Bᵢᵢ − Σₖ L(i,k)²)` after the last step.
    pub residual_trace: f64,
}

impl PivotedCholesky {
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn into_factor(self) -> LowRankFactor {
        LowRankFactor::symmetric(self.factor)
    }
}

/// Truncated Cholesky decomposition of a symmetric positive semidefinite
/// matrix accessed through an element oracle.
///
/// Each step pivots on the largest residual diagonal and stops once the
/// residual trace drops to `tol`. Only the pivot columns are ever requested
/// from `elem`, so the full matrix is never needed.
pub fn pivoted_cholesky<F>(elem: F, diag: &[f64], tol: f64, max_rank: usize) -> Result<PivotedCholesky>
where
    F: Fn(usize, usize) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("cholesky tolerance must be > 0, got {tol}")));
    }
    let n = diag.len();
    let max_rank = max_rank.min(n);
    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let neg_tol = (n.max(100) as f64) * EPS * scale;

    let mut d = diag.to_vec();
    for (i, v) in d.iter_mut().enumerate() {
        if *v < -neg_tol {
            return Err(Error::NotPsd { index: i, value: *v });
        }
        *v = v.max(0.0);
    }

    let mut pivoted = vec![false; n];
    let mut pivots = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();

    loop {
        let trace: f64 = d.iter().sum();
        if trace <= tol {
            break;
        }
        if cols.len() == max_rank {
            return Err(Error::RankExceeded { residual: trace, tol, max_rank });
        }
        let (p, &dp) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty diagonal");
        let root = dp.sqrt();

        let mut col = vec![0.0; n];
        for i in 0..n {
            if pivoted[i] {
                continue;
            }
            if i == p {
                col[i] = root;
                continue;
            }
            let mut v = elem(i, p);
            for c in &cols {
                v -= c[i] * c[p];
            }
            col[i] = v / root;
        }

        pivoted[p] = true;
        d[p] = 0.0;
        for i in 0..n {
            if pivoted[i] {
                continue;
            }
            let r = d[i] - col[i] * col[i];
            if r < -neg_tol {
                return Err(Error::NotPsd { index: i, value: r });
            }
            d[i] = r.max(0.0);
        }
        pivots.push(p);
        cols.push(col);
    }

    let rank = cols.len();
    let factor = DMatrix::from_fn(n, rank, |i, k| cols[k][i]);
    Ok(PivotedCholesky { factor, pivots, residual_trace: d.iter().sum() })
}
