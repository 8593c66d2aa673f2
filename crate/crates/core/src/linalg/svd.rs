use nalgebra::{DMatrix, SVD};

use super::LowRankFactor;

/// Rank-truncated SVD `M ≈ U · diag(S) · Vt`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    /// Retained singular values, descending.
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
    /// All singular values of the input, descending.
    pub full_spectrum: Vec<f64>,
    /// Frobenius norm of the discarded part, `(Σ_{k>r} σ_k²)^{1/2}`.
    pub tail: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `(U·diag(S), V)` as a rectangular low-rank factor.
    pub fn into_factor(self) -> LowRankFactor {
        let mut left = self.u;
        for (k, s) in self.s.iter().enumerate() {
            left.column_mut(k).scale_mut(*s);
        }
        LowRankFactor::product(left, self.vt.transpose())
    }
}

/// Smallest rank `r` with `(Σ_{k>r} σ_k²)^{1/2} ≤ eps`, given descending `sv`.
pub(crate) fn eps_rank(sv: &[f64], eps: f64) -> (usize, f64) {
    let mut tail2 = 0.0;
    let mut r = sv.len();
    while r > 0 {
        let next = tail2 + sv[r - 1] * sv[r - 1];
        if next.sqrt() > eps {
            break;
        }
        tail2 = next;
        r -= 1;
    }
    (r, tail2.sqrt())
}

/// Truncated SVD with the Frobenius-tail criterion, capped at `max_rank`.
/// `eps = 0` keeps every nonzero singular value.
pub fn truncated_svd(m: &DMatrix<f64>, eps: f64, max_rank: usize) -> TruncatedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return TruncatedSvd {
            u: DMatrix::zeros(rows, 0),
            s: Vec::new(),
            vt: DMatrix::zeros(0, cols),
            full_spectrum: Vec::new(),
            tail: 0.0,
        };
    }
    let svd = SVD::new(m.clone(), true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let (r_eps, _) = eps_rank(&sv, eps.max(0.0));
    let r = r_eps.min(max_rank);
    let tail = sv[r..].iter().map(|s| s * s).sum::<f64>().sqrt();
    let u = svd.u.expect("u requested").columns(0, r).into_owned();
    let vt = svd.v_t.expect("v_t requested").rows(0, r).into_owned();
    TruncatedSvd { u, s: sv[..r].to_vec(), vt, full_spectrum: sv, tail }
}
