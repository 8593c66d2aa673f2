//! Low-rank factors of the two-electron integrals: the Cholesky factor of
//! the AO matrix `B`, its MO-basis pair factors and ε-rank recompression.

use std::borrow::Cow;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{pivoted_cholesky, truncated_svd, LowRankFactor, TruncatedSvd};
use crate::model::{pair_index, BseInput, Tei, TEI_SYMMETRY_TOL};

/// Cholesky factor `L` (`N_b² × R_B`) of the TEI matrix with symmetric
/// `N_b × N_b` unfoldings `L_k`.
#[derive(Debug, Clone)]
pub struct CholTei {
    n_basis: usize,
    columns: DMatrix<f64>,
    /// Residual-trace tolerance the factor was built with, when known.
    tol: Option<f64>,
}

impl CholTei {
    /// Wraps raw columns, checking and enforcing `L_k = L_kᵀ`.
    /// Returns the factor and the largest correction applied.
    pub fn from_columns(n_basis: usize, mut columns: DMatrix<f64>, tol: Option<f64>) -> Result<(Self, f64)> {
        if columns.nrows() != n_basis * n_basis {
            return Err(Error::DimensionMismatch(format!(
                "cholesky factor has {} rows, expected {}",
                columns.nrows(),
                n_basis * n_basis
            )));
        }
        let mut max_corr = 0.0_f64;
        for k in 0..columns.ncols() {
            let mut col = columns.column_mut(k);
            let norm = col.norm();
            let mut asym2 = 0.0;
            for mu in 0..n_basis {
                for nu in (mu + 1)..n_basis {
                    let d = col[pair_index(n_basis, mu, nu)] - col[pair_index(n_basis, nu, mu)];
                    asym2 += 2.0 * d * d;
                }
            }
            if asym2.sqrt() > TEI_SYMMETRY_TOL * norm {
                return Err(Error::Validation {
                    field: "tei asymmetry".into(),
                    message: format!("unfolding {k} asymmetric: {:e} relative", asym2.sqrt() / norm),
                });
            }
            for mu in 0..n_basis {
                for nu in (mu + 1)..n_basis {
                    let (a, b) = (pair_index(n_basis, mu, nu), pair_index(n_basis, nu, mu));
                    let avg = 0.5 * (col[a] + col[b]);
                    max_corr = max_corr.max((col[a] - avg).abs());
                    col[a] = avg;
                    col[b] = avg;
                }
            }
        }
        Ok((CholTei { n_basis, columns, tol }, max_corr))
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn tol(&self) -> Option<f64> {
        self.tol
    }

    /// `L_k` as an `N_b × N_b` matrix.
    pub fn unfolding(&self, k: usize) -> DMatrix<f64> {
        let nb = self.n_basis;
        DMatrix::from_fn(nb, nb, |mu, nu| self.columns[(pair_index(nb, mu, nu), k)])
    }

    pub fn as_factor(&self) -> LowRankFactor {
        LowRankFactor::symmetric(self.columns.clone())
    }
}

impl PartialEq for CholTei {
    fn eq(&self, other: &Self) -> bool {
        self.n_basis == other.n_basis && self.columns == other.columns
    }
}

/// Cholesky factor of the input's TEI matrix. A pre-factored input is
/// returned as-is without recomputation.
pub fn cholesky_tei(input: &BseInput, tol: f64) -> Result<Cow<'_, CholTei>> {
    match &input.tei {
        Tei::Cholesky(c) => Ok(Cow::Borrowed(c)),
        Tei::Dense(b) => {
            let m = b.as_matrix();
            let diag: Vec<f64> = m.diagonal().iter().copied().collect();
            let f = pivoted_cholesky(|i, j| m[(i, j)], &diag, tol, diag.len())?;
            let (chol, _) = CholTei::from_columns(input.n_basis, f.factor, Some(tol))?;
            Ok(Cow::Owned(chol))
        }
    }
}

/// Rows `(C_pᵀ L_k C_q)_k` for an ordered list of orbital pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFactor {
    pub pairs: Vec<(usize, usize)>,
    pub rows: DMatrix<f64>,
}

impl PairFactor {
    pub fn rank(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn as_factor(&self) -> LowRankFactor {
        LowRankFactor::symmetric(self.rows.clone())
    }
}

/// `(i, a)` with `i` occupied, `a` virtual; row `i·N_v + (a − N_orb)`.
pub fn ov_pairs(n_basis: usize, n_occ: usize) -> Vec<(usize, usize)> {
    (0..n_occ).flat_map(|i| (n_occ..n_basis).map(move |a| (i, a))).collect()
}

/// `(i, j)`, both occupied; row `i·N_orb + j`.
pub fn oo_pairs(n_occ: usize) -> Vec<(usize, usize)> {
    (0..n_occ).flat_map(|i| (0..n_occ).map(move |j| (i, j))).collect()
}

/// `(a, b)`, both virtual; row `(a − N_orb)·N_v + (b − N_orb)`.
pub fn vv_pairs(n_basis: usize, n_occ: usize) -> Vec<(usize, usize)> {
    (n_occ..n_basis).flat_map(|a| (n_occ..n_basis).map(move |b| (a, b))).collect()
}

/// Half-transformed unfoldings `T_k = Cᵀ L_k C`, from which every pair
/// factor is an entry lookup.
#[derive(Debug, Clone)]
pub struct MoTransform {
    n_basis: usize,
    t: Vec<DMatrix<f64>>,
}

impl MoTransform {
    pub fn new(chol: &CholTei, coeffs: &DMatrix<f64>) -> Result<Self> {
        let nb = chol.n_basis();
        if coeffs.shape() != (nb, nb) {
            return Err(Error::DimensionMismatch(format!("coefficients {:?}, expected {nb}x{nb}", coeffs.shape())));
        }
        let t = (0..chol.rank())
            .into_par_iter()
            .map(|k| {
                let lk = chol.unfolding(k);
                let t = coeffs.tr_mul(&(lk * coeffs));
                // Symmetric by construction; pin it exactly.
                (&t + t.transpose()) * 0.5
            })
            .collect();
        Ok(MoTransform { n_basis: nb, t })
    }

    pub fn rank(&self) -> usize {
        self.t.len()
    }

    pub fn pair_factor(&self, pairs: &[(usize, usize)]) -> Result<PairFactor> {
        let nb = self.n_basis;
        for &(p, q) in pairs {
            for idx in [p, q] {
                if idx >= nb {
                    return Err(Error::IndexOutOfRange { index: idx, n: nb });
                }
            }
        }
        let rows = DMatrix::from_fn(pairs.len(), self.t.len(), |r, k| {
            let (p, q) = pairs[r];
            self.t[k][(p, q)]
        });
        Ok(PairFactor { pairs: pairs.to_vec(), rows })
    }

    pub fn ov(&self, n_occ: usize) -> Result<PairFactor> {
        self.pair_factor(&ov_pairs(self.n_basis, n_occ))
    }

    /// `(U_V, W_V)` over the `oo` and `vv` pair sets.
    pub fn ext(&self, n_occ: usize) -> Result<(PairFactor, PairFactor)> {
        Ok((self.pair_factor(&oo_pairs(n_occ))?, self.pair_factor(&vv_pairs(self.n_basis, n_occ))?))
    }
}

pub fn pair_factor(chol: &CholTei, coeffs: &DMatrix<f64>, pairs: &[(usize, usize)]) -> Result<PairFactor> {
    MoTransform::new(chol, coeffs)?.pair_factor(pairs)
}

/// `L_V` with `V = L_V L_Vᵀ` on the `ov × ov` index set.
pub fn v_factor_ov(chol: &CholTei, coeffs: &DMatrix<f64>, n_occ: usize) -> Result<PairFactor> {
    MoTransform::new(chol, coeffs)?.ov(n_occ)
}

/// `(U_V, W_V)` with `V = U_V W_Vᵀ` of shape `N_orb² × N_v²`.
pub fn v_factor_ext(chol: &CholTei, coeffs: &DMatrix<f64>, n_occ: usize) -> Result<(PairFactor, PairFactor)> {
    MoTransform::new(chol, coeffs)?.ext(n_occ)
}

/// ε-rank recompression of a low-rank product: QR of both sides, SVD of the
/// small core, Frobenius-tail truncation. The output rank never exceeds the
/// input rank and the discarded tail is reported in the result.
pub fn recompress(f: &LowRankFactor, eps: f64) -> TruncatedSvd {
    let (left, right) = f.to_pair();
    let (ql, rl) = thin_qr(left);
    let (qr, rr) = thin_qr(right);
    let core = &rl * rr.transpose();
    let t = truncated_svd(&core, eps, usize::MAX);
    TruncatedSvd { u: ql * t.u, s: t.s, vt: t.vt * qr.transpose(), full_spectrum: t.full_spectrum, tail: t.tail }
}

/// Singular values of the represented matrix, descending, from the small
/// core only. Exact zeros are dropped.
pub fn singular_profile(f: &LowRankFactor) -> Vec<f64> {
    if f.rank() == 0 || f.rows() == 0 || f.cols() == 0 {
        return Vec::new();
    }
    let (left, right) = f.to_pair();
    let (_, rl) = thin_qr(left);
    let (_, rr) = thin_qr(right);
    let mut sv: Vec<f64> = (&rl * rr.transpose()).singular_values().iter().copied().filter(|s| *s > 0.0).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn thin_qr(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if m.ncols() == 0 || m.nrows() == 0 {
        let (r, c) = m.shape();
        return (DMatrix::zeros(r, 0), DMatrix::zeros(0, c));
    }
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Dense four-index MO transform of `B` by direct quadruple summation:
/// entry `[(p,q),(r,s)] = Σ C_μp C_νq C_λr C_σs b_{μν,λσ}`. Reference
/// implementation for small systems only.
pub fn dense_mo_transform(b: &DMatrix<f64>, coeffs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    const GUARD: usize = 8;
    let nb = coeffs.nrows();
    if nb > GUARD {
        return Err(Error::SizeGuard { what: "four-index transform", dim: nb, guard: GUARD });
    }
    let n2 = nb * nb;
    let mut out = DMatrix::zeros(n2, n2);
    for p in 0..nb {
        for q in 0..nb {
            for r in 0..nb {
                for s in 0..nb {
                    let mut acc = 0.0;
                    for mu in 0..nb {
                        for nu in 0..nb {
                            let cmn = coeffs[(mu, p)] * coeffs[(nu, q)];
                            if cmn == 0.0 {
                                continue;
                            }
                            for la in 0..nb {
                                for si in 0..nb {
                                    acc += cmn
                                        * coeffs[(la, r)]
                                        * coeffs[(si, s)]
                                        * b[(pair_index(nb, mu, nu), pair_index(nb, la, si))];
                                }
                            }
                        }
                    }
                    out[(pair_index(nb, p, q), pair_index(nb, r, s))] = acc;
                }
            }
        }
    }
    Ok(out)
}
