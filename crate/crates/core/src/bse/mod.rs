//! BSE blocks `A = Δε + V − W̄`, `B = V − W̃`, the exact matrix
//! `F₁ = [[A, B], [−B, −A]]` and its rank-truncated counterpart `F₀`.

mod report;
mod solve;

pub use report::{error_report, ReportRow, SpectrumReport, HARTREE_EV};
pub use solve::{
    reduced_galerkin, reduced_symmetric, solve_aux, solve_dense, solve_sym_reduced, solve_tda, AuxMode,
    Spectrum, SpectrumKind, DEFAULT_SOLVE_GUARD, IMAG_TOL,
};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eps_rank, spectral_norm, LowRankFactor, TruncatedSvd};
use crate::model::BseInput;
use crate::screen::{build_core, delta_eps, w_bar_dense, w_block, w_tilde_dense, DeltaEps};
use crate::tei::{recompress, CholTei, MoTransform, PairFactor};

/// Which interaction parts are rank-truncated in `F₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// No truncation: `F₀ = F₁`.
    Exact,
    /// `V`, `W̄` and `W̃` all truncated.
    TruncateAll,
    /// `V` and `W̃` truncated, `W̄` kept exact.
    #[default]
    KeepWbar,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Exact => "exact",
            Variant::TruncateAll => "truncate-all",
            Variant::KeepWbar => "keep-wbar",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Variant::Exact),
            "truncate-all" | "truncate_all" => Ok(Variant::TruncateAll),
            "keep-wbar" | "keep_wbar" => Ok(Variant::KeepWbar),
            other => Err(Error::InvalidParams(format!("unknown variant {other:?}"))),
        }
    }
}

/// Frobenius-tail thresholds for `V`, `W̄` and `W̃`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Truncation {
    pub eps_v: f64,
    pub eps_wbar: f64,
    pub eps_wtilde: f64,
}

impl Truncation {
    pub fn uniform(eps: f64) -> Self {
        Truncation { eps_v: eps, eps_wbar: eps, eps_wtilde: eps }
    }

    pub fn check(&self) -> Result<()> {
        for (name, e) in [("eps_v", self.eps_v), ("eps_wbar", self.eps_wbar), ("eps_wtilde", self.eps_wtilde)] {
            if !(e >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {e}")));
            }
        }
        Ok(())
    }
}

/// An `N_ov × N_ov` interaction part, dense or factored.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Dense(DMatrix<f64>),
    Factor(LowRankFactor),
}

impl Block {
    pub fn zero(n: usize) -> Self {
        Block::Factor(LowRankFactor::zero(n, n))
    }

    pub fn dim(&self) -> (usize, usize) {
        match self {
            Block::Dense(m) => m.shape(),
            Block::Factor(f) => (f.rows(), f.cols()),
        }
    }

    /// Inner rank of a factored block; `None` for dense.
    pub fn rank(&self) -> Option<usize> {
        match self {
            Block::Dense(_) => None,
            Block::Factor(f) => Some(f.rank()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Block::Dense(m) => m.clone(),
            Block::Factor(f) => f.to_dense(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Block::Dense(m) => m * x,
            Block::Factor(f) => f.apply(x),
        }
    }
}

/// The BSE blocks of one system for one truncation choice.
#[derive(Debug, Clone)]
pub struct BseBlocks {
    pub de: DeltaEps,
    pub v: Block,
    pub w_bar: Block,
    pub w_tilde: Block,
    pub variant: Variant,
}

impl BseBlocks {
    pub fn new(de: DeltaEps, v: Block, w_bar: Block, w_tilde: Block, variant: Variant) -> Result<Self> {
        let n = de.n_ov();
        for (name, b) in [("V", &v), ("W-bar", &w_bar), ("W-tilde", &w_tilde)] {
            if b.dim() != (n, n) {
                return Err(Error::DimensionMismatch(format!("{name} is {:?}, expected {n}x{n}", b.dim())));
            }
        }
        Ok(BseBlocks { de, v, w_bar, w_tilde, variant })
    }

    pub fn n_ov(&self) -> usize {
        self.de.n_ov()
    }

    pub fn a_dense(&self) -> DMatrix<f64> {
        let mut a = self.v.to_dense() - self.w_bar.to_dense();
        for (k, d) in self.de.diag.iter().enumerate() {
            a[(k, k)] += d;
        }
        a
    }

    pub fn b_dense(&self) -> DMatrix<f64> {
        self.v.to_dense() - self.w_tilde.to_dense()
    }

    /// `[[A, B], [−B, −A]]`.
    pub fn f_dense(&self) -> DMatrix<f64> {
        let n = self.n_ov();
        let (a, b) = (self.a_dense(), self.b_dense());
        let mut f = DMatrix::zeros(2 * n, 2 * n);
        f.view_mut((0, 0), (n, n)).copy_from(&a);
        f.view_mut((0, n), (n, n)).copy_from(&b);
        f.view_mut((n, 0), (n, n)).copy_from(&(-&b));
        f.view_mut((n, n), (n, n)).copy_from(&(-&a));
        f
    }

    /// Ranks of the factored parts, `None` for dense parts.
    pub fn ranks(&self) -> BlockRanks {
        BlockRanks { v: self.v.rank(), w_bar: self.w_bar.rank(), w_tilde: self.w_tilde.rank() }
    }

    /// `F x` from the diagonal and the three parts, never forming `F`.
    /// With every part factored the cost is `O(N_ov · Σ ranks)`.
    pub fn structured_matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n_ov();
        assert_eq!(x.len(), 2 * n, "structured_matvec needs a vector of length 2*N_ov");
        let x1 = x.rows(0, n).into_owned();
        let x2 = x.rows(n, n).into_owned();
        let vs = self.v.apply(&(&x1 + &x2));
        let wb1 = self.w_bar.apply(&x1);
        let wb2 = self.w_bar.apply(&x2);
        let wt1 = self.w_tilde.apply(&x1);
        let wt2 = self.w_tilde.apply(&x2);
        let mut y = DVector::zeros(2 * n);
        for k in 0..n {
            let d = self.de.diag[k];
            y[k] = d * x1[k] + vs[k] - wb1[k] - wt2[k];
            y[n + k] = -(d * x2[k] + vs[k] - wb2[k] - wt1[k]);
        }
        y
    }

    /// `F X` column by column.
    pub fn apply_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            out.set_column(j, &self.structured_matvec(&col.into_owned()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockRanks {
    pub v: Option<usize>,
    pub w_bar: Option<usize>,
    pub w_tilde: Option<usize>,
}

/// Untruncated ingredients of one system: `L_V`, the regrouped `W̄`, `W̃`
/// and their singular value decompositions, computed once per input and
/// reused across truncation sweeps.
#[derive(Debug, Clone)]
pub struct ScreenedSystem {
    pub de: DeltaEps,
    pub lv: PairFactor,
    pub rank_b: usize,
    pub w_bar: DMatrix<f64>,
    pub w_tilde: DMatrix<f64>,
    v_svd: TruncatedSvd,
    w_bar_svd: TruncatedSvd,
    w_tilde_svd: TruncatedSvd,
}

impl ScreenedSystem {
    pub fn build(input: &BseInput, chol: &CholTei, guard: usize) -> Result<Self> {
        let de = delta_eps(&input.energies, input.n_occ)?;
        let mo = MoTransform::new(chol, &input.coeffs)?;
        let lv = mo.ov(input.n_occ)?;
        if lv.rank() != chol.rank() {
            return Err(Error::RankMismatch { left: lv.rank(), right: chol.rank() });
        }
        let swapped: Vec<(usize, usize)> = lv.pairs.iter().map(|&(i, a)| (a, i)).collect();
        check_v_transpose(&lv, &mo.pair_factor(&swapped)?)?;
        let core = build_core(&lv, &de)?;
        let (oo, vv) = mo.ext(input.n_occ)?;
        let w_ext = w_block(&oo, &core, &vv)?;
        let w_conv = w_block(&lv, &core, &lv)?;
        let (no, nv) = (de.n_occ, de.n_virt);
        let w_bar = w_bar_dense(&w_ext, no, nv, guard)?;
        let w_tilde = w_tilde_dense(&w_conv, no, nv, guard)?;
        Ok(Self::from_parts(de, lv, w_bar, w_tilde, chol.rank()))
    }

    pub fn from_parts(de: DeltaEps, lv: PairFactor, w_bar: DMatrix<f64>, w_tilde: DMatrix<f64>, rank_b: usize) -> Self {
        let v_svd = recompress(&lv.as_factor(), 0.0);
        let w_bar_svd = crate::linalg::truncated_svd(&w_bar, 0.0, usize::MAX);
        let w_tilde_svd = crate::linalg::truncated_svd(&w_tilde, 0.0, usize::MAX);
        ScreenedSystem { de, lv, rank_b, w_bar, w_tilde, v_svd, w_bar_svd, w_tilde_svd }
    }

    pub fn n_ov(&self) -> usize {
        self.de.n_ov()
    }

    pub fn sv_v(&self) -> &[f64] {
        &self.v_svd.full_spectrum
    }

    pub fn sv_w_bar(&self) -> &[f64] {
        &self.w_bar_svd.full_spectrum
    }

    pub fn sv_w_tilde(&self) -> &[f64] {
        &self.w_tilde_svd.full_spectrum
    }

    pub fn exact(&self) -> BseBlocks {
        BseBlocks {
            de: self.de.clone(),
            v: Block::Factor(self.lv.as_factor()),
            w_bar: Block::Dense(self.w_bar.clone()),
            w_tilde: Block::Dense(self.w_tilde.clone()),
            variant: Variant::Exact,
        }
    }
}

/// Largest accepted `‖Ṽ − V‖_F / ‖V‖_F`, where `Ṽ[(ia),(jb)] = v_{ia,bj}`.
pub const V_TRANSPOSE_TOL: f64 = 1e-9;

/// Checks `Ṽ = V` from the `(i,a)` and `(a,i)` pair factors without
/// forming either matrix.
fn check_v_transpose(ov: &PairFactor, vo: &PairFactor) -> Result<()> {
    let gram = ov.rows.tr_mul(&ov.rows);
    let d = &vo.rows - &ov.rows;
    let diff = (&d * &gram).component_mul(&d).sum().max(0.0).sqrt();
    let norm = gram.norm();
    if diff > V_TRANSPOSE_TOL * norm {
        return Err(Error::Validation {
            field: "V-tilde".into(),
            message: format!("partly transposed V differs from V by {:e} relative", diff / norm),
        });
    }
    Ok(())
}

/// `ε`-rank truncation of a precomputed SVD, as a factored block.
fn truncate(svd: &TruncatedSvd, eps: f64) -> LowRankFactor {
    let r = eps_rank(&svd.full_spectrum, eps).0.min(svd.rank());
    let mut left = svd.u.columns(0, r).into_owned();
    for (k, s) in svd.s.iter().take(r).enumerate() {
        left.column_mut(k).scale_mut(*s);
    }
    LowRankFactor::product(left, svd.vt.rows(0, r).transpose())
}

pub fn assemble_blocks(sys: &ScreenedSystem, variant: Variant, trunc: &Truncation) -> Result<BseBlocks> {
    trunc.check()?;
    Ok(match variant {
        Variant::Exact => sys.exact(),
        Variant::TruncateAll => BseBlocks {
            de: sys.de.clone(),
            v: Block::Factor(truncate(&sys.v_svd, trunc.eps_v)),
            w_bar: Block::Factor(truncate(&sys.w_bar_svd, trunc.eps_wbar)),
            w_tilde: Block::Factor(truncate(&sys.w_tilde_svd, trunc.eps_wtilde)),
            variant,
        },
        Variant::KeepWbar => BseBlocks {
            de: sys.de.clone(),
            v: Block::Factor(truncate(&sys.v_svd, trunc.eps_v)),
            w_bar: Block::Dense(sys.w_bar.clone()),
            w_tilde: Block::Factor(truncate(&sys.w_tilde_svd, trunc.eps_wtilde)),
            variant,
        },
    })
}

/// Size of the perturbation `F₁ − F₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FNorms {
    pub frobenius: f64,
    pub spectral: f64,
    pub f1_frobenius: f64,
    pub delta_a: f64,
    pub delta_b: f64,
}

impl FNorms {
    pub fn relative(&self) -> f64 {
        if self.f1_frobenius == 0.0 {
            0.0
        } else {
            self.frobenius / self.f1_frobenius
        }
    }
}

pub fn f_diff_norms(exact: &BseBlocks, trunc: &BseBlocks) -> FNorms {
    let da = exact.a_dense() - trunc.a_dense();
    let db = exact.b_dense() - trunc.b_dense();
    let (na, nb) = (da.norm(), db.norm());
    let n = exact.n_ov();
    let mut diff = DMatrix::zeros(2 * n, 2 * n);
    diff.view_mut((0, 0), (n, n)).copy_from(&da);
    diff.view_mut((0, n), (n, n)).copy_from(&db);
    diff.view_mut((n, 0), (n, n)).copy_from(&(-&db));
    diff.view_mut((n, n), (n, n)).copy_from(&(-&da));
    let (a1, b1) = (exact.a_dense().norm(), exact.b_dense().norm());
    FNorms {
        frobenius: (2.0 * (na * na + nb * nb)).sqrt(),
        spectral: spectral_norm(&diff),
        f1_frobenius: (2.0 * (a1 * a1 + b1 * b1)).sqrt(),
        delta_a: na,
        delta_b: nb,
    }
}
