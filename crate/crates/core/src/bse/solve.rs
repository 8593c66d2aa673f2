use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use super::{Block, BseBlocks};
use crate::error::{Error, Result};
use crate::linalg::{nonsym_eig, solve_spd, sym_eig, sym_sqrt, SymMatrix};

/// Largest `2·N_ov` handled by the dense nonsymmetric solvers.
pub const DEFAULT_SOLVE_GUARD: usize = 1024;
/// Largest accepted imaginary part of a reported eigenvalue.
pub const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    OmegaExact,
    LambdaAux,
    GammaReduced,
    MuTda,
}

/// Positive eigenvalues in hartree, ascending, with matching unit columns
/// (length `2·N_ov`, or `N_ov` for TDA).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Largest discarded imaginary part.
    pub max_imag: f64,
    /// `max_k |θ_k + θ_{2n−1−k}|` over the full sorted spectrum.
    pub pairing_defect: Option<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn guard(blocks: &BseBlocks, guard: usize) -> Result<()> {
    let dim = 2 * blocks.n_ov();
    if dim > guard {
        return Err(Error::SizeGuard { what: "BSE matrix", dim, guard });
    }
    Ok(())
}

/// `count` smallest positive eigenvalues of a dense `F` with vectors.
/// When `all_real`, every eigenvalue must be real within `IMAG_TOL`;
/// otherwise only the selected ones are checked.
fn dense_positive(f: &DMatrix<f64>, count: usize, all_real: bool, kind: SpectrumKind) -> Result<Spectrum> {
    let eig = nonsym_eig(f)?;
    let scan: Vec<_> = if all_real {
        eig.values.clone()
    } else {
        eig.values.iter().filter(|z| z.re > 0.0).take(count).copied().collect()
    };
    let mut max_imag = 0.0_f64;
    for z in &scan {
        if z.im.abs() > IMAG_TOL {
            return Err(Error::ComplexSpectrum { real: z.re, imag: z.im });
        }
        max_imag = max_imag.max(z.im.abs());
    }
    let re: Vec<f64> = eig.values.iter().map(|z| z.re).collect();
    let pairing_defect = all_real.then(|| {
        let n = re.len();
        (0..n).map(|k| (re[k] + re[n - 1 - k]).abs()).fold(0.0, f64::max)
    });
    let values: Vec<f64> = re.iter().copied().filter(|v| *v > 0.0).take(count).collect();
    if values.len() < count {
        return Err(Error::NotPd {
            what: "BSE matrix (too few positive excitation energies)".into(),
            min_eig: re.get(re.len() / 2).copied().unwrap_or(f64::NAN),
        });
    }
    let vectors = eig.real_eigenvectors(&values);
    Ok(Spectrum { kind, values, vectors, max_imag, pairing_defect })
}

/// Exact excitation energies from the nonsymmetric `F`.
pub fn solve_dense(blocks: &BseBlocks, max_dim: usize) -> Result<Spectrum> {
    guard(blocks, max_dim)?;
    dense_positive(&blocks.f_dense(), blocks.n_ov(), true, SpectrumKind::OmegaExact)
}

/// Half-size symmetric route: `M = S (A+B) S` with `S = (A−B)^{1/2}`,
/// `ω = √eig(M)`, `x + y = S z`, `x − y = (A+B)(x+y)/ω`.
pub fn solve_sym_reduced(blocks: &BseBlocks) -> Result<Spectrum> {
    let n = blocks.n_ov();
    let (a, b) = (blocks.a_dense(), blocks.b_dense());
    let apb = SymMatrix::from_average(&(&a + &b));
    let amb = SymMatrix::from_average(&(&a - &b));
    if Cholesky::new(apb.as_matrix().clone()).is_none() {
        let min_eig = sym_eig(&apb)?.values.first().copied().unwrap_or(f64::NAN);
        return Err(Error::NotPd { what: "A + B".into(), min_eig });
    }
    let s = sym_sqrt(&amb).map_err(|e| match e {
        Error::NotPd { min_eig, .. } => Error::NotPd { what: "A - B".into(), min_eig },
        other => other,
    })?;
    let s = s.as_matrix();
    let m = SymMatrix::from_average(&(s * apb.as_matrix() * s));
    let e = sym_eig(&m)?;
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(2 * n, n);
    for (k, lam) in e.values.iter().enumerate() {
        if !(*lam > 0.0) {
            return Err(Error::NotPd { what: "S (A+B) S".into(), min_eig: *lam });
        }
        let w = lam.sqrt();
        let sum = s * e.vectors.column(k);
        let diff = apb.as_matrix() * &sum / w;
        let x = (&sum + &diff) * 0.5;
        let y = (&sum - &diff) * 0.5;
        let mut psi = DVector::zeros(2 * n);
        psi.rows_mut(0, n).copy_from(&x);
        psi.rows_mut(n, n).copy_from(&y);
        vectors.set_column(k, &psi.normalize());
        values.push(w);
    }
    Ok(Spectrum { kind: SpectrumKind::OmegaExact, values, vectors, max_imag: 0.0, pairing_defect: None })
}

/// Tamm-Dancoff energies: the spectrum of `A`.
pub fn solve_tda(blocks: &BseBlocks) -> Result<Spectrum> {
    let e = sym_eig(&SymMatrix::from_average(&blocks.a_dense()))?;
    Ok(Spectrum { kind: SpectrumKind::MuTda, values: e.values, vectors: e.vectors, max_imag: 0.0, pairing_defect: None })
}

/// How the auxiliary problem on `F₀` is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxMode {
    Dense { max_dim: usize },
    /// Subspace iteration on `(A+B) u = ω² (A−B)⁻¹ u` with Woodbury solves;
    /// falls back to the dense path when a factor is dense or the problem
    /// is not positive definite.
    Iterative { tol: f64, max_iter: usize, max_dim: usize },
}

impl Default for AuxMode {
    fn default() -> Self {
        AuxMode::Dense { max_dim: DEFAULT_SOLVE_GUARD }
    }
}

/// The `m0` lowest positive eigenpairs of the truncated matrix. The
/// vectors are the reduced basis `G₁`.
pub fn solve_aux(blocks: &BseBlocks, m0: usize, mode: AuxMode) -> Result<Spectrum> {
    let n = blocks.n_ov();
    if m0 == 0 || m0 > n {
        return Err(Error::InvalidParams(format!("m0 must be in 1..={n}, got {m0}")));
    }
    match mode {
        AuxMode::Dense { max_dim } => dense_aux(blocks, m0, max_dim),
        AuxMode::Iterative { tol, max_iter, max_dim } => match subspace_iteration(blocks, m0, tol, max_iter)? {
            Some(s) => Ok(s),
            None => dense_aux(blocks, m0, max_dim),
        },
    }
}

fn dense_aux(blocks: &BseBlocks, m0: usize, max_dim: usize) -> Result<Spectrum> {
    guard(blocks, max_dim)?;
    dense_positive(&blocks.f_dense(), m0, false, SpectrumKind::LambdaAux)
}

/// `D + U Cᵀ` with a Woodbury solve.
struct Dplr {
    diag: Vec<f64>,
    u: DMatrix<f64>,
    c: DMatrix<f64>,
    core: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Dplr {
    fn new(diag: Vec<f64>, parts: &[(f64, &Block)]) -> Option<Self> {
        let n = diag.len();
        let mut us = Vec::new();
        let mut cs = Vec::new();
        for (sign, block) in parts {
            let Block::Factor(f) = block else { return None };
            let (l, r) = f.to_pair();
            us.push(l * *sign);
            cs.push(r);
        }
        let rank: usize = us.iter().map(|u| u.ncols()).sum();
        let mut u = DMatrix::zeros(n, rank);
        let mut c = DMatrix::zeros(n, rank);
        let mut off = 0;
        for (ui, ci) in us.iter().zip(&cs) {
            u.view_mut((0, off), (n, ui.ncols())).copy_from(ui);
            c.view_mut((0, off), (n, ci.ncols())).copy_from(ci);
            off += ui.ncols();
        }
        if diag.contains(&0.0) {
            return None;
        }
        let mut dinv_u = u.clone();
        for (mut row, d) in dinv_u.row_iter_mut().zip(&diag) {
            row /= *d;
        }
        let core = (DMatrix::identity(rank, rank) + c.tr_mul(&dinv_u)).lu();
        core.is_invertible().then_some(Dplr { diag, u, c, core })
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = &self.u * self.c.tr_mul(x);
        for (i, d) in self.diag.iter().enumerate() {
            for j in 0..x.ncols() {
                y[(i, j)] += d * x[(i, j)];
            }
        }
        y
    }

    fn solve(&self, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let mut dinv_b = b.clone();
        for (mut row, d) in dinv_b.row_iter_mut().zip(&self.diag) {
            row /= *d;
        }
        let t = self.core.solve(&self.c.tr_mul(&dinv_b))?;
        let mut corr = &self.u * t;
        for (mut row, d) in corr.row_iter_mut().zip(&self.diag) {
            row /= *d;
        }
        Some(dinv_b - corr)
    }
}

/// Generalized symmetric eigenproblem `K y = λ M y` with `M` SPD;
/// eigenvectors are `M`-orthonormal.
fn gen_sym_eig(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let ch = Cholesky::new((m + m.transpose()) * 0.5)?;
    let l = ch.l();
    let linv_k = l.solve_lower_triangular(k)?;
    let c = l.solve_lower_triangular(&linv_k.transpose())?;
    let e = sym_eig(&SymMatrix::from_average(&c)).ok()?;
    let y = l.transpose().solve_upper_triangular(&e.vectors)?;
    Some((e.values, y))
}

fn subspace_iteration(blocks: &BseBlocks, m0: usize, tol: f64, max_iter: usize) -> Result<Option<Spectrum>> {
    let n = blocks.n_ov();
    let diag = blocks.de.diag.clone();
    let Some(kp) = Dplr::new(diag.clone(), &[(2.0, &blocks.v), (-1.0, &blocks.w_bar), (-1.0, &blocks.w_tilde)]) else {
        return Ok(None);
    };
    let Some(km) = Dplr::new(diag.clone(), &[(-1.0, &blocks.w_bar), (1.0, &blocks.w_tilde)]) else {
        return Ok(None);
    };
    let width = n.min(m0 + m0.max(8));

    // Start from the coordinate vectors of the smallest Δε entries.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut u = DMatrix::from_fn(n, width, |i, j| {
        let fill = ((i * 31 + j * 17) % 101) as f64 / 101.0 - 0.5;
        if order[j] == i {
            1.0
        } else {
            1e-3 * fill
        }
    });

    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..max_iter {
        let Some(t) = km.solve(&u) else { return Ok(None) };
        let Some(y) = kp.solve(&t) else { return Ok(None) };
        let q = y.qr().q();
        let kr = q.tr_mul(&kp.apply(&q));
        let Some(mq) = km.solve(&q) else { return Ok(None) };
        let mr = q.tr_mul(&mq);
        let Some((lam, w)) = gen_sym_eig(&kr, &mr) else { return Ok(None) };
        if lam.iter().take(m0).any(|l| !(*l > 0.0)) {
            return Ok(None);
        }
        u = &q * w;
        let head: Vec<f64> = lam[..m0].to_vec();
        let done = prev.as_ref().is_some_and(|p| head.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol * a.abs()));
        prev = Some(head);
        if done {
            let lam = prev.unwrap();
            let mut vectors = DMatrix::zeros(2 * n, m0);
            let mut values = Vec::with_capacity(m0);
            for k in 0..m0 {
                let w = lam[k].sqrt();
                let sum = u.column(k).into_owned();
                let diff = kp.apply(&DMatrix::from_column_slice(n, 1, sum.as_slice())).column(0) / w;
                let mut psi = DVector::zeros(2 * n);
                psi.rows_mut(0, n).copy_from(&((&sum + &diff) * 0.5));
                psi.rows_mut(n, n).copy_from(&((&sum - &diff) * 0.5));
                vectors.set_column(k, &psi.normalize());
                values.push(w);
            }
            return Ok(Some(Spectrum { kind: SpectrumKind::LambdaAux, values, vectors, max_imag: 0.0, pairing_defect: None }));
        }
    }
    Err(Error::ConvergenceFailure { what: "auxiliary subspace iteration".into(), iterations: max_iter })
}

fn check_basis(g1: &DMatrix<f64>, rows: usize) -> Result<()> {
    if g1.nrows() != rows {
        return Err(Error::DimensionMismatch(format!("basis has {} rows, expected {rows}", g1.nrows())));
    }
    if g1.ncols() == 0 {
        return Err(Error::RankDeficientBasis(0.0));
    }
    let smin = g1.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-10) {
        return Err(Error::RankDeficientBasis(smin));
    }
    Ok(())
}

/// Galerkin projection of the exact `F₁` onto the span of `G₁`:
/// `H = Qᵀ F₁ Q` with `G₁ = QR`, eigenvalues with positive real part.
pub fn reduced_galerkin(exact: &BseBlocks, g1: &DMatrix<f64>) -> Result<Spectrum> {
    check_basis(g1, 2 * exact.n_ov())?;
    let q = g1.clone().qr().q();
    let h = q.tr_mul(&exact.apply_columns(&q));
    let eig = nonsym_eig(&h)?;
    let mut max_imag = 0.0_f64;
    let mut values = Vec::new();
    for z in &eig.values {
        if z.re > 0.0 {
            if z.im.abs() > IMAG_TOL {
                return Err(Error::ComplexRitzValue { real: z.re, imag: z.im });
            }
            max_imag = max_imag.max(z.im.abs());
            values.push(z.re);
        }
    }
    let vectors = &q * eig.real_eigenvectors(&values);
    Ok(Spectrum { kind: SpectrumKind::GammaReduced, values, vectors, max_imag, pairing_defect: None })
}

/// Rayleigh-Ritz on the symmetrized exact problem
/// `(A+B) u = ω² (A−B)⁻¹ u` over the span of `x + y` from `G₁`.
/// Ritz values are upper bounds on the exact `ω_n`.
pub fn reduced_symmetric(exact: &BseBlocks, g1: &DMatrix<f64>) -> Result<Spectrum> {
    let n = exact.n_ov();
    check_basis(g1, 2 * n)?;
    let sum = g1.rows(0, n) + g1.rows(n, n);
    let u = sum.qr().q();
    let (a, b) = (exact.a_dense(), exact.b_dense());
    let apb = (&a + &b + (&a + &b).transpose()) * 0.5;
    let amb = SymMatrix::from_average(&(&a - &b));
    let kr = u.tr_mul(&(&apb * &u));
    let mr = u.tr_mul(&solve_spd(&amb, &u)?);
    let (lam, w) = gen_sym_eig(&kr, &mr).ok_or_else(|| Error::NotPd { what: "projected A - B".into(), min_eig: f64::NAN })?;
    let mut values = Vec::with_capacity(lam.len());
    let mut vectors = DMatrix::zeros(2 * n, lam.len());
    for (k, l) in lam.iter().enumerate() {
        if !(*l > 0.0) {
            return Err(Error::NotPd { what: "projected A + B".into(), min_eig: *l });
        }
        let om = l.sqrt();
        let s = &u * w.column(k);
        let d = &apb * &s / om;
        let mut psi = DVector::zeros(2 * n);
        psi.rows_mut(0, n).copy_from(&((&s + &d) * 0.5));
        psi.rows_mut(n, n).copy_from(&((&s - &d) * 0.5));
        vectors.set_column(k, &psi.normalize());
        values.push(om);
    }
    Ok(Spectrum { kind: SpectrumKind::GammaReduced, values, vectors, max_imag: 0.0, pairing_defect: None })
}
