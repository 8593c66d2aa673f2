//! Energy-difference diagonal, the dielectric matrix `Z = I + L_V L̃_Vᵀ`
//! through its Woodbury core, and the screened-interaction blocks.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, LowRankFactor, TruncatedSvd};
use crate::tei::PairFactor;

/// Largest `N_ov` for which dense `Z` or regrouped blocks are formed.
pub const DEFAULT_DENSE_GUARD: usize = 4096;
const Z_GUARD: usize = 512;

/// `Δε(ia) = ε_a − ε_i` in `(i, a)` row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEps {
    pub n_occ: usize,
    pub n_virt: usize,
    pub diag: Vec<f64>,
    pub gap: f64,
}

impl DeltaEps {
    pub fn n_ov(&self) -> usize {
        self.diag.len()
    }
}

pub fn delta_eps(energies: &[f64], n_occ: usize) -> Result<DeltaEps> {
    if n_occ == 0 || n_occ >= energies.len() {
        return Err(Error::InvalidParams(format!("need 1 <= n_occ < {}, got {n_occ}", energies.len())));
    }
    let (occ, virt) = energies.split_at(n_occ);
    let gap = virt[0] - occ[n_occ - 1];
    if !(gap > 0.0) {
        return Err(Error::GapNotPositive(gap));
    }
    let diag: Vec<f64> = occ.iter().flat_map(|ei| virt.iter().map(move |ea| ea - ei)).collect();
    let gap = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::GapNotPositive(gap));
    }
    Ok(DeltaEps { n_occ, n_virt: virt.len(), diag, gap })
}

/// `(I + M)⁻¹` with `M = L̃_Vᵀ L_V`, `L̃_V = diag(1/Δε) L_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenCore {
    pub m: DMatrix<f64>,
    pub core_inv: DMatrix<f64>,
}

impl ScreenCore {
    pub fn rank(&self) -> usize {
        self.core_inv.nrows()
    }
}

pub fn build_core(lv: &PairFactor, de: &DeltaEps) -> Result<ScreenCore> {
    check_rows(lv, de)?;
    let r = lv.rank();
    let mut scaled = lv.rows.clone();
    for (mut row, d) in scaled.row_iter_mut().zip(&de.diag) {
        row /= *d;
    }
    let m = scaled.tr_mul(&lv.rows);
    let m = (&m + m.transpose()) * 0.5;
    let eye = DMatrix::<f64>::identity(r, r);
    let sys = &eye + &m;
    let core_inv = Cholesky::new(sys.clone()).ok_or(Error::SingularCore)?.inverse();
    let core_inv = (&core_inv + core_inv.transpose()) * 0.5;
    let residual = (&sys * &core_inv - &eye).norm();
    if !(residual <= 1e-10 * (r.max(1) as f64).sqrt() * sys.norm().max(1.0)) {
        return Err(Error::SingularCore);
    }
    Ok(ScreenCore { m, core_inv })
}

fn check_rows(lv: &PairFactor, de: &DeltaEps) -> Result<()> {
    if lv.len() != de.n_ov() {
        return Err(Error::DimensionMismatch(format!("L_V has {} rows, delta eps has {}", lv.len(), de.n_ov())));
    }
    Ok(())
}

/// Explicit `Z` with `z_{pq,rs} = δ + v_{pq,rs}/Δε(rs)`; not symmetric.
pub fn dense_z(lv: &PairFactor, de: &DeltaEps) -> Result<DMatrix<f64>> {
    check_rows(lv, de)?;
    let n = de.n_ov();
    if n > Z_GUARD {
        return Err(Error::SizeGuard { what: "dielectric matrix", dim: n, guard: Z_GUARD });
    }
    let mut z = &lv.rows * lv.rows.transpose();
    for (mut col, d) in z.column_iter_mut().zip(&de.diag) {
        col /= *d;
    }
    for k in 0..n {
        z[(k, k)] += 1.0;
    }
    Ok(z)
}

/// `Λ_P · (I + M)⁻¹ · Λ_Qᵀ`, kept factored.
#[derive(Debug, Clone)]
pub struct WBlock {
    pub left: PairFactor,
    pub core: ScreenCore,
    pub right: PairFactor,
}

pub fn w_block(p: &PairFactor, core: &ScreenCore, q: &PairFactor) -> Result<WBlock> {
    for side in [p.rank(), q.rank()] {
        if side != core.rank() {
            return Err(Error::RankMismatch { left: side, right: core.rank() });
        }
    }
    Ok(WBlock { left: p.clone(), core: core.clone(), right: q.clone() })
}

impl WBlock {
    pub fn as_factor(&self) -> LowRankFactor {
        LowRankFactor::with_core(self.left.rows.clone(), self.core.core_inv.clone(), Some(self.right.rows.clone()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.left.rows * (&self.core.core_inv * self.right.rows.transpose())
    }
}

fn guard_ov(n_ov: usize, guard: usize) -> Result<()> {
    if n_ov > guard {
        return Err(Error::SizeGuard { what: "regrouped screened block", dim: n_ov, guard });
    }
    Ok(())
}

/// `W̄[(ia),(jb)] = w_{ij,ab}` from a block over `oo × vv`.
pub fn w_bar_dense(w: &WBlock, n_occ: usize, n_virt: usize, guard: usize) -> Result<DMatrix<f64>> {
    let (no, nv) = (n_occ, n_virt);
    if w.left.len() != no * no || w.right.len() != nv * nv {
        return Err(Error::DimensionMismatch(format!(
            "w-bar block is {}x{}, expected {}x{}",
            w.left.len(),
            w.right.len(),
            no * no,
            nv * nv
        )));
    }
    guard_ov(no * nv, guard)?;
    let e = w.to_dense();
    Ok(DMatrix::from_fn(no * nv, no * nv, |r, c| {
        let (i, a) = (r / nv, r % nv);
        let (j, b) = (c / nv, c % nv);
        e[(i * no + j, a * nv + b)]
    }))
}

/// `W̃[(ia),(jb)] = w_{ib,aj}` from the conventional `ov × ov` block, using
/// `w_{ib,aj} = w_{ib,ja}` for symmetric unfoldings.
pub fn w_tilde_dense(w: &WBlock, n_occ: usize, n_virt: usize, guard: usize) -> Result<DMatrix<f64>> {
    let n = n_occ * n_virt;
    if w.left.len() != n || w.right.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "w-tilde block is {}x{}, expected {n}x{n}",
            w.left.len(),
            w.right.len()
        )));
    }
    guard_ov(n, guard)?;
    let e = w.to_dense();
    let nv = n_virt;
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let (i, a) = (r / nv, r % nv);
        let (j, b) = (c / nv, c % nv);
        e[(i * nv + b, j * nv + a)]
    }))
}

pub fn regroup_w_bar(w: &WBlock, n_occ: usize, n_virt: usize, eps: f64, guard: usize) -> Result<TruncatedSvd> {
    Ok(truncated_svd(&w_bar_dense(w, n_occ, n_virt, guard)?, eps, usize::MAX))
}

pub fn regroup_w_tilde(w: &WBlock, n_occ: usize, n_virt: usize, eps: f64, guard: usize) -> Result<TruncatedSvd> {
    Ok(truncated_svd(&w_tilde_dense(w, n_occ, n_virt, guard)?, eps, usize::MAX))
}

/// Writes `k,sigma` rows (1-based `k`) with a header.
pub fn write_profile_csv(path: &Path, sigma: &[f64]) -> Result<()> {
    let mut out = String::from("k,sigma\n");
    for (k, s) in sigma.iter().enumerate() {
        out.push_str(&format!("{},{:e}\n", k + 1, s));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eig, SymMatrix};
    use crate::model::{synth_generate, SynthParams};
    use crate::tei::{cholesky_tei, MoTransform};
    use proptest::prelude::*;

    struct Sys {
        de: DeltaEps,
        mo: MoTransform,
        lv: PairFactor,
        n_occ: usize,
        n_virt: usize,
    }

    fn system(nb: usize, no: usize, seed: u64) -> Sys {
        let p = SynthParams { n_basis: nb, n_occ: no, gap: 0.5, decay_z: 2.0, n_terms: nb * 2, seed, tei_scale: 1.0 };
        let inp = synth_generate(&p).unwrap();
        let chol = cholesky_tei(&inp, 1e-12).unwrap();
        let mo = MoTransform::new(&chol, &inp.coeffs).unwrap();
        let lv = mo.ov(no).unwrap();
        Sys { de: delta_eps(&inp.energies, no).unwrap(), mo, lv, n_occ: no, n_virt: nb - no }
    }

    #[test]
    fn delta_eps_examples() {
        assert_eq!(delta_eps(&[-0.5, 0.3], 1).unwrap().diag, vec![0.8]);
        let d = delta_eps(&[-1.0, -0.5, 0.3, 0.7], 2).unwrap();
        let want = [1.3, 1.7, 0.8, 1.2];
        for (a, b) in d.diag.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((d.gap - 0.8).abs() < 1e-15);
        assert!(matches!(delta_eps(&[-1.0, 0.2, 0.2], 2), Err(Error::GapNotPositive(g)) if g == 0.0));
    }

    #[test]
    fn zero_and_rank_one_cores() {
        let de = delta_eps(&[-1.0, -0.5, 0.3, 0.7], 2).unwrap();
        let zero = PairFactor { pairs: vec![(0, 0); 4], rows: DMatrix::zeros(4, 2) };
        assert_eq!(build_core(&zero, &de).unwrap().core_inv, DMatrix::identity(2, 2));
        assert_eq!(dense_z(&zero, &de).unwrap(), DMatrix::identity(4, 4));

        let u = [0.3, -0.2, 0.5, 0.1];
        let one = PairFactor { pairs: vec![(0, 0); 4], rows: DMatrix::from_column_slice(4, 1, &u) };
        let c = build_core(&one, &de).unwrap();
        let want = 1.0 / (1.0 + u.iter().zip(&de.diag).map(|(x, d)| x * x / d).sum::<f64>());
        assert!((c.core_inv[(0, 0)] - want).abs() < 1e-15);
        let z = dense_z(&one, &de).unwrap();
        assert!((z[(0, 2)] - u[0] * u[2] / de.diag[2]).abs() < 1e-15);
    }

    #[test]
    fn woodbury_matches_dense_solve() {
        for (nb, no, seed) in [(6, 3, 1), (8, 2, 2), (10, 4, 3)] {
            let s = system(nb, no, seed);
            let core = build_core(&s.lv, &s.de).unwrap();
            let w = w_block(&s.lv, &core, &s.lv).unwrap().to_dense();
            let v = &s.lv.rows * s.lv.rows.transpose();
            let z = dense_z(&s.lv, &s.de).unwrap();
            let x = z.clone().lu().solve(&v).unwrap();
            assert!((&w - &x).norm() <= 1e-10 * x.norm().max(1e-300));
            assert!((&z * &w - &v).norm() <= 1e-9 * v.norm());
        }
    }

    #[test]
    fn screening_contracts_and_m_is_psd() {
        let s = system(8, 3, 4);
        let core = build_core(&s.lv, &s.de).unwrap();
        assert!(sym_eig(&SymMatrix::from_average(&core.m)).unwrap().values[0] >= -1e-12);
        let w = w_block(&s.lv, &core, &s.lv).unwrap().to_dense();
        let v = &s.lv.rows * s.lv.rows.transpose();
        let lw = *sym_eig(&SymMatrix::from_average(&w)).unwrap().values.last().unwrap();
        let lv = *sym_eig(&SymMatrix::from_average(&v)).unwrap().values.last().unwrap();
        assert!(lw <= lv * (1.0 + 1e-9));
    }

    #[test]
    fn unscreened_limit_is_bare_block() {
        let s = system(6, 2, 5);
        let (u, w) = s.mo.ext(s.n_occ).unwrap();
        let ident = ScreenCore { m: DMatrix::zeros(u.rank(), u.rank()), core_inv: DMatrix::identity(u.rank(), u.rank()) };
        let blk = w_block(&u, &ident, &w).unwrap();
        assert!((blk.to_dense() - &u.rows * w.rows.transpose()).norm() < 1e-14);
        let bad = PairFactor { pairs: vec![], rows: DMatrix::zeros(0, u.rank() + 1) };
        assert!(matches!(w_block(&u, &ident, &bad), Err(Error::RankMismatch { .. })));
    }

    #[test]
    fn extended_block_symmetric_under_pair_swap() {
        let s = system(6, 2, 6);
        let core = build_core(&s.lv, &s.de).unwrap();
        let (u, v) = s.mo.ext(s.n_occ).unwrap();
        let e = w_block(&u, &core, &v).unwrap().to_dense();
        assert!(e.iter().all(|x| x.is_finite()));
        let (no, nv) = (s.n_occ, s.n_virt);
        for i in 0..no {
            for j in 0..no {
                for c in 0..nv * nv {
                    assert!((e[(i * no + j, c)] - e[(j * no + i, c)]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn regrouping_matches_entrywise_construction() {
        // N_ov = 16.
        let s = system(8, 4, 7);
        let core = build_core(&s.lv, &s.de).unwrap();
        let (u, v) = s.mo.ext(s.n_occ).unwrap();
        let wb = w_block(&u, &core, &v).unwrap();
        let (no, nv) = (s.n_occ, s.n_virt);
        let dense_ext = wb.to_dense();
        let bar = regroup_w_bar(&wb, no, nv, 1e-10, DEFAULT_DENSE_GUARD).unwrap().into_factor().to_dense();
        for i in 0..no {
            for a in 0..nv {
                for j in 0..no {
                    for b in 0..nv {
                        let want = dense_ext[(i * no + j, a * nv + b)];
                        assert!((bar[(i * nv + a, j * nv + b)] - want).abs() < 1e-9);
                    }
                }
            }
        }
        let wc = w_block(&s.lv, &core, &s.lv).unwrap();
        let conv = wc.to_dense();
        let tilde = regroup_w_tilde(&wc, no, nv, 1e-10, DEFAULT_DENSE_GUARD).unwrap().into_factor().to_dense();
        for i in 0..no {
            for a in 0..nv {
                for j in 0..no {
                    for b in 0..nv {
                        let want = conv[(i * nv + b, j * nv + a)];
                        assert!((tilde[(i * nv + a, j * nv + b)] - want).abs() < 1e-9);
                    }
                }
            }
        }
        assert!((&tilde - tilde.transpose()).norm() <= 1e-9 * tilde.norm());
        assert!(matches!(regroup_w_bar(&wb, no, nv, 0.0, 8), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn regrouping_preserves_frobenius_and_single_occupied_relabels() {
        let s = system(7, 1, 8);
        let core = build_core(&s.lv, &s.de).unwrap();
        let (u, v) = s.mo.ext(1).unwrap();
        let wb = w_block(&u, &core, &v).unwrap();
        let bar = w_bar_dense(&wb, 1, 6, DEFAULT_DENSE_GUARD).unwrap();
        let sorted = |m: &DMatrix<f64>| {
            let mut v: Vec<f64> = m.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert_eq!(sorted(&bar), sorted(&wb.to_dense()));

        let s = system(8, 3, 9);
        let core = build_core(&s.lv, &s.de).unwrap();
        let (u, v) = s.mo.ext(3).unwrap();
        let wb = w_block(&u, &core, &v).unwrap();
        let r = regroup_w_bar(&wb, 3, 5, 0.0, DEFAULT_DENSE_GUARD).unwrap();
        let fro = r.full_spectrum.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((fro - wb.to_dense().norm()).abs() <= 1e-12 * fro);
        let wc = w_block(&s.lv, &core, &s.lv).unwrap();
        let t = w_tilde_dense(&wc, 3, 5, DEFAULT_DENSE_GUARD).unwrap();
        assert!((t.norm() - wc.to_dense().norm()).abs() <= 1e-12 * t.norm());
    }

    #[test]
    fn zero_block_regroups_to_rank_zero() {
        let core = ScreenCore { m: DMatrix::zeros(2, 2), core_inv: DMatrix::identity(2, 2) };
        let u = PairFactor { pairs: vec![(0, 0); 4], rows: DMatrix::zeros(4, 2) };
        let v = PairFactor { pairs: vec![(0, 0); 9], rows: DMatrix::zeros(9, 2) };
        let wb = w_block(&u, &core, &v).unwrap();
        assert_eq!(regroup_w_bar(&wb, 2, 3, 0.0, 64).unwrap().rank(), 0);
        let ov = PairFactor { pairs: vec![(0, 0); 6], rows: DMatrix::zeros(6, 2) };
        let wc = w_block(&ov, &core, &ov).unwrap();
        assert_eq!(regroup_w_tilde(&wc, 2, 3, 0.0, 64).unwrap().rank(), 0);
    }

    #[test]
    fn partly_transposed_v_equals_v() {
        // v_{ia,bj} from the vo rows against v_{ia,jb} from the ov rows.
        let s = system(7, 3, 10);
        let nb = 7;
        let vo: Vec<(usize, usize)> = (0..s.n_occ).flat_map(|j| (s.n_occ..nb).map(move |b| (b, j))).collect();
        let lvo = s.mo.pair_factor(&vo).unwrap();
        let v = &s.lv.rows * s.lv.rows.transpose();
        let vt = &s.lv.rows * lvo.rows.transpose();
        assert!((&vt - &v).norm() <= 1e-9 * v.norm());
    }

    #[test]
    fn regrouped_ranks_non_increasing_in_eps() {
        let s = system(8, 3, 11);
        let core = build_core(&s.lv, &s.de).unwrap();
        let (u, v) = s.mo.ext(3).unwrap();
        let wb = w_block(&u, &core, &v).unwrap();
        let wc = w_block(&s.lv, &core, &s.lv).unwrap();
        let (mut pb, mut pt) = (usize::MAX, usize::MAX);
        for eps in [0.0, 1e-8, 1e-4, 1e-2, 1e-1, 1.0] {
            let rb = regroup_w_bar(&wb, 3, 5, eps, 64).unwrap().rank();
            let rt = regroup_w_tilde(&wc, 3, 5, eps, 64).unwrap().rank();
            assert!(rb <= pb && rt <= pt);
            (pb, pt) = (rb, rt);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn z_times_w_recovers_v(seed in any::<u64>()) {
            let s = system(6, 2, seed);
            let core = build_core(&s.lv, &s.de).unwrap();
            let w = w_block(&s.lv, &core, &s.lv).unwrap().to_dense();
            let v = &s.lv.rows * s.lv.rows.transpose();
            let z = dense_z(&s.lv, &s.de).unwrap();
            prop_assert!((&z * &w - &v).norm() <= 1e-9 * v.norm().max(1e-300));
        }
    }
}
