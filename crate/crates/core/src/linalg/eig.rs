use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use super::{SymMatrix, EPS};
use crate::error::{Error, Result};

/// Eigenvalues (ascending) with column-aligned eigenvectors.
#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn iteration_cap(n: usize) -> usize {
    1000 * n.max(1)
}

pub fn sym_eig(m: &SymMatrix) -> Result<EigPairs> {
    let n = m.dim();
    if n == 0 {
        return Ok(EigPairs { values: Vec::new(), vectors: DMatrix::zeros(0, 0) });
    }
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), EPS, iteration_cap(n)).ok_or_else(|| {
        Error::ConvergenceFailure { what: "symmetric eigensolver".into(), iterations: iteration_cap(n) }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigPairs { values, vectors })
}

/// Real Schur form `M = Q T Qᵀ` and the (possibly complex) spectrum of a
/// general square matrix, sorted by real part then imaginary part.
#[derive(Debug, Clone)]
pub struct NonsymEig {
    pub values: Vec<Complex64>,
    q: DMatrix<f64>,
    t: DMatrix<f64>,
}

pub fn nonsym_eig(m: &DMatrix<f64>) -> Result<NonsymEig> {
    assert!(m.is_square(), "nonsym_eig needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return Ok(NonsymEig { values: Vec::new(), q: DMatrix::zeros(0, 0), t: DMatrix::zeros(0, 0) });
    }
    let schur = Schur::try_new(m.clone(), EPS, iteration_cap(n)).ok_or_else(|| Error::ConvergenceFailure {
        what: "real Schur decomposition".into(),
        iterations: iteration_cap(n),
    })?;
    let mut values: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let (q, t) = schur.unpack();
    Ok(NonsymEig { values, q, t })
}

impl NonsymEig {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Unit eigenvectors for the given real eigenvalues, one column each.
    ///
    /// Computed by inverse iteration on the quasi-triangular Schur factor, so
    /// each solve is `O(n²)`. Eigenvalues that coincide to working precision
    /// are iterated together from distinct start vectors and orthonormalized,
    /// which yields a basis of the eigenspace.
    pub fn real_eigenvectors(&self, targets: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, targets.len());
        if n == 0 {
            return out;
        }
        let tnorm = self.t.norm();
        let small = EPS * tnorm.max(f64::MIN_POSITIVE);

        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]));
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() {
                let a = targets[order[end - 1]];
                let b = targets[order[end]];
                if (b - a).abs() > 1e-10 * tnorm.max(1.0) {
                    break;
                }
                end += 1;
            }
            let cluster = &order[start..end];
            let mut ys: Vec<DVector<f64>> = cluster.iter().enumerate().map(|(j, _)| start_vector(n, start + j)).collect();
            for _ in 0..3 {
                for (y, &idx) in ys.iter_mut().zip(cluster) {
                    *y = quasi_triangular_shifted_solve(&self.t, targets[idx], y, small);
                }
                orthonormalize(&mut ys);
            }
            for (y, &idx) in ys.iter().zip(cluster) {
                let v = &self.q * y;
                out.set_column(idx, &v.normalize());
            }
            start = end;
        }
        out
    }
}

fn start_vector(n: usize, salt: usize) -> DVector<f64> {
    // Deterministic, dense, and different per cluster member.
    DVector::from_fn(n, |i, _| {
        let x = ((i + 1) as f64 * 0.618_033_988_749_895 + (salt + 1) as f64 * 0.414_213_562_373_095).fract();
        x - 0.5 + 1e-3
    })
}

fn orthonormalize(ys: &mut [DVector<f64>]) {
    for j in 0..ys.len() {
        for i in 0..j {
            let (head, tail) = ys.split_at_mut(j);
            let proj = head[i].dot(&tail[0]);
            tail[0].axpy(-proj, &head[i], 1.0);
        }
        let norm = ys[j].norm();
        if norm > 0.0 {
            ys[j] /= norm;
        }
    }
}

/// Solves `(T − σI) y = b` for upper quasi-triangular `T`, replacing pivots
/// smaller than `small` so that exact eigenvalue shifts stay finite.
fn quasi_triangular_shifted_solve(t: &DMatrix<f64>, sigma: f64, b: &DVector<f64>, small: f64) -> DVector<f64> {
    let n = t.nrows();
    let mut y = b.clone();
    let mut i = n;
    while i > 0 {
        let two = i >= 2 && t[(i - 1, i - 2)] != 0.0;
        if two {
            let (r0, r1) = (i - 2, i - 1);
            let mut rhs0 = y[r0];
            let mut rhs1 = y[r1];
            for k in i..n {
                rhs0 -= t[(r0, k)] * y[k];
                rhs1 -= t[(r1, k)] * y[k];
            }
            let (y0, y1) = solve_2x2(
                t[(r0, r0)] - sigma,
                t[(r0, r1)],
                t[(r1, r0)],
                t[(r1, r1)] - sigma,
                rhs0,
                rhs1,
                small,
            );
            y[r0] = y0;
            y[r1] = y1;
            i -= 2;
        } else {
            let r = i - 1;
            let mut rhs = y[r];
            for k in i..n {
                rhs -= t[(r, k)] * y[k];
            }
            let mut piv = t[(r, r)] - sigma;
            if piv.abs() < small {
                piv = if piv < 0.0 { -small } else { small };
            }
            y[r] = rhs / piv;
            i -= 1;
        }
        let norm = y.amax();
        if norm > 1e150 {
            y /= norm;
        }
    }
    y
}

fn solve_2x2(a: f64, b: f64, c: f64, d: f64, r0: f64, r1: f64, small: f64) -> (f64, f64) {
    // Gaussian elimination with partial pivoting.
    if a.abs() >= c.abs() {
        let a = if a.abs() < small { small } else { a };
        let l = c / a;
        let mut u = d - l * b;
        if u.abs() < small {
            u = if u < 0.0 { -small } else { small };
        }
        let y1 = (r1 - l * r0) / u;
        ((r0 - b * y1) / a, y1)
    } else {
        let l = a / c;
        let mut u = b - l * d;
        if u.abs() < small {
            u = if u < 0.0 { -small } else { small };
        }
        let y1 = (r0 - l * r1) / u;
        ((r1 - d * y1) / c, y1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymMatrix::from_upper(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn diagonal_sorted() {
        let e = sym_eig(&SymMatrix::from_diagonal(&[2.0, -1.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0]);
    }

    #[test]
    fn swap_matrix() {
        let m = SymMatrix::from_upper(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let e = sym_eig(&m).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vectors.column(0);
        let v1 = e.vectors.column(1);
        assert!((v0[0].abs() - h).abs() < 1e-14 && (v0[0] + v0[1]).abs() < 1e-14);
        assert!((v1[0] - v1[1]).abs() < 1e-14);
    }

    #[test]
    fn trace_identity_and_residuals() {
        let m = random_sym(30, 1);
        let e = sym_eig(&m).unwrap();
        let tr = m.as_matrix().trace();
        let sum: f64 = e.values.iter().sum();
        assert!((tr - sum).abs() <= 1e-10 * tr.abs().max(1.0));
        let norm = m.as_matrix().norm();
        for (k, v) in e.values.iter().enumerate() {
            let x = e.vectors.column(k);
            assert!((m.as_matrix() * x - x * *v).norm() <= 1e-10 * norm);
        }
        let gram = e.vectors.tr_mul(&e.vectors);
        assert!((gram - DMatrix::identity(30, 30)).norm() < 1e-10);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = nonsym_eig(&m).unwrap();
        assert!(e.values[0].re.abs() < 1e-15 && (e.values[0].im + 1.0).abs() < 1e-15);
        assert!((e.values[1].im - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonsym_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = nonsym_eig(&m).unwrap();
        let re: Vec<f64> = e.values.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![1.0, 2.0, 3.0]);
        let v = e.real_eigenvectors(&re);
        for k in 0..3 {
            assert!((&m * v.column(k) - v.column(k) * re[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_eigenspace_gets_a_basis() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 1.0, 1.0]));
        let e = nonsym_eig(&m).unwrap();
        let re: Vec<f64> = e.values.iter().map(|c| c.re).collect();
        let v = e.real_eigenvectors(&re);
        for k in 0..4 {
            assert!((&m * v.column(k) - v.column(k) * re[k]).norm() < 1e-12);
        }
        let ones = v.columns(0, 3);
        let g = ones.tr_mul(&ones);
        assert!((g - DMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn hamiltonian_structure_pairs_and_matches_symmetrized() {
        let n = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
        let h = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.2..0.2));
        let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 2.0 + i as f64)) + (&g + g.transpose()) * 0.5;
        let b = (&h + h.transpose()) * 0.5;
        let mut f = DMatrix::zeros(2 * n, 2 * n);
        f.view_mut((0, 0), (n, n)).copy_from(&a);
        f.view_mut((0, n), (n, n)).copy_from(&b);
        f.view_mut((n, 0), (n, n)).copy_from(&(-&b));
        f.view_mut((n, n), (n, n)).copy_from(&(-&a));
        let e = nonsym_eig(&f).unwrap();
        for k in 0..2 * n {
            assert!(e.values[k].im.abs() < 1e-10);
            assert!((e.values[k].re + e.values[2 * n - 1 - k].re).abs() < 1e-10);
        }
        // Oracle: ω² are eigenvalues of (A−B)^{1/2}(A+B)(A−B)^{1/2}.
        let s = crate::linalg::sym_sqrt(&SymMatrix::from_average(&(&a - &b))).unwrap();
        let m = s.as_matrix() * (&a + &b) * s.as_matrix();
        let w = sym_eig(&SymMatrix::from_average(&m)).unwrap();
        for k in 0..n {
            assert!((e.values[n + k].re - w.values[k].sqrt()).abs() < 1e-10);
        }
        let pos: Vec<f64> = e.values[n..].iter().map(|c| c.re).collect();
        let v = e.real_eigenvectors(&pos);
        for k in 0..n {
            assert!((&f * v.column(k) - v.column(k) * pos[k]).norm() < 1e-10 * f.norm());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sym_and_nonsym_agree_on_symmetric_input(seed in any::<u64>(), n in 1usize..16) {
            let m = random_sym(n, seed);
            let s = sym_eig(&m).unwrap();
            let g = nonsym_eig(m.as_matrix()).unwrap();
            for (a, b) in s.values.iter().zip(&g.values) {
                prop_assert!((a - b.re).abs() < 1e-8);
                prop_assert!(b.im.abs() < 1e-8);
            }
        }
    }
}
