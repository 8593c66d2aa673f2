use nalgebra::{Cholesky, DMatrix, DVector};

use super::{sym_eig, SymMatrix};
use crate::error::{Error, Result};

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Spectral norm estimate by power iteration on `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 97) as f64);
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..1000 {
        let y = m.tr_mul(&(m * &x));
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        x = y / norm;
        if (next - est).abs() <= 1e-13 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sym_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let e = sym_eig(m)?;
    let norm = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = e.values.first().copied().unwrap_or(1.0);
    if min <= 1e-12 * norm {
        return Err(Error::NotPd { what: "matrix under square root".into(), min_eig: min });
    }
    let mut scaled = e.vectors.clone();
    for (k, v) in e.values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v.sqrt());
    }
    Ok(SymMatrix::from_average(&(scaled * e.vectors.transpose())))
}

pub fn solve_spd(m: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match Cholesky::new(m.as_matrix().clone()) {
        Some(c) => Ok(c.solve(rhs)),
        None => {
            let min_eig = sym_eig(m).map(|e| e.values[0]).unwrap_or(f64::NAN);
            Err(Error::NotPd { what: "system matrix".into(), min_eig })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::from_average(&(&g * g.transpose() + DMatrix::identity(n, n) * 0.5))
    }

    #[test]
    fn sqrt_of_diagonal_and_identity() {
        let s = sym_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((s.as_matrix() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-14);
        let i = sym_sqrt(&SymMatrix::identity(3)).unwrap();
        assert!((i.as_matrix() - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn sqrt_squares_back_and_commutes() {
        let m = random_spd(20, 4);
        let s = sym_sqrt(&m).unwrap();
        let (s, m) = (s.as_matrix(), m.as_matrix());
        assert!((s * s - m).norm() / m.norm() <= 1e-10);
        assert!((s * m - m * s).norm() <= 1e-9 * m.norm() * s.norm());
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let r = sym_sqrt(&SymMatrix::from_diagonal(&[1.0, -1.0]));
        assert!(matches!(r, Err(Error::NotPd { min_eig, .. }) if min_eig == -1.0));
    }

    #[test]
    fn spd_solves() {
        let rhs = DMatrix::from_row_slice(2, 1, &[1.5, -2.0]);
        assert_eq!(solve_spd(&SymMatrix::identity(2), &rhs).unwrap(), rhs);
        let x = solve_spd(&SymMatrix::from_diagonal(&[2.0]), &DMatrix::from_element(1, 1, 6.0)).unwrap();
        assert!((x[(0, 0)] - 3.0).abs() < 1e-15);

        let m = random_spd(15, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rhs = DMatrix::from_fn(15, 4, |_, _| rng.random_range(-1.0..1.0));
        let x = solve_spd(&m, &rhs).unwrap();
        let res = (m.as_matrix() * &x - &rhs).norm();
        assert!(res <= 1e-12 * m.as_matrix().norm() * x.norm() + 1e-12 * rhs.norm());
    }

    #[test]
    fn spectral_norm_matches_largest_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = DMatrix::from_fn(10, 7, |_, _| rng.random_range(-1.0..1.0));
        let sv = m.clone().singular_values();
        let top = sv.iter().fold(0.0_f64, |a, b| a.max(*b));
        assert!((spectral_norm(&m) - top).abs() < 1e-8 * top);
    }
}
