//! Problem inputs: orbital energies, MO coefficients and two-electron
//! integrals, plus validation, the text bundle format and a seeded generator.

mod bundle;
mod synth;

pub use bundle::{parse_bundle, read_bundle, write_bundle, write_bundle_string, LoadReport};
pub use synth::{synth_generate, tei_terms, SynthParams};

use std::fmt;

use nalgebra::DMatrix;

use crate::linalg::{sym_eig, SymMatrix};
use crate::tei::CholTei;

/// Relative tolerance on TEI symmetry under `μ ↔ ν` before symmetrization.
pub const TEI_SYMMETRY_TOL: f64 = 1e-8;
/// Largest `N_b²` for which validation runs the dense PSD check.
const PSD_CHECK_MAX_DIM: usize = 1024;

/// Two-electron integrals, either as the dense `N_b² × N_b²` matrix
/// `b_{μν,λσ}` or as a precomputed Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Tei {
    Dense(SymMatrix),
    Cholesky(CholTei),
}

impl Tei {
    pub fn kind(&self) -> &'static str {
        match self {
            Tei::Dense(_) => "dense",
            Tei::Cholesky(_) => "cholesky",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BseInput {
    pub n_basis: usize,
    pub n_occ: usize,
    /// Orbital energies in hartree, ascending.
    pub energies: Vec<f64>,
    /// MO coefficients, one orbital per column.
    pub coeffs: DMatrix<f64>,
    pub tei: Tei,
}

/// Row-major composite index of the orbital pair `(μ, ν)`.
#[inline]
pub fn pair_index(n_basis: usize, mu: usize, nu: usize) -> usize {
    mu * n_basis + nu
}

impl BseInput {
    pub fn n_virt(&self) -> usize {
        self.n_basis - self.n_occ
    }

    pub fn n_ov(&self) -> usize {
        self.n_occ * self.n_virt()
    }

    /// `ε_lumo − ε_homo`.
    pub fn gap(&self) -> f64 {
        self.energies[self.n_occ] - self.energies[self.n_occ - 1]
    }

    /// Empty iff every input invariant holds.
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// `‖CᵀC − I‖_F`, reported as a warning above `1e-6` since AO overlap
    /// need not be the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.coeffs.ncols();
        (self.coeffs.tr_mul(&self.coeffs) - DMatrix::identity(n, n)).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Name of the violated invariant.
    pub field: &'static str,
    pub message: String,
    pub value: Option<f64>,
}

impl Violation {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        Violation { field, message: message.into(), value: None }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) => write!(f, "{}: {} ({v:e})", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Largest `|b_{μν,λσ} − b_{νμ,λσ}|` relative to `max |b|`.
pub fn dense_tei_asymmetry(b: &SymMatrix, n_basis: usize) -> f64 {
    let m = b.as_matrix();
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for mu in 0..n_basis {
        for nu in (mu + 1)..n_basis {
            let r1 = pair_index(n_basis, mu, nu);
            let r2 = pair_index(n_basis, nu, mu);
            for c in 0..m.ncols() {
                worst = worst.max((m[(r1, c)] - m[(r2, c)]).abs());
            }
        }
    }
    worst / scale
}

pub fn validate(input: &BseInput) -> Vec<Violation> {
    let mut out = Vec::new();
    let nb = input.n_basis;
    if nb == 0 || input.n_occ == 0 || input.n_occ >= nb {
        out.push(Violation::new("n_occ", format!("need 1 <= n_occ < n_basis, got n_occ={} n_basis={nb}", input.n_occ)));
        return out;
    }
    if input.energies.len() != nb {
        out.push(Violation::new("energies", format!("expected {nb} energies, got {}", input.energies.len())));
        return out;
    }
    if input.coeffs.shape() != (nb, nb) {
        out.push(Violation::new("coeffs", format!("expected {nb}x{nb} coefficients, got {:?}", input.coeffs.shape())));
        return out;
    }
    if input.energies.iter().any(|e| !e.is_finite()) {
        out.push(Violation::new("energies", "non-finite energy"));
    } else if input.energies.windows(2).any(|w| w[1] < w[0]) {
        out.push(Violation::new("energies", "energies not ascending"));
    } else if !(input.gap() > 0.0) {
        out.push(Violation {
            field: "gap",
            message: "homo-lumo gap not positive".into(),
            value: Some(input.gap()),
        });
    }
    if input.coeffs.iter().any(|c| !c.is_finite()) {
        out.push(Violation::new("coeffs", "non-finite coefficient"));
    }
    match &input.tei {
        Tei::Dense(b) => {
            if b.dim() != nb * nb {
                out.push(Violation::new("tei", format!("expected dimension {}, got {}", nb * nb, b.dim())));
                return out;
            }
            if b.as_matrix().iter().any(|v| !v.is_finite()) {
                out.push(Violation::new("tei", "non-finite integral"));
                return out;
            }
            let asym = dense_tei_asymmetry(b, nb);
            if asym > TEI_SYMMETRY_TOL {
                out.push(Violation { field: "tei asymmetry", message: "tei asymmetry".into(), value: Some(asym) });
            }
            if b.dim() <= PSD_CHECK_MAX_DIM {
                if let Ok(e) = sym_eig(b) {
                    let lmax = e.values.last().copied().unwrap_or(0.0).max(0.0);
                    let lmin = e.values.first().copied().unwrap_or(0.0);
                    if lmin < -1e-9 * lmax.max(f64::MIN_POSITIVE) {
                        out.push(Violation { field: "tei psd", message: "tei not positive semidefinite".into(), value: Some(lmin) });
                    }
                }
            }
        }
        Tei::Cholesky(c) => {
            if c.n_basis() != nb {
                out.push(Violation::new("tei", format!("factor built for n_basis={}, expected {nb}", c.n_basis())));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_params() -> SynthParams {
        SynthParams { n_basis: 4, n_occ: 1, gap: 1.0, decay_z: 2.0, n_terms: 4, seed: 7, tei_scale: 1.0 }
    }

    #[test]
    fn synthetic_input_is_valid() {
        let input = synth_generate(&small_params()).unwrap();
        assert!(input.validate().is_empty());
        assert!(input.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn zero_gap_reported() {
        let mut input = synth_generate(&small_params()).unwrap();
        input.energies[1] = input.energies[0];
        let v = input.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "homo-lumo gap not positive");
        assert_eq!(v[0].value, Some(0.0));
    }

    #[test]
    fn perturbed_tei_flagged_asymmetric() {
        let mut input = synth_generate(&small_params()).unwrap();
        let Tei::Dense(b) = &input.tei else { unreachable!() };
        let mut m = b.as_matrix().clone();
        // Break (μν) ↔ (νμ) on a diagonal entry, which keeps B symmetric and PSD.
        let r = pair_index(4, 0, 1);
        m[(r, r)] += 1e-4;
        input.tei = Tei::Dense(SymMatrix::from_upper(m));
        let fields: Vec<_> = input.validate().iter().map(|v| v.field).collect();
        assert_eq!(fields, vec!["tei asymmetry"]);
    }

    #[test]
    fn bad_occupation_and_order() {
        let mut input = synth_generate(&small_params()).unwrap();
        input.n_occ = 4;
        assert_eq!(input.validate()[0].field, "n_occ");
        let mut input = synth_generate(&small_params()).unwrap();
        input.energies.swap(2, 3);
        assert_eq!(input.validate()[0].field, "energies");
    }
}
