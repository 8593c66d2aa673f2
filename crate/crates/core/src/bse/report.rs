use serde::Serialize;

use super::{BlockRanks, FNorms};
use crate::error::{Error, Result};

pub const HARTREE_EV: f64 = 27.2114;

/// One excitation index of the accuracy table, energies in hartree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub omega: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
    pub err_gamma: f64,
    pub err_lambda: f64,
    pub err_mu: f64,
}

impl ReportRow {
    pub fn omega_ev(&self) -> f64 {
        self.omega * HARTREE_EV
    }

    pub fn err_gamma_ev(&self) -> f64 {
        self.err_gamma * HARTREE_EV
    }

    pub fn err_lambda_ev(&self) -> f64 {
        self.err_lambda * HARTREE_EV
    }

    pub fn err_mu_ev(&self) -> f64 {
        self.err_mu * HARTREE_EV
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub rows: Vec<ReportRow>,
    pub norms: FNorms,
    pub ranks: BlockRanks,
}

/// Per-index errors `|γ_n − ω_n|`, `|λ_n − ω_n|`, `|μ_n − ω_n|` over the
/// reduced-basis size `m0 = λ.len()`.
pub fn error_report(
    omega: &[f64],
    lambda: &[f64],
    gamma: &[f64],
    mu: &[f64],
    norms: FNorms,
    ranks: BlockRanks,
) -> Result<SpectrumReport> {
    let m = lambda.len();
    if gamma.len() != m || omega.len() < m || mu.len() < m {
        return Err(Error::LengthMismatch(format!(
            "omega {}, lambda {}, gamma {}, mu {}",
            omega.len(),
            m,
            gamma.len(),
            mu.len()
        )));
    }
    let rows = (0..m)
        .map(|k| ReportRow {
            n: k + 1,
            omega: omega[k],
            lambda: lambda[k],
            gamma: gamma[k],
            mu: mu[k],
            err_gamma: (gamma[k] - omega[k]).abs(),
            err_lambda: (lambda[k] - omega[k]).abs(),
            err_mu: (mu[k] - omega[k]).abs(),
        })
        .collect();
    Ok(SpectrumReport { rows, norms, ranks })
}
