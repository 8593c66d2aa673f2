//! End-to-end runs: factor, screen, assemble, solve and compare.

use std::time::Instant;

use serde::Serialize;

use crate::bse::{
    assemble_blocks, error_report, f_diff_norms, reduced_galerkin, solve_aux, solve_dense, solve_tda, AuxMode,
    BlockRanks, BseBlocks, FNorms, ScreenedSystem, Spectrum, SpectrumReport, Truncation, Variant,
};
use crate::error::{Error, Result};
use crate::model::BseInput;
use crate::tei::{cholesky_tei, singular_profile};

/// Knobs of a solve run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub chol_tol: f64,
    pub trunc: Truncation,
    pub variant: Variant,
    pub m0: usize,
    /// Largest dense matrix dimension (`N_ov` for regrouping, `2·N_ov` for
    /// the nonsymmetric eigensolvers).
    pub dense_guard: usize,
    pub iterative_aux: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chol_tol: 1e-8,
            trunc: Truncation::uniform(1e-2),
            variant: Variant::KeepWbar,
            m0: 10,
            dense_guard: crate::bse::DEFAULT_SOLVE_GUARD,
            iterative_aux: false,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.chol_tol > 0.0) {
            return Err(Error::InvalidParams(format!("chol_tol must be > 0, got {}", self.chol_tol)));
        }
        if self.m0 == 0 {
            return Err(Error::InvalidParams("m0 must be >= 1".into()));
        }
        self.trunc.check()
    }

    fn aux_mode(&self) -> AuxMode {
        if self.iterative_aux {
            AuxMode::Iterative { tol: 1e-12, max_iter: 1000, max_dim: self.dense_guard }
        } else {
            AuxMode::Dense { max_dim: self.dense_guard }
        }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub factor_ms: f64,
    pub screen_ms: f64,
    pub exact_ms: f64,
    pub aux_ms: f64,
    pub galerkin_ms: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Everything that does not depend on the truncation: the screened
/// system, the exact spectrum `ω` and the TDA spectrum `μ`.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub sys: ScreenedSystem,
    pub exact: BseBlocks,
    pub omega: Spectrum,
    pub mu: Spectrum,
    pub sv_b: Vec<f64>,
    pub timings: Timings,
}

pub fn baseline(input: &BseInput, cfg: &RunConfig) -> Result<Baseline> {
    cfg.check()?;
    let mut timings = Timings::default();
    let t = Instant::now();
    let chol = cholesky_tei(input, cfg.chol_tol)?;
    let sv_b = singular_profile(&chol.as_factor());
    timings.factor_ms = ms(t);

    let t = Instant::now();
    let sys = ScreenedSystem::build(input, &chol, cfg.dense_guard)?;
    timings.screen_ms = ms(t);

    let t = Instant::now();
    let exact = sys.exact();
    let omega = solve_dense(&exact, cfg.dense_guard)?;
    let mu = solve_tda(&exact)?;
    timings.exact_ms = ms(t);
    Ok(Baseline { sys, exact, omega, mu, sv_b, timings })
}

/// One truncated run against a baseline.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub variant: Variant,
    pub trunc: Truncation,
    pub m0: usize,
    pub lambda: Spectrum,
    pub gamma: Spectrum,
    pub report: SpectrumReport,
    pub aux_ms: f64,
    pub galerkin_ms: f64,
}

impl RunOutcome {
    pub fn norms(&self) -> FNorms {
        self.report.norms
    }

    pub fn ranks(&self) -> BlockRanks {
        self.report.ranks
    }
}

pub fn truncated_run(base: &Baseline, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.check()?;
    let m0 = cfg.m0.min(base.sys.n_ov());
    let blocks = assemble_blocks(&base.sys, cfg.variant, &cfg.trunc)?;
    let norms = f_diff_norms(&base.exact, &blocks);

    let t = Instant::now();
    let lambda = solve_aux(&blocks, m0, cfg.aux_mode())?;
    let aux_ms = ms(t);

    let t = Instant::now();
    let gamma = reduced_galerkin(&base.exact, &lambda.vectors)?;
    let galerkin_ms = ms(t);

    let report =
        error_report(&base.omega.values, &lambda.values, &gamma.values, &base.mu.values, norms, blocks.ranks())?;
    Ok(RunOutcome { variant: cfg.variant, trunc: cfg.trunc, m0, lambda, gamma, report, aux_ms, galerkin_ms })
}

/// Baseline plus one truncated run.
pub fn solve(input: &BseInput, cfg: &RunConfig) -> Result<(Baseline, RunOutcome)> {
    let mut base = baseline(input, cfg)?;
    let run = truncated_run(&base, cfg)?;
    base.timings.aux_ms = run.aux_ms;
    base.timings.galerkin_ms = run.galerkin_ms;
    Ok((base, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synth_generate, SynthParams, Tei};
    use crate::linalg::SymMatrix;

    fn input(seed: u64) -> BseInput {
        synth_generate(&SynthParams { n_basis: 8, n_occ: 3, gap: 0.5, decay_z: 2.0, n_terms: 24, seed, tei_scale: 1.0 })
            .unwrap()
    }

    #[test]
    fn zero_interaction_run_has_zero_errors() {
        let mut inp = input(1);
        let n2 = 64;
        inp.tei = Tei::Dense(SymMatrix::from_upper(nalgebra::DMatrix::zeros(n2, n2)));
        let cfg = RunConfig { m0: 5, ..RunConfig::default() };
        let (base, run) = solve(&inp, &cfg).unwrap();
        let mut de = base.sys.de.diag.clone();
        de.sort_by(f64::total_cmp);
        for (k, row) in run.report.rows.iter().enumerate() {
            assert!((row.omega - de[k]).abs() < 1e-14);
            assert!(row.err_gamma < 1e-14 && row.err_lambda < 1e-14 && row.err_mu < 1e-14);
        }
    }

    #[test]
    fn zero_eps_sweep_row_is_exact() {
        let inp = input(2);
        let cfg = RunConfig { trunc: Truncation::uniform(0.0), variant: Variant::TruncateAll, m0: 6, ..RunConfig::default() };
        let (_, run) = solve(&inp, &cfg).unwrap();
        assert!(run.report.rows.iter().all(|r| r.err_gamma < 1e-10 && r.err_lambda < 1e-10));
        assert!(run.norms().frobenius < 1e-12);
    }

    #[test]
    fn exact_variant_ignores_eps() {
        let inp = input(3);
        let cfg = RunConfig { trunc: Truncation::uniform(10.0), variant: Variant::Exact, m0: 4, ..RunConfig::default() };
        let (_, run) = solve(&inp, &cfg).unwrap();
        assert_eq!(run.norms().frobenius, 0.0);
        assert_eq!(run.ranks().w_bar, None);
    }

    #[test]
    fn m0_is_capped_and_config_checked() {
        let inp = input(4);
        let cfg = RunConfig { m0: 1000, ..RunConfig::default() };
        let (base, run) = solve(&inp, &cfg).unwrap();
        assert_eq!(run.m0, base.sys.n_ov());
        assert!(solve(&inp, &RunConfig { m0: 0, ..RunConfig::default() }).is_err());
        assert!(solve(&inp, &RunConfig { chol_tol: 0.0, ..RunConfig::default() }).is_err());
    }
}
