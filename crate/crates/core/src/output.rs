//! Report files: `spectrum.csv`/`spectrum.json`, `meta.json`, `factor.json`,
//! `sweep.csv`/`sweep.json` and singular-value profiles.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bse::{ReportRow, Variant, HARTREE_EV};
use crate::error::{Error, Result};
use crate::linalg::eps_rank;
use crate::model::BseInput;
use crate::pipeline::{Baseline, RunConfig, RunOutcome, Timings};
use crate::screen::write_profile_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemInfo {
    pub n_basis: usize,
    pub n_occ: usize,
    pub n_virt: usize,
    pub n_ov: usize,
    pub gap: f64,
    pub tei: &'static str,
}

impl SystemInfo {
    pub fn of(input: &BseInput) -> Self {
        SystemInfo {
            n_basis: input.n_basis,
            n_occ: input.n_occ,
            n_virt: input.n_virt(),
            n_ov: input.n_ov(),
            gap: input.gap(),
            tei: input.tei.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigInfo {
    pub chol_tol: f64,
    pub eps_v: f64,
    pub eps_wbar: f64,
    pub eps_wtilde: f64,
    pub variant: Variant,
    pub m0: usize,
    pub dense_guard: usize,
    pub iterative_aux: bool,
    pub seed: Option<u64>,
}

impl ConfigInfo {
    pub fn of(cfg: &RunConfig, seed: Option<u64>) -> Self {
        ConfigInfo {
            chol_tol: cfg.chol_tol,
            eps_v: cfg.trunc.eps_v,
            eps_wbar: cfg.trunc.eps_wbar,
            eps_wtilde: cfg.trunc.eps_wtilde,
            variant: cfg.variant,
            m0: cfg.m0,
            dense_guard: cfg.dense_guard,
            iterative_aux: cfg.iterative_aux,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankInfo {
    pub b: usize,
    pub v: Option<usize>,
    pub w_bar: Option<usize>,
    pub w_tilde: Option<usize>,
    pub m0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormInfo {
    pub f_diff_frobenius: f64,
    pub f_diff_spectral: f64,
    pub f1_frobenius: f64,
    pub f_diff_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckInfo {
    pub pairing_defect: Option<f64>,
    pub max_imag_omega: f64,
    pub max_imag_lambda: f64,
    pub max_imag_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub energy_unit: &'static str,
    pub hartree_ev: f64,
    pub system: SystemInfo,
    pub config: ConfigInfo,
    pub ranks: RankInfo,
    pub norms: NormInfo,
    pub checks: CheckInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Timings>,
}

impl Meta {
    pub fn new(input: &BseInput, base: &Baseline, run: &RunOutcome, cfg: &RunConfig, seed: Option<u64>) -> Self {
        let n = run.norms();
        let r = run.ranks();
        Meta {
            tool: "bse-rbx",
            version: env!("CARGO_PKG_VERSION"),
            energy_unit: "hartree",
            hartree_ev: HARTREE_EV,
            system: SystemInfo::of(input),
            config: ConfigInfo::of(cfg, seed),
            ranks: RankInfo { b: base.sys.rank_b, v: r.v, w_bar: r.w_bar, w_tilde: r.w_tilde, m0: run.m0 },
            norms: NormInfo {
                f_diff_frobenius: n.frobenius,
                f_diff_spectral: n.spectral,
                f1_frobenius: n.f1_frobenius,
                f_diff_relative: n.relative(),
            },
            checks: CheckInfo {
                pairing_defect: base.omega.pairing_defect,
                max_imag_omega: base.omega.max_imag,
                max_imag_lambda: run.lambda.max_imag,
                max_imag_gamma: run.gamma.max_imag,
            },
            timings_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct SpectrumRowJson {
    n: usize,
    omega: f64,
    omega_ev: f64,
    lambda: f64,
    gamma: f64,
    mu: f64,
    err_gamma: f64,
    err_lambda: f64,
    err_mu: f64,
    err_gamma_ev: f64,
    err_lambda_ev: f64,
    err_mu_ev: f64,
}

impl From<&ReportRow> for SpectrumRowJson {
    fn from(r: &ReportRow) -> Self {
        SpectrumRowJson {
            n: r.n,
            omega: r.omega,
            omega_ev: r.omega_ev(),
            lambda: r.lambda,
            gamma: r.gamma,
            mu: r.mu,
            err_gamma: r.err_gamma,
            err_lambda: r.err_lambda,
            err_mu: r.err_mu,
            err_gamma_ev: r.err_gamma_ev(),
            err_lambda_ev: r.err_lambda_ev(),
            err_mu_ev: r.err_mu_ev(),
        }
    }
}

const SPECTRUM_HEADER: &str =
    "n,omega,omega_ev,lambda,gamma,mu,err_gamma,err_lambda,err_mu,err_gamma_ev,err_lambda_ev,err_mu_ev";

pub fn spectrum_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{SPECTRUM_HEADER}\n");
    for r in rows {
        let j = SpectrumRowJson::from(r);
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            j.n,
            j.omega,
            j.omega_ev,
            j.lambda,
            j.gamma,
            j.mu,
            j.err_gamma,
            j.err_lambda,
            j.err_mu,
            j.err_gamma_ev,
            j.err_lambda_ev,
            j.err_mu_ev
        )
        .unwrap();
    }
    out
}

pub fn spectrum_json(rows: &[ReportRow]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc {
        energy_unit: &'static str,
        rows: Vec<SpectrumRowJson>,
    }
    let doc = Doc { energy_unit: "hartree", rows: rows.iter().map(SpectrumRowJson::from).collect() };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the spectrum table, `meta.json` and the regrouped-block profiles.
pub fn write_solve(dir: &Path, format: Format, meta: &Meta, base: &Baseline, run: &RunOutcome) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    files.push(match format {
        Format::Csv => write(&dir.join("spectrum.csv"), &spectrum_csv(&run.report.rows))?,
        Format::Json => write(&dir.join("spectrum.json"), &spectrum_json(&run.report.rows)?)?,
    });
    files.push(write(&dir.join("meta.json"), &to_json(meta)?)?);
    for (name, sv) in [("sv_Wbar.csv", base.sys.sv_w_bar()), ("sv_Wtilde.csv", base.sys.sv_w_tilde())] {
        let path = dir.join(name);
        write_profile_csv(&path, &nonzero(sv))?;
        files.push(path);
    }
    Ok(files)
}

fn nonzero(sv: &[f64]) -> Vec<f64> {
    sv.iter().copied().filter(|s| *s > 0.0).collect()
}

/// `ε`-rank of `V` with the computable error and the `N_b·ε·|ln ε|` envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub eps: f64,
    pub rank_v: usize,
    pub rank_b: usize,
    pub error_v: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorInfo {
    pub tool: &'static str,
    pub version: &'static str,
    pub system: SystemInfo,
    pub chol_tol: f64,
    pub rank_b: usize,
    pub rank_v: usize,
    pub ranks: Vec<RankRow>,
}

pub const FACTOR_EPS_GRID: [f64; 8] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-6, 1e-8];

impl FactorInfo {
    pub fn new(input: &BseInput, chol_tol: f64, rank_b: usize, rank_v: usize, sv_b: &[f64], sv_v: &[f64]) -> Self {
        let nb = input.n_basis as f64;
        let ranks = FACTOR_EPS_GRID
            .iter()
            .map(|&eps| {
                let (rv, tail) = eps_rank(sv_v, eps);
                RankRow { eps, rank_v: rv, rank_b: eps_rank(sv_b, eps).0, error_v: tail, envelope: nb * eps * eps.ln().abs() }
            })
            .collect();
        FactorInfo {
            tool: "bse-rbx",
            version: env!("CARGO_PKG_VERSION"),
            system: SystemInfo::of(input),
            chol_tol,
            rank_b,
            rank_v,
            ranks,
        }
    }
}

pub fn write_factor(dir: &Path, info: &FactorInfo, sv_b: &[f64], sv_v: &[f64]) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = vec![write(&dir.join("factor.json"), &to_json(info)?)?];
    for (name, sv) in [("sv_B.csv", sv_b), ("sv_V.csv", sv_v)] {
        let path = dir.join(name);
        write_profile_csv(&path, &nonzero(sv))?;
        files.push(path);
    }
    Ok(files)
}

/// One line of a truncation or basis-size sweep, first-excitation errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub variant: Variant,
    pub m0: usize,
    pub eps_v: f64,
    pub eps_wbar: f64,
    pub eps_wtilde: f64,
    pub rank_v: Option<usize>,
    pub rank_wbar: Option<usize>,
    pub rank_wtilde: Option<usize>,
    pub f_diff_frobenius: f64,
    pub f_diff_spectral: f64,
    pub f_diff_relative: f64,
    pub omega1: f64,
    pub lambda1: f64,
    pub gamma1: f64,
    pub mu1: f64,
    pub err_gamma1: f64,
    pub err_lambda1: f64,
    pub err_mu1: f64,
    pub err_gamma1_ev: f64,
}

impl SweepRow {
    pub fn new(param: &'static str, value: f64, run: &RunOutcome) -> Self {
        let r = run.report.rows[0];
        let n = run.norms();
        let k = run.ranks();
        SweepRow {
            param,
            value,
            variant: run.variant,
            m0: run.m0,
            eps_v: run.trunc.eps_v,
            eps_wbar: run.trunc.eps_wbar,
            eps_wtilde: run.trunc.eps_wtilde,
            rank_v: k.v,
            rank_wbar: k.w_bar,
            rank_wtilde: k.w_tilde,
            f_diff_frobenius: n.frobenius,
            f_diff_spectral: n.spectral,
            f_diff_relative: n.relative(),
            omega1: r.omega,
            lambda1: r.lambda,
            gamma1: r.gamma,
            mu1: r.mu,
            err_gamma1: r.err_gamma,
            err_lambda1: r.err_lambda,
            err_mu1: r.err_mu,
            err_gamma1_ev: r.err_gamma_ev(),
        }
    }
}

const SWEEP_HEADER: &str = "param,value,variant,m0,eps_v,eps_wbar,eps_wtilde,rank_v,rank_wbar,rank_wtilde,\
f_diff_frobenius,f_diff_spectral,f_diff_relative,omega1,lambda1,gamma1,mu1,err_gamma1,err_lambda1,err_mu1,err_gamma1_ev";

fn opt(v: Option<usize>) -> String {
    v.map(|r| r.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{:e},{},{},{:e},{:e},{:e},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.param,
            r.value,
            r.variant,
            r.m0,
            r.eps_v,
            r.eps_wbar,
            r.eps_wtilde,
            opt(r.rank_v),
            opt(r.rank_wbar),
            opt(r.rank_wtilde),
            r.f_diff_frobenius,
            r.f_diff_spectral,
            r.f_diff_relative,
            r.omega1,
            r.lambda1,
            r.gamma1,
            r.mu1,
            r.err_gamma1,
            r.err_lambda1,
            r.err_mu1,
            r.err_gamma1_ev
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDoc {
    pub tool: &'static str,
    pub version: &'static str,
    pub system: SystemInfo,
    pub chol_tol: f64,
    pub rank_b: usize,
    pub seed: Option<u64>,
    pub rows: Vec<SweepRow>,
}

pub fn write_sweep(dir: &Path, format: Format, doc: &SweepDoc) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![match format {
        Format::Csv => write(&dir.join("sweep.csv"), &sweep_csv(&doc.rows))?,
        Format::Json => write(&dir.join("sweep.json"), &to_json(doc)?)?,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_and_column_counts() {
        let row = ReportRow { n: 1, omega: 0.5, lambda: 0.6, gamma: 0.55, mu: 0.52, err_gamma: 0.05, err_lambda: 0.1, err_mu: 0.02 };
        let csv = spectrum_csv(&[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SPECTRUM_HEADER);
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
        assert!(lines[1].starts_with("1,5e-1,1.36057e1,"));
        let json: serde_json::Value = serde_json::from_str(&spectrum_json(&[row]).unwrap()).unwrap();
        assert_eq!(json["rows"][0]["n"], 1);
        assert_eq!(sweep_csv(&[]).lines().next().unwrap().split(',').count(), 21);
    }
}
