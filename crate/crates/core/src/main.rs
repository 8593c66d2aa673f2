use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bse_rbx::bse::{Truncation, Variant};
use bse_rbx::model::{read_bundle, synth_generate, write_bundle, BseInput, SynthParams};
use bse_rbx::output::{self, FactorInfo, Format, Meta, SweepDoc, SweepRow, SystemInfo};
use bse_rbx::pipeline::{baseline, truncated_run, RunConfig};
use bse_rbx::tei::{cholesky_tei, singular_profile, v_factor_ov};
use bse_rbx::{Error, Result};

#[derive(Parser)]
#[command(name = "bse-rbx", version, about = "Reduced-basis BSE excitation energies from low-rank integral factors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic problem bundle.
    Gen {
        #[command(flatten)]
        synth: SynthArgs,
        /// Output bundle path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Factor the integrals and export singular-value profiles.
    Factor {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        chol_tol: f64,
    },
    /// Run the full pipeline for one truncation.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Truncation variant.
        #[arg(long, value_enum, default_value_t = VariantArg::KeepWbar)]
        variant: VariantArg,
        /// Reduced-basis size.
        #[arg(long, default_value_t = 10)]
        m0: usize,
    },
    /// Repeat the truncated part of the pipeline over eps or m0 values.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Variant to sweep; both truncating variants when omitted.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Comma-separated truncation thresholds.
        #[arg(long, value_delimiter = ',', conflicts_with = "m0_list")]
        eps_list: Vec<f64>,
        /// Comma-separated reduced-basis sizes.
        #[arg(long, value_delimiter = ',')]
        m0_list: Vec<usize>,
        /// Reduced-basis size for eps sweeps.
        #[arg(long, default_value_t = 10)]
        m0: usize,
    },
}

#[derive(Args, Clone)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    n_basis: usize,
    #[arg(long, default_value_t = 3)]
    n_occ: usize,
    /// Homo-lumo gap in hartree.
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    /// Decay exponent of the integral spectrum.
    #[arg(long, default_value_t = 2.0)]
    decay_z: f64,
    /// Number of generator terms; defaults to 2·n_basis.
    #[arg(long)]
    n_terms: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overall amplitude of the integrals.
    #[arg(long, default_value_t = 1.0)]
    tei_scale: f64,
}

impl SynthArgs {
    fn params(&self) -> SynthParams {
        SynthParams {
            n_basis: self.n_basis,
            n_occ: self.n_occ,
            gap: self.gap,
            decay_z: self.decay_z,
            n_terms: self.n_terms.unwrap_or(2 * self.n_basis),
            seed: self.seed,
            tei_scale: self.tei_scale,
        }
    }
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Problem bundle; a synthetic problem is generated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Output format for tables.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

impl SourceArgs {
    fn load(&self) -> Result<(BseInput, Option<u64>)> {
        match &self.input {
            Some(path) => {
                let (input, report) = read_bundle(path)?;
                if report.max_symmetry_correction > 0.0 {
                    eprintln!("warning: symmetrized integrals, max correction {:e}", report.max_symmetry_correction);
                }
                let defect = input.orthonormality_defect();
                if defect > 1e-6 {
                    eprintln!("warning: coefficients not orthonormal, defect {defect:e}");
                }
                Ok((input, None))
            }
            None => Ok((synth_generate(&self.synth.params())?, Some(self.synth.seed))),
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    chol_tol: f64,
    /// Truncation threshold for V, W-bar and W-tilde.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long)]
    eps_v: Option<f64>,
    #[arg(long)]
    eps_wbar: Option<f64>,
    #[arg(long)]
    eps_wtilde: Option<f64>,
    /// Largest dense matrix dimension.
    #[arg(long, default_value_t = 1024)]
    dense_guard: usize,
    /// Solve the auxiliary problem by subspace iteration.
    #[arg(long)]
    iterative: bool,
    /// Record stage timings in meta.json.
    #[arg(long)]
    timings: bool,
}

impl RunArgs {
    fn trunc(&self, eps: f64) -> Truncation {
        Truncation {
            eps_v: self.eps_v.unwrap_or(eps),
            eps_wbar: self.eps_wbar.unwrap_or(eps),
            eps_wtilde: self.eps_wtilde.unwrap_or(eps),
        }
    }

    fn config(&self, variant: Variant, m0: usize) -> RunConfig {
        RunConfig {
            chol_tol: self.chol_tol,
            trunc: self.trunc(self.eps),
            variant,
            m0,
            dense_guard: self.dense_guard,
            iterative_aux: self.iterative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Exact,
    TruncateAll,
    KeepWbar,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Exact => Variant::Exact,
            VariantArg::TruncateAll => Variant::TruncateAll,
            VariantArg::KeepWbar => Variant::KeepWbar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BSE_RBX_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidParams(format!("BSE_RBX_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Gen { synth, out } => {
            let input = synth_generate(&synth.params())?;
            write_bundle(&input, &out)?;
            report(&[out]);
        }
        Command::Factor { source, out, chol_tol } => {
            let (input, _) = source.load()?;
            let chol = cholesky_tei(&input, chol_tol)?;
            let lv = v_factor_ov(&chol, &input.coeffs, input.n_occ)?;
            let sv_b = singular_profile(&chol.as_factor());
            let sv_v = singular_profile(&lv.as_factor());
            let info = FactorInfo::new(&input, chol_tol, chol.rank(), lv.rank(), &sv_b, &sv_v);
            report(&output::write_factor(&out, &info, &sv_b, &sv_v)?);
        }
        Command::Solve { source, run, variant, m0 } => {
            let (input, seed) = source.load()?;
            let cfg = run.config(variant.into(), m0);
            let mut base = baseline(&input, &cfg)?;
            let outcome = truncated_run(&base, &cfg)?;
            base.timings.aux_ms = outcome.aux_ms;
            base.timings.galerkin_ms = outcome.galerkin_ms;
            let mut meta = Meta::new(&input, &base, &outcome, &cfg, seed);
            if run.timings {
                meta.timings_ms = Some(base.timings.clone());
            }
            report(&output::write_solve(&run.out, source.format.into(), &meta, &base, &outcome)?);
        }
        Command::Sweep { source, run, variant, eps_list, m0_list, m0 } => {
            let (input, seed) = source.load()?;
            let variants: Vec<Variant> = match variant {
                Some(v) => vec![v.into()],
                None => vec![Variant::TruncateAll, Variant::KeepWbar],
            };
            let cfg = run.config(variants[0], m0);
            let base = baseline(&input, &cfg)?;
            let mut rows = Vec::new();
            for &v in &variants {
                if !m0_list.is_empty() {
                    for &m in &m0_list {
                        let outcome = truncated_run(&base, &run.config(v, m))?;
                        rows.push(SweepRow::new("m0", m as f64, &outcome));
                    }
                } else {
                    let list = if eps_list.is_empty() { vec![run.eps] } else { eps_list.clone() };
                    for &eps in &list {
                        let c = RunConfig { trunc: run.trunc(eps), ..run.config(v, m0) };
                        rows.push(SweepRow::new("eps", eps, &truncated_run(&base, &c)?));
                    }
                }
            }
            let doc = SweepDoc {
                tool: "bse-rbx",
                version: env!("CARGO_PKG_VERSION"),
                system: SystemInfo::of(&input),
                chol_tol: run.chol_tol,
                rank_b: base.sys.rank_b,
                seed,
                rows,
            };
            report(&output::write_sweep(&run.out, source.format.into(), &doc)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
