//! C interface to `bse_rbx`.
//!
//! Inputs and results are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`BseRbxStatus`]; the message of the last failure on the calling thread
//! is available from [`bse_rbx_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bse_rbx::bse::{Truncation, Variant};
use bse_rbx::model::{read_bundle, synth_generate, BseInput, SynthParams};
use bse_rbx::pipeline::{solve, Baseline, RunConfig, RunOutcome};
use bse_rbx::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BseRbxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParams = 3,
    Parse = 4,
    Validation = 5,
    Io = 6,
    NotPsd = 7,
    NotPd = 8,
    Convergence = 9,
    GapNotPositive = 10,
    SingularCore = 11,
    DimensionMismatch = 12,
    SizeGuard = 13,
    ComplexSpectrum = 14,
    RankDeficientBasis = 15,
    BufferTooSmall = 16,
    Panic = 17,
    Other = 18,
}

impl From<&Error> for BseRbxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NotPsd { .. } => BseRbxStatus::NotPsd,
            Error::NotPd { .. } => BseRbxStatus::NotPd,
            Error::ConvergenceFailure { .. } => BseRbxStatus::Convergence,
            Error::GapNotPositive(_) => BseRbxStatus::GapNotPositive,
            Error::SingularCore => BseRbxStatus::SingularCore,
            Error::RankMismatch { .. }
            | Error::DimensionMismatch(_)
            | Error::LengthMismatch(_)
            | Error::IndexOutOfRange { .. } => BseRbxStatus::DimensionMismatch,
            Error::SizeGuard { .. } => BseRbxStatus::SizeGuard,
            Error::ComplexSpectrum { .. } | Error::ComplexRitzValue { .. } => BseRbxStatus::ComplexSpectrum,
            Error::RankDeficientBasis(_) => BseRbxStatus::RankDeficientBasis,
            Error::InvalidParams(_) => BseRbxStatus::InvalidParams,
            Error::Parse { .. } => BseRbxStatus::Parse,
            Error::Validation { .. } => BseRbxStatus::Validation,
            Error::Io { .. } => BseRbxStatus::Io,
            Error::RankExceeded { .. } | Error::Json(_) => BseRbxStatus::Other,
        }
    }
}

/// Truncation variant of the auxiliary matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BseRbxVariant {
    Exact = 0,
    TruncateAll = 1,
    KeepWbar = 2,
}

impl From<BseRbxVariant> for Variant {
    fn from(v: BseRbxVariant) -> Self {
        match v {
            BseRbxVariant::Exact => Variant::Exact,
            BseRbxVariant::TruncateAll => Variant::TruncateAll,
            BseRbxVariant::KeepWbar => Variant::KeepWbar,
        }
    }
}

/// Per-index energy series of a result.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BseRbxSeries {
    /// Exact excitation energies.
    Omega = 0,
    /// Eigenvalues of the truncated auxiliary matrix.
    Lambda = 1,
    /// Reduced-basis energies.
    Gamma = 2,
    /// Tamm-Dancoff energies.
    Mu = 3,
}

/// Parameters of the seeded synthetic generator.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BseRbxSynthParams {
    pub n_basis: usize,
    pub n_occ: usize,
    pub gap: f64,
    pub decay_z: f64,
    pub n_terms: usize,
    pub seed: u64,
    pub tei_scale: f64,
}

impl From<BseRbxSynthParams> for SynthParams {
    fn from(p: BseRbxSynthParams) -> Self {
        SynthParams {
            n_basis: p.n_basis,
            n_occ: p.n_occ,
            gap: p.gap,
            decay_z: p.decay_z,
            n_terms: p.n_terms,
            seed: p.seed,
            tei_scale: p.tei_scale,
        }
    }
}

/// Knobs of a solve run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BseRbxConfig {
    pub chol_tol: f64,
    pub eps_v: f64,
    pub eps_wbar: f64,
    pub eps_wtilde: f64,
    pub variant: BseRbxVariant,
    pub m0: usize,
    pub dense_guard: usize,
    pub iterative_aux: bool,
}

impl From<BseRbxConfig> for RunConfig {
    fn from(c: BseRbxConfig) -> Self {
        RunConfig {
            chol_tol: c.chol_tol,
            trunc: Truncation { eps_v: c.eps_v, eps_wbar: c.eps_wbar, eps_wtilde: c.eps_wtilde },
            variant: c.variant.into(),
            m0: c.m0,
            dense_guard: c.dense_guard,
            iterative_aux: c.iterative_aux,
        }
    }
}

/// Size of the perturbation between the exact and truncated matrices.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BseRbxNorms {
    pub frobenius: f64,
    pub spectral: f64,
    pub f1_frobenius: f64,
    pub relative: f64,
}

/// Opaque problem input.
pub struct BseRbxInput {
    inner: BseInput,
}

/// Opaque outcome of [`bse_rbx_solve`].
pub struct BseRbxResult {
    base: Baseline,
    run: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: BseRbxStatus, msg: impl Into<String>) -> BseRbxStatus {
    set_error(msg.into());
    status
}

fn guarded(f: impl FnOnce() -> BseRbxStatus) -> BseRbxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BseRbxStatus::Panic, "internal panic"),
    }
}

fn from_error(e: Error) -> BseRbxStatus {
    let status = BseRbxStatus::from(&e);
    fail(status, format!("{}: {e}", e.code()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bse_rbx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bse_rbx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults of the synthetic generator.
#[no_mangle]
pub extern "C" fn bse_rbx_synth_params_default() -> BseRbxSynthParams {
    let p = SynthParams::default();
    BseRbxSynthParams {
        n_basis: p.n_basis,
        n_occ: p.n_occ,
        gap: p.gap,
        decay_z: p.decay_z,
        n_terms: p.n_terms,
        seed: p.seed,
        tei_scale: p.tei_scale,
    }
}

/// Defaults of a solve run.
#[no_mangle]
pub extern "C" fn bse_rbx_config_default() -> BseRbxConfig {
    let c = RunConfig::default();
    BseRbxConfig {
        chol_tol: c.chol_tol,
        eps_v: c.trunc.eps_v,
        eps_wbar: c.trunc.eps_wbar,
        eps_wtilde: c.trunc.eps_wtilde,
        variant: BseRbxVariant::KeepWbar,
        m0: c.m0,
        dense_guard: c.dense_guard,
        iterative_aux: c.iterative_aux,
    }
}

/// Generates a synthetic input.
///
/// # Safety
/// `params` must point to a valid `BseRbxSynthParams` and `out` to writable
/// storage for one pointer. On success `*out` receives a handle to be
/// released with [`bse_rbx_input_free`].
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_input_synth(
    params: *const BseRbxSynthParams,
    out: *mut *mut BseRbxInput,
) -> BseRbxStatus {
    guarded(|| {
        if params.is_null() || out.is_null() {
            return fail(BseRbxStatus::NullPointer, "null argument");
        }
        let p: SynthParams = (*params).into();
        match synth_generate(&p) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(BseRbxInput { inner }));
                BseRbxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Reads a problem bundle from `path`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` writable storage
/// for one pointer. On success `*out` receives a handle to be released with
/// [`bse_rbx_input_free`].
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_input_load(path: *const c_char, out: *mut *mut BseRbxInput) -> BseRbxStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return fail(BseRbxStatus::NullPointer, "null argument");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(BseRbxStatus::InvalidUtf8, "path is not valid UTF-8");
        };
        match read_bundle(Path::new(path)) {
            Ok((inner, _)) => {
                *out = Box::into_raw(Box::new(BseRbxInput { inner }));
                BseRbxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of occupied-virtual pairs of an input, 0 for NULL.
///
/// # Safety
/// `input` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_input_n_ov(input: *const BseRbxInput) -> usize {
    input.as_ref().map_or(0, |i| i.inner.n_ov())
}

/// Releases an input handle. NULL is ignored.
///
/// # Safety
/// `input` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_input_free(input: *mut BseRbxInput) {
    if !input.is_null() {
        drop(Box::from_raw(input));
    }
}

/// Runs the full pipeline on `input`. A NULL `config` uses the defaults.
///
/// # Safety
/// `input` must be a live input handle, `config` NULL or a valid
/// `BseRbxConfig`, and `out` writable storage for one pointer. On success
/// `*out` receives a handle to be released with [`bse_rbx_result_free`].
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_solve(
    input: *const BseRbxInput,
    config: *const BseRbxConfig,
    out: *mut *mut BseRbxResult,
) -> BseRbxStatus {
    guarded(|| {
        let Some(input) = input.as_ref() else {
            return fail(BseRbxStatus::NullPointer, "null input");
        };
        if out.is_null() {
            return fail(BseRbxStatus::NullPointer, "null output");
        }
        let cfg: RunConfig = config.as_ref().copied().unwrap_or_else(|| bse_rbx_config_default()).into();
        match solve(&input.inner, &cfg) {
            Ok((base, run)) => {
                *out = Box::into_raw(Box::new(BseRbxResult { base, run }));
                BseRbxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of reported excitation indices (the effective `m0`), 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_result_len(result: *const BseRbxResult) -> usize {
    result.as_ref().map_or(0, |r| r.run.report.rows.len())
}

/// Copies one energy series (hartree, ascending) into `buf`.
///
/// # Safety
/// `result` must be a live result handle and `buf` must point to at least
/// `len` writable doubles. `len` must be at least [`bse_rbx_result_len`].
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_result_energies(
    result: *const BseRbxResult,
    series: BseRbxSeries,
    buf: *mut f64,
    len: usize,
) -> BseRbxStatus {
    guarded(|| {
        let Some(r) = result.as_ref() else {
            return fail(BseRbxStatus::NullPointer, "null result");
        };
        if buf.is_null() {
            return fail(BseRbxStatus::NullPointer, "null buffer");
        }
        let rows = &r.run.report.rows;
        if len < rows.len() {
            return fail(BseRbxStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", rows.len()));
        }
        let out = std::slice::from_raw_parts_mut(buf, rows.len());
        for (dst, row) in out.iter_mut().zip(rows) {
            *dst = match series {
                BseRbxSeries::Omega => row.omega,
                BseRbxSeries::Lambda => row.lambda,
                BseRbxSeries::Gamma => row.gamma,
                BseRbxSeries::Mu => row.mu,
            };
        }
        BseRbxStatus::Ok
    })
}

/// Perturbation norms of a result.
///
/// # Safety
/// `result` must be a live result handle and `out` a writable
/// `BseRbxNorms`.
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_result_norms(result: *const BseRbxResult, out: *mut BseRbxNorms) -> BseRbxStatus {
    let (Some(r), false) = (result.as_ref(), out.is_null()) else {
        return fail(BseRbxStatus::NullPointer, "null argument");
    };
    let n = r.run.norms();
    *out = BseRbxNorms { frobenius: n.frobenius, spectral: n.spectral, f1_frobenius: n.f1_frobenius, relative: n.relative() };
    BseRbxStatus::Ok
}

/// Cholesky rank of the integrals behind a result, 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_result_rank_b(result: *const BseRbxResult) -> usize {
    result.as_ref().map_or(0, |r| r.base.sys.rank_b)
}

/// Releases a result handle. NULL is ignored.
///
/// # Safety
/// `result` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bse_rbx_result_free(result: *mut BseRbxResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
