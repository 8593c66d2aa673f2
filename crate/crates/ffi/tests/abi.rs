use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use bse_rbx_ffi::*;

fn last_error() -> String {
    let p = bse_rbx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn synth_input(seed: u64) -> *mut BseRbxInput {
    let mut params = bse_rbx_synth_params_default();
    params.seed = seed;
    let mut input = ptr::null_mut();
    assert_eq!(unsafe { bse_rbx_input_synth(&params, &mut input) }, BseRbxStatus::Ok);
    input
}

#[test]
fn synth_solve_and_read_back() {
    let input = synth_input(1);
    assert_eq!(unsafe { bse_rbx_input_n_ov(input) }, 15);
    let mut cfg = bse_rbx_config_default();
    cfg.m0 = 4;
    let mut result = ptr::null_mut();
    assert_eq!(unsafe { bse_rbx_solve(input, &cfg, &mut result) }, BseRbxStatus::Ok);
    let n = unsafe { bse_rbx_result_len(result) };
    assert_eq!(n, 4);
    let mut series = [[0.0; 4]; 4];
    for (k, s) in [BseRbxSeries::Omega, BseRbxSeries::Lambda, BseRbxSeries::Gamma, BseRbxSeries::Mu].into_iter().enumerate() {
        assert_eq!(unsafe { bse_rbx_result_energies(result, s, series[k].as_mut_ptr(), 4) }, BseRbxStatus::Ok);
    }
    let [omega, lambda, gamma, _] = series;
    assert!(omega.windows(2).all(|w| w[0] <= w[1]) && omega[0] > 0.0);
    assert!((gamma[0] - omega[0]).abs() <= (lambda[0] - omega[0]).abs() + 1e-12);
    let mut norms = BseRbxNorms::default();
    assert_eq!(unsafe { bse_rbx_result_norms(result, &mut norms) }, BseRbxStatus::Ok);
    assert!(norms.frobenius > 0.0 && norms.relative < 1.0);
    assert!(unsafe { bse_rbx_result_rank_b(result) } > 0);
    unsafe {
        bse_rbx_result_free(result);
        bse_rbx_input_free(input);
    }
}

#[test]
fn matches_library_results() {
    let input = synth_input(4);
    let mut result = ptr::null_mut();
    assert_eq!(unsafe { bse_rbx_solve(input, ptr::null(), &mut result) }, BseRbxStatus::Ok);
    let mut gamma = vec![0.0; 10];
    assert_eq!(unsafe { bse_rbx_result_energies(result, BseRbxSeries::Gamma, gamma.as_mut_ptr(), 10) }, BseRbxStatus::Ok);
    let lib_input = bse_rbx::model::synth_generate(&bse_rbx::model::SynthParams { seed: 4, ..Default::default() }).unwrap();
    let (_, run) = bse_rbx::pipeline::solve(&lib_input, &Default::default()).unwrap();
    for (a, row) in gamma.iter().zip(&run.report.rows) {
        assert_eq!(*a, row.gamma);
    }
    unsafe {
        bse_rbx_result_free(result);
        bse_rbx_input_free(input);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut params = bse_rbx_synth_params_default();
    params.n_occ = 0;
    let mut input = ptr::null_mut();
    assert_eq!(unsafe { bse_rbx_input_synth(&params, &mut input) }, BseRbxStatus::InvalidParams);
    assert!(input.is_null());
    assert!(last_error().starts_with("INVALID_PARAMS"));

    assert_eq!(unsafe { bse_rbx_input_synth(ptr::null(), &mut input) }, BseRbxStatus::NullPointer);
    let missing = CString::new("/nonexistent/bundle.txt").unwrap();
    assert_eq!(unsafe { bse_rbx_input_load(missing.as_ptr(), &mut input) }, BseRbxStatus::Io);

    let input = synth_input(2);
    let mut cfg = bse_rbx_config_default();
    cfg.m0 = 0;
    let mut result = ptr::null_mut();
    assert_eq!(unsafe { bse_rbx_solve(input, &cfg, &mut result) }, BseRbxStatus::InvalidParams);
    cfg.m0 = 3;
    cfg.dense_guard = 4;
    assert_eq!(unsafe { bse_rbx_solve(input, &cfg, &mut result) }, BseRbxStatus::SizeGuard);
    assert!(last_error().starts_with("SIZE_GUARD"));

    cfg.dense_guard = 1024;
    assert_eq!(unsafe { bse_rbx_solve(input, &cfg, &mut result) }, BseRbxStatus::Ok);
    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { bse_rbx_result_energies(result, BseRbxSeries::Omega, small.as_mut_ptr(), 2) },
        BseRbxStatus::BufferTooSmall
    );
    unsafe {
        bse_rbx_result_free(result);
        bse_rbx_input_free(input);
        bse_rbx_input_free(ptr::null_mut());
        bse_rbx_result_free(ptr::null_mut());
    }
    assert_eq!(unsafe { bse_rbx_input_n_ov(ptr::null()) }, 0);
}

#[test]
fn load_bundle_from_disk() {
    let input = bse_rbx::model::synth_generate(&bse_rbx::model::SynthParams { n_basis: 6, n_occ: 2, ..Default::default() }).unwrap();
    let path = std::env::temp_dir().join(format!("bse_rbx_ffi_{}.txt", std::process::id()));
    bse_rbx::model::write_bundle(&input, &path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { bse_rbx_input_load(c.as_ptr(), &mut handle) };
    std::fs::remove_file(&path).unwrap();
    assert_eq!(status, BseRbxStatus::Ok);
    assert_eq!(unsafe { bse_rbx_input_n_ov(handle) }, 8);
    unsafe { bse_rbx_input_free(handle) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(bse_rbx_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("bse_rbx.h")
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(header_path()).unwrap();
    for name in [
        "bse_rbx_version",
        "bse_rbx_last_error",
        "bse_rbx_input_synth",
        "bse_rbx_input_load",
        "bse_rbx_input_free",
        "bse_rbx_solve",
        "bse_rbx_result_energies",
        "bse_rbx_result_norms",
        "bse_rbx_result_free",
        "typedef struct BseRbxInput BseRbxInput;",
        "BSE_RBX_STATUS_OK = 0",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "bse_rbx.h"

int main(void) {
    BseRbxSynthParams p = bse_rbx_synth_params_default();
    BseRbxInput *in = NULL;
    if (bse_rbx_input_synth(&p, &in) != BSE_RBX_STATUS_OK) return 2;
    BseRbxConfig cfg = bse_rbx_config_default();
    cfg.m0 = 3;
    BseRbxResult *res = NULL;
    if (bse_rbx_solve(in, &cfg, &res) != BSE_RBX_STATUS_OK) return 3;
    double omega[3];
    if (bse_rbx_result_energies(res, BSE_RBX_SERIES_OMEGA, omega, 3) != BSE_RBX_STATUS_OK) return 4;
    printf("%.12f\n", omega[0]);
    cfg.m0 = 0;
    BseRbxResult *bad = NULL;
    if (bse_rbx_solve(in, &cfg, &bad) != BSE_RBX_STATUS_INVALID_PARAMS) return 5;
    if (bse_rbx_last_error() == NULL) return 6;
    bse_rbx_result_free(res);
    bse_rbx_input_free(in);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbse_rbx_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = std::env::temp_dir().join(format!("bse_rbx_c_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = header_path().parent().unwrap().to_path_buf();
    let cc = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(cc.status.success(), "cc failed: {}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&bin).output().unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(run.status.success(), "C program exited with {:?}", run.status.code());

    let mut input = ptr::null_mut();
    let params = bse_rbx_synth_params_default();
    assert_eq!(unsafe { bse_rbx_input_synth(&params, &mut input) }, BseRbxStatus::Ok);
    let mut cfg = bse_rbx_config_default();
    cfg.m0 = 3;
    let mut result = ptr::null_mut();
    assert_eq!(unsafe { bse_rbx_solve(input, &cfg, &mut result) }, BseRbxStatus::Ok);
    let mut omega = [0.0; 3];
    assert_eq!(unsafe { bse_rbx_result_energies(result, BseRbxSeries::Omega, omega.as_mut_ptr(), 3) }, BseRbxStatus::Ok);
    let printed: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!((printed - omega[0]).abs() < 1e-11);
    unsafe {
        bse_rbx_result_free(result);
        bse_rbx_input_free(input);
    }
}
