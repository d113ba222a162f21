use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use species_sampling_ffi::*;

fn last_error() -> String {
    let p = ssm_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { ssm_string_free(p) };
    s
}

#[test]
fn dp_ppf_evaluates_and_validates() {
    unsafe {
        let mut ppf = ptr::null_mut();
        assert_eq!(ssm_ppf_dp(1.0, &mut ppf), SsmStatus::Ok);
        let sizes = [2usize, 1];
        let mut out = [0.0; 3];
        assert_eq!(
            ssm_ppf_evaluate(ppf, sizes.as_ptr(), 2, out.as_mut_ptr(), 3),
            SsmStatus::Ok
        );
        assert_eq!(out, [0.5, 0.25, 0.25]);
        assert_eq!(
            ssm_ppf_evaluate(ppf, sizes.as_ptr(), 2, out.as_mut_ptr(), 2),
            SsmStatus::BufferTooSmall
        );

        let mut holds = false;
        let mut report = ptr::null_mut();
        assert_eq!(
            ssm_check_balance(ppf, 5, &mut holds, &mut report),
            SsmStatus::Ok
        );
        assert!(holds);
        let json: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(report).to_str().unwrap()).unwrap();
        assert_eq!(json["holds"], true);
        ssm_string_free(report);
        assert_eq!(
            ssm_check_label_symmetry(ppf, 5, &mut holds, ptr::null_mut()),
            SsmStatus::Ok
        );
        assert!(holds);
        ssm_ppf_free(ppf);
    }
}

#[test]
fn counterexample_reports_path_dependence() {
    unsafe {
        let mut ppf = ptr::null_mut();
        let coefs = [1.0, 0.0, 1.0];
        assert_eq!(
            ssm_ppf_polynomial(coefs.as_ptr(), 3, 1.0, &mut ppf),
            SsmStatus::Ok
        );
        let mut holds = true;
        assert_eq!(
            ssm_check_balance(ppf, 3, &mut holds, ptr::null_mut()),
            SsmStatus::Ok
        );
        assert!(!holds);
        let mut table = ptr::null_mut();
        assert_eq!(
            ssm_eppf_from_ppf(ppf, 3, &mut table),
            SsmStatus::PathDependent
        );
        assert!(table.is_null());
        assert!(last_error().contains("path dependent"));
        ssm_ppf_free(ppf);
    }
}

#[test]
fn eppf_tables_agree() {
    unsafe {
        let mut ppf = ptr::null_mut();
        let json = CString::new(r#"{"family":"dp","theta":2.0}"#).unwrap();
        assert_eq!(ssm_ppf_from_json(json.as_ptr(), &mut ppf), SsmStatus::Ok);
        let mut derived = ptr::null_mut();
        let mut closed = ptr::null_mut();
        assert_eq!(ssm_eppf_from_ppf(ppf, 5, &mut derived), SsmStatus::Ok);
        assert_eq!(ssm_eppf_dp(2.0, 1.0, 5, &mut closed), SsmStatus::Ok);
        assert_eq!(ssm_eppf_len(derived), ssm_eppf_len(closed));
        assert_eq!(ssm_eppf_len(derived), 1 + 2 + 4 + 8 + 16);
        let sizes = [3usize, 1, 1];
        let (mut a, mut b, mut p) = (0.0, 0.0, 0.0);
        assert_eq!(
            ssm_eppf_log_prob(derived, sizes.as_ptr(), 3, &mut a),
            SsmStatus::Ok
        );
        assert_eq!(
            ssm_eppf_log_prob(closed, sizes.as_ptr(), 3, &mut b),
            SsmStatus::Ok
        );
        assert_eq!(
            ssm_dp_eppf(sizes.as_ptr(), 3, 2.0, 1.0, &mut p),
            SsmStatus::Ok
        );
        assert!((a - b).abs() < 1e-12);
        assert!((p.ln() - b).abs() < 1e-12);
        let big = [7usize];
        assert_eq!(
            ssm_eppf_log_prob(closed, big.as_ptr(), 1, &mut a),
            SsmStatus::MissingEntry
        );
        ssm_eppf_free(derived);
        ssm_eppf_free(closed);
        ssm_ppf_free(ppf);
    }
}

#[test]
fn weight_models_and_estimates() {
    unsafe {
        let mut model = ptr::null_mut();
        let json = CString::new(r#"{"kind":"dp-stick-breaking","params":{"theta":1.0}}"#).unwrap();
        assert_eq!(
            ssm_weight_model_from_json(json.as_ptr(), &mut model),
            SsmStatus::Ok
        );
        let sizes = [1usize];
        let mut p = [0.0; 2];
        let mut se = [0.0; 2];
        let mut ess = 0.0;
        assert_eq!(
            ssm_estimate_ppf(
                model,
                sizes.as_ptr(),
                1,
                4000,
                3,
                p.as_mut_ptr(),
                se.as_mut_ptr(),
                2,
                &mut ess
            ),
            SsmStatus::Ok
        );
        assert!((p[0] - 0.5).abs() < 0.03);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!(se[0] > 0.0 && ess > 1000.0);
        ssm_weight_model_free(model);

        let mut bad = ptr::null_mut();
        assert_eq!(
            ssm_weight_model_logistic_normal(1.0, 5.0, -1.0, &mut bad),
            SsmStatus::InvalidArgument
        );
        assert!(bad.is_null());
        assert_eq!(ssm_weight_model_dp(2.0, &mut bad), SsmStatus::Ok);
        ssm_weight_model_free(bad);
    }
}

#[test]
fn fit_from_json() {
    unsafe {
        let req = CString::new(r#"{"preset":"sarcoma","iters":60,"burn_in":10,"seed":4}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(ssm_fit_json(req.as_ptr(), &mut out), SsmStatus::Ok);
        let v: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        ssm_string_free(out);
        assert_eq!(v["states"], 50);
        assert_eq!(v["cocluster"].as_array().unwrap().len(), 8);
        let total: f64 = v["k_dist"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);

        let req = CString::new(
            r#"{"data":[0.0,0.1,5.0],"likelihood":{"family":"normal","mu0":0,"c":10,"a":4,"b":4},"iters":20}"#,
        )
        .unwrap();
        assert_eq!(ssm_fit_json(req.as_ptr(), &mut out), SsmStatus::Ok);
        ssm_string_free(out);

        let req = CString::new(r#"{"iters":20}"#).unwrap();
        assert_eq!(
            ssm_fit_json(req.as_ptr(), &mut out),
            SsmStatus::InvalidArgument
        );
        let req = CString::new("{oops").unwrap();
        assert_eq!(ssm_fit_json(req.as_ptr(), &mut out), SsmStatus::Parse);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(ssm_ppf_dp(1.0, ptr::null_mut()), SsmStatus::NullPointer);
        let mut out = [0.0; 2];
        assert_eq!(
            ssm_ppf_evaluate(ptr::null(), [1usize].as_ptr(), 1, out.as_mut_ptr(), 2),
            SsmStatus::NullPointer
        );
        assert!(last_error().contains("null"));
        assert_eq!(
            ssm_ppf_dp(-1.0, &mut ptr::null_mut()),
            SsmStatus::InvalidArgument
        );
        ssm_ppf_free(ptr::null_mut());
        ssm_eppf_free(ptr::null_mut());
        ssm_weight_model_free(ptr::null_mut());
        ssm_string_free(ptr::null_mut());
        let v = CStr::from_ptr(ssm_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/species_sampling.h")).unwrap();
    for name in [
        "ssm_ppf_dp",
        "ssm_ppf_linear",
        "ssm_ppf_polynomial",
        "ssm_ppf_from_json",
        "ssm_ppf_evaluate",
        "ssm_check_balance",
        "ssm_check_label_symmetry",
        "ssm_eppf_from_ppf",
        "ssm_eppf_dp",
        "ssm_eppf_log_prob",
        "ssm_dp_eppf",
        "ssm_weight_model_from_json",
        "ssm_estimate_ppf",
        "ssm_fit_json",
        "ssm_last_error_message",
        "ssm_string_free",
        "typedef struct SsmPpf SsmPpf",
        "SSM_STATUS_PATH_DEPENDENT = 4",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "species_sampling.h"

int main(void) {
    SsmPpf *ppf = NULL;
    if (ssm_ppf_linear(2.0, 0.0, 1.0, &ppf) != SSM_STATUS_OK) return 10;
    bool holds = false;
    if (ssm_check_balance(ppf, 5, &holds, NULL) != SSM_STATUS_OK || !holds) return 11;
    size_t sizes[2] = {2, 1};
    double p[3];
    if (ssm_ppf_evaluate(ppf, sizes, 2, p, 3) != SSM_STATUS_OK) return 12;
    printf("%.6f %.6f %.6f\n", p[0], p[1], p[2]);
    ssm_ppf_free(ppf);
    if (ssm_ppf_dp(0.0, &ppf) != SSM_STATUS_INVALID_ARGUMENT) return 13;
    char *msg = ssm_last_error_message();
    if (msg == NULL) return 14;
    ssm_string_free(msg);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libspecies_sampling_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler named cc is required");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    // f(m) = 2m with theta = 1 at (2,1): weights 4, 2, 1
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "0.571429 0.285714 0.142857\n"
    );
}
