use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dualkan_ffi::*;

fn last_error() -> String {
    let p = dk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn problem(id: &str) -> *mut DkProblem {
    let id = CString::new(id).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dk_problem_new(id.as_ptr(), &mut p) }, DkStatus::Ok);
    p
}

unsafe fn take_string(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    dk_string_free(s);
    out
}

#[test]
fn problem_handles() {
    let p = problem("e1");
    let mut m = DkMembership::Outside;
    unsafe {
        assert_eq!(dk_problem_classify(p, 0.0, 0.0, &mut m), DkStatus::Ok);
        assert_eq!(m, DkMembership::Inside1);
        assert_eq!(dk_problem_classify(p, 0.9, 0.0, &mut m), DkStatus::Ok);
        assert_eq!(m, DkMembership::Inside2);
        assert_eq!(dk_problem_classify(p, 3.0, 0.0, &mut m), DkStatus::Ok);
        assert_eq!(m, DkMembership::Outside);
        let mut u = 0.0;
        assert_eq!(dk_problem_exact(p, 0.1, 0.2, DkSide::Omega1, &mut u), DkStatus::Ok);
        assert_eq!(u, 1.0);
        assert_eq!(dk_problem_exact(p, 0.1, 0.2, DkSide::Omega2, &mut u), DkStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(dk_problem_exact(p, 0.1, 0.2, DkSide::Auto, &mut u), DkStatus::InvalidArgument);
        dk_problem_free(p);
    }
}

#[test]
fn bad_arguments() {
    let bogus = CString::new("e2").unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(dk_problem_new(bogus.as_ptr(), &mut p), DkStatus::InvalidArgument);
        assert!(last_error().contains("e2"));
        assert_eq!(dk_problem_new(ptr::null(), &mut p), DkStatus::NullPointer);
        assert_eq!(dk_problem_classify(ptr::null(), 0.0, 0.0, ptr::null_mut()), DkStatus::NullPointer);
        let junk = CString::new("{not json").unwrap();
        let mut net = ptr::null_mut();
        assert_eq!(dk_network_from_json(junk.as_ptr(), &mut net), DkStatus::InvalidArgument);
        assert!(net.is_null());
        dk_problem_free(ptr::null_mut());
        dk_network_free(ptr::null_mut());
        dk_run_free(ptr::null_mut());
        dk_string_free(ptr::null_mut());
    }
}

#[test]
fn parameter_counts() {
    let mut n = 0;
    unsafe {
        assert_eq!(dk_kan_param_count([2usize, 3, 3, 3, 1].as_ptr(), 5, 10, 3, &mut n), DkStatus::Ok);
        assert_eq!(n, 405);
        assert_eq!(dk_mlp_param_count([2usize, 20, 20, 20, 1].as_ptr(), 5, &mut n), DkStatus::Ok);
        assert_eq!(n, 921);
    }
}

#[test]
fn relative_l2() {
    let mut r = 0.0;
    unsafe {
        assert_eq!(dk_relative_l2([3.0, 4.0].as_ptr(), [3.0, 0.0].as_ptr(), 2, &mut r), DkStatus::Ok);
        assert!((r - 0.8).abs() < 1e-15);
        assert_eq!(dk_relative_l2([0.0].as_ptr(), [1.0].as_ptr(), 1, &mut r), DkStatus::Ok);
        assert!(r.is_nan());
        assert_eq!(dk_relative_l2([1.0].as_ptr(), [1.0].as_ptr(), 0, &mut r), DkStatus::InvalidArgument);
    }
}

#[test]
fn short_training_run_round_trip() {
    let preset = CString::new("e1-kan").unwrap();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(dk_train_preset(preset.as_ptr(), 3, 20, &mut run), DkStatus::Ok, "{}", last_error());
        let mut s = ptr::null_mut();
        assert_eq!(dk_run_loss_csv(run, &mut s), DkStatus::Ok);
        let csv = take_string(s);
        assert!(csv.starts_with("step,l_omega1"));
        assert_eq!(dk_run_errors_json(run, &mut s), DkStatus::Ok);
        let errors: serde_json::Value = serde_json::from_str(&take_string(s)).unwrap();
        assert!(errors["e_boundary1"].is_null());
        assert!(errors["e_omega1"].as_f64().unwrap() > 0.0);

        let mut net = ptr::null_mut();
        assert_eq!(dk_run_network(run, &mut net), DkStatus::Ok);
        let mut count = 0;
        assert_eq!(dk_network_param_count(net, &mut count), DkStatus::Ok);
        assert_eq!(count, 810);
        assert_eq!(dk_network_to_json(net, &mut s), DkStatus::Ok);
        let json = CString::new(take_string(s)).unwrap();
        let mut copy = ptr::null_mut();
        assert_eq!(dk_network_from_json(json.as_ptr(), &mut copy), DkStatus::Ok);

        let p = problem("e1");
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(dk_network_eval(net, p, 0.1, 0.1, DkSide::Auto, &mut a), DkStatus::Ok);
        assert_eq!(dk_network_eval(copy, p, 0.1, 0.1, DkSide::Omega1, &mut b), DkStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(dk_network_eval(net, p, 5.0, 0.1, DkSide::Auto, &mut a), DkStatus::Domain);
        let mut vals = [0.0; 2];
        assert_eq!(dk_network_eval_batch(net, DkSide::Omega1, [0.1, 0.1, 0.2, 0.0].as_ptr(), 2, vals.as_mut_ptr()), DkStatus::Ok);
        assert_eq!(vals[0], b);

        dk_problem_free(p);
        dk_network_free(copy);
        dk_network_free(net);
        dk_run_free(run);
    }
}

#[test]
fn invalid_training_config() {
    let json = CString::new("{\"problem\": \"e1\"}").unwrap();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(dk_train_config_json(json.as_ptr(), &mut run), DkStatus::InvalidArgument);
    }
    assert!(run.is_null());
    assert!(last_error().contains("missing field"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/dualkan.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for f in [
        "dk_last_error_message",
        "dk_string_free",
        "dk_problem_new",
        "dk_problem_free",
        "dk_problem_classify",
        "dk_problem_exact",
        "dk_network_from_json",
        "dk_network_to_json",
        "dk_network_free",
        "dk_network_param_count",
        "dk_network_eval",
        "dk_network_eval_batch",
        "dk_train_preset",
        "dk_train_config_json",
        "dk_run_free",
        "dk_run_network",
        "dk_run_errors_json",
        "dk_run_loss_csv",
        "dk_kan_param_count",
        "dk_mlp_param_count",
        "dk_relative_l2",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(text.contains("typedef struct DkNetwork DkNetwork;"));
    assert!(text.contains("DK_STATUS_OK = 0"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(header()).output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
