use std::ffi::{CStr, CString};
use std::ptr;

use implicit_vqa_ffi::*;

fn last_error() -> String {
    let p = ivqa_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn bell() -> *mut IvqaState {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(ivqa_state_new(2, &mut s), IvqaStatus::Ok);
        assert_eq!(
            ivqa_state_apply(s, IvqaGate::H, [0usize].as_ptr(), 1, ptr::null(), 0),
            IvqaStatus::Ok
        );
        assert_eq!(
            ivqa_state_apply(s, IvqaGate::Cnot, [0usize, 1].as_ptr(), 2, ptr::null(), 0),
            IvqaStatus::Ok
        );
    }
    s
}

#[test]
fn bell_state_through_handles() {
    let s = bell();
    unsafe {
        let zz = CString::new("ZZ").unwrap();
        let mut v = 0.0;
        assert_eq!(
            ivqa_state_expectation(s, zz.as_ptr(), &mut v),
            IvqaStatus::Ok
        );
        assert!((v - 1.0).abs() < 1e-12);

        let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
        assert_eq!(
            ivqa_state_amplitudes(s, re.as_mut_ptr(), im.as_mut_ptr(), 4),
            IvqaStatus::Ok
        );
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((re[0] - r).abs() < 1e-12 && (re[3] - r).abs() < 1e-12);
        assert!(re[1].abs() < 1e-12 && im.iter().all(|x| x.abs() < 1e-12));

        let mut e = 0.0;
        assert_eq!(ivqa_state_entanglement(s, 4, 0, &mut e), IvqaStatus::Ok);
        assert!((e - 0.5).abs() < 1e-3);
        ivqa_state_free(s);
    }
}

#[test]
fn errors_set_status_and_message() {
    let s = bell();
    unsafe {
        let mut v = 0.0;
        let bad = CString::new("ZQ").unwrap();
        assert_eq!(
            ivqa_state_expectation(s, bad.as_ptr(), &mut v),
            IvqaStatus::InvalidArgument
        );
        assert!(last_error().contains("Pauli"));

        assert_eq!(
            ivqa_state_expectation(s, ptr::null(), &mut v),
            IvqaStatus::NullPointer
        );
        assert!(last_error().contains("label"));

        let status = ivqa_state_apply(s, IvqaGate::Rx, [5usize].as_ptr(), 1, [0.1].as_ptr(), 1);
        assert_eq!(status, IvqaStatus::InvalidArgument);

        let status = ivqa_state_apply(s, IvqaGate::Rx, [0usize].as_ptr(), 1, ptr::null(), 0);
        assert_eq!(status, IvqaStatus::InvalidArgument);

        let (mut re, mut im) = ([0.0; 3], [0.0; 3]);
        assert_eq!(
            ivqa_state_amplitudes(s, re.as_mut_ptr(), im.as_mut_ptr(), 3),
            IvqaStatus::InvalidArgument
        );
        ivqa_state_free(s);

        let mut h = ptr::null_mut();
        assert_eq!(ivqa_state_new(21, &mut h), IvqaStatus::InvalidArgument);
        assert!(h.is_null());
        assert_eq!(ivqa_state_new(1, ptr::null_mut()), IvqaStatus::NullPointer);
    }
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        ivqa_state_free(ptr::null_mut());
        ivqa_result_free(ptr::null_mut());
        ivqa_string_free(ptr::null_mut());
    }
}

fn run(pipeline: IvqaPipeline, json: &str) -> (IvqaStatus, *mut IvqaResult) {
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { ivqa_run(pipeline, c.as_ptr(), &mut out) };
    (status, out)
}

#[test]
fn susceptibility_pipeline_roundtrip() {
    let json = r#"{"n": 2, "layers": 2, "a_grid": [0.5],
        "inner": {"learning_rate": 0.1, "max_iter": 50000, "tol": 1e-9}}"#;
    let (status, r) = run(IvqaPipeline::Susceptibility, json);
    assert_eq!(status, IvqaStatus::Ok, "{}", last_error());
    unsafe {
        let mut dev = f64::NAN;
        assert_eq!(ivqa_result_summary(r, &mut dev), IvqaStatus::Ok);
        assert!(dev < 1e-3, "deviation {dev}");

        let mut s = ptr::null_mut();
        assert_eq!(
            ivqa_result_render(r, IvqaFormat::Csv, &mut s),
            IvqaStatus::Ok
        );
        let csv = CStr::from_ptr(s).to_str().unwrap().to_owned();
        ivqa_string_free(s);
        assert!(csv.starts_with("a,chi_var,chi_exact,energy_var,energy_exact,converged\n"));
        assert_eq!(csv.lines().count(), 2);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(
            ivqa_result_write(r, cpath.as_ptr(), IvqaFormat::Json),
            IvqaStatus::Ok
        );
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"schema\": \"susceptibility\""));

        let missing = CString::new(dir.path().join("no/such/dir.json").to_str().unwrap()).unwrap();
        assert_eq!(
            ivqa_result_write(r, missing.as_ptr(), IvqaFormat::Json),
            IvqaStatus::Io
        );
        ivqa_result_free(r);
    }
}

#[test]
fn entanglement_pipeline_short_run() {
    let (status, r) = run(IvqaPipeline::Entanglement, r#"{"outer_steps": 2}"#);
    assert_eq!(status, IvqaStatus::Ok, "{}", last_error());
    let mut e = f64::NAN;
    unsafe {
        assert_eq!(ivqa_result_summary(r, &mut e), IvqaStatus::Ok);
        ivqa_result_free(r);
    }
    assert!((0.0..=1.0).contains(&e));
}

#[test]
fn bad_configs_are_rejected() {
    let (status, r) = run(IvqaPipeline::Hyperopt, r#"{"no_such_key": 1}"#);
    assert_eq!(status, IvqaStatus::InvalidArgument);
    assert!(r.is_null());
    assert!(last_error().contains("no_such_key"));

    let (status, _) = run(IvqaPipeline::Susceptibility, "[1, 2]");
    assert_eq!(status, IvqaStatus::InvalidArgument);

    let (status, _) = run(IvqaPipeline::Susceptibility, "{not json");
    assert_eq!(status, IvqaStatus::InvalidArgument);

    let (status, _) = run(IvqaPipeline::Susceptibility, r#"{"n": 11}"#);
    assert_eq!(status, IvqaStatus::InvalidArgument);

    let (status, _) = run(
        IvqaPipeline::Hyperopt,
        r#"{"inner": {"learning_rate": -1.0}}"#,
    );
    assert_eq!(status, IvqaStatus::InvalidArgument);
}

#[test]
fn hyperopt_non_convergence_status() {
    let json = r#"{"layers": 1, "n_train": 8, "n_val": 4, "outer_steps": 1,
        "inner": {"max_iter": 1, "tol": 1e-14}}"#;
    let (status, r) = run(IvqaPipeline::Hyperopt, json);
    assert_eq!(status, IvqaStatus::NonConvergence);
    assert!(r.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/implicit_vqa.h");
    for name in [
        "ivqa_last_error_message",
        "ivqa_state_new",
        "ivqa_state_free",
        "ivqa_state_apply",
        "ivqa_state_expectation",
        "ivqa_state_amplitudes",
        "ivqa_state_entanglement",
        "ivqa_run",
        "ivqa_result_summary",
        "ivqa_result_render",
        "ivqa_result_write",
        "ivqa_result_free",
        "ivqa_string_free",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/implicit_vqa.h");
    let status = std::process::Command::new(cc)
        .args([
            "-fsyntax-only",
            "-x",
            "c",
            "-std=c99",
            "-Wall",
            "-Werror",
            header,
        ])
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc)
            .arg("--version")
            .output()
            .is_ok()
        {
            return Ok(cc);
        }
    }
    Err(())
}
