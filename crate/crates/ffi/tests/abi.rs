use std::ffi::{CStr, CString};
use std::ptr;

use qcvz_ffi::*;

fn last_error() -> String {
    let p = qcvz_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(qcvz_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn resources_for_a_million_qubits() {
    let mut r = QcvzResourceReport::default();
    assert_eq!(unsafe { qcvz_resources(1_000_000, &mut r) }, QcvzStatus::Ok);
    assert!((r.avg_pw_per_qubit - 110.96).abs() < 1e-9);
    assert_eq!(r.max_tones_per_cable, 4000);
    assert_eq!(r.cable_count, 250);
}

#[test]
fn null_out_pointer_is_rejected() {
    assert_eq!(unsafe { qcvz_resources(10, ptr::null_mut()) }, QcvzStatus::InvalidArgument);
    assert!(last_error().contains("out"));
}

#[test]
fn rabi_resonant_pi_pulse() {
    let omega = 2.0 * std::f64::consts::PI * 10e6;
    let p = qcvz_rabi_analytic(omega, 0.0, std::f64::consts::PI / omega);
    assert!((p - 1.0).abs() < 1e-12);
}

#[test]
fn schedule_round_trip() {
    let prog = CString::new(r#"{"qubits": [["X90", "X90"], ["X90", "T", "X90", "S", "X90"], ["X90", "H", "X90"]]}"#).unwrap();
    let mode = CString::new("rolling45").unwrap();
    let sync = CString::new("asap").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(qcvz_schedule_compile(prog.as_ptr(), mode.as_ptr(), sync.as_ptr(), &mut s), QcvzStatus::Ok);
        assert_eq!(qcvz_schedule_cycle_count(s), 9);

        let mut buf = [0usize; 4];
        let mut n = 0;
        assert_eq!(qcvz_schedule_qubit_cycles(s, 0, buf.as_mut_ptr(), buf.len(), &mut n), QcvzStatus::Ok);
        assert_eq!(n, 2);
        let (mut theta, mut slot) = (0.0, 0);
        assert_eq!(qcvz_schedule_cycle(s, buf[1], &mut theta, &mut slot), QcvzStatus::Ok);
        assert_eq!(slot, 8);

        assert_eq!(qcvz_schedule_cycle(s, 99, &mut theta, &mut slot), QcvzStatus::InvalidArgument);
        assert_eq!(qcvz_schedule_qubit_cycles(s, 3, ptr::null_mut(), 0, &mut n), QcvzStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(qcvz_schedule_to_json(s, &mut json), QcvzStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["cycles"].as_array().unwrap().len(), 9);
        qcvz_string_free(json);

        assert!(qcvz_schedule_mean_parallelism(s) > 0.0);
        qcvz_schedule_free(s);
    }
}

#[test]
fn bad_program_reports_invalid_input() {
    let prog = CString::new(r#"{"qubits": [["X90", "Z(0.3)"]]}"#).unwrap();
    let mode = CString::new("quantized45").unwrap();
    let sync = CString::new("asap").unwrap();
    let mut s = ptr::null_mut();
    let status = unsafe { qcvz_schedule_compile(prog.as_ptr(), mode.as_ptr(), sync.as_ptr(), &mut s) };
    assert_eq!(status, QcvzStatus::InvalidInput);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        assert_eq!(qcvz_schedule_cycle_count(ptr::null()), 0);
        assert_eq!(qcvz_device_qubit_count(ptr::null()), 0);
        qcvz_schedule_free(ptr::null_mut());
        qcvz_device_free(ptr::null_mut());
        qcvz_string_free(ptr::null_mut());
    }
}

#[test]
fn device_t1_curve_decays() {
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(qcvz_device_default(&mut d), QcvzStatus::Ok);
        assert_eq!(qcvz_device_qubit_count(d), 1);
        let kind = CString::new("t1").unwrap();
        let xs = [0.0, 25.3e-6, 50.6e-6];
        let mut p1 = [0.0; 3];
        let status = qcvz_device_run_experiment(d, 0, kind.as_ptr(), 0.0, xs.as_ptr(), 3, p1.as_mut_ptr());
        assert_eq!(status, QcvzStatus::Ok, "{}", last_error());
        assert!(p1[0] > 0.99, "{p1:?}");
        assert!((p1[1] / p1[0] - (-1f64).exp()).abs() < 0.02, "{p1:?}");

        let bad = CString::new("spin-lock").unwrap();
        let status = qcvz_device_run_experiment(d, 0, bad.as_ptr(), 0.0, xs.as_ptr(), 3, p1.as_mut_ptr());
        assert_eq!(status, QcvzStatus::InvalidInput);
        let status = qcvz_device_run_experiment(d, 5, kind.as_ptr(), 0.0, xs.as_ptr(), 3, p1.as_mut_ptr());
        assert_eq!(status, QcvzStatus::InvalidArgument);
        qcvz_device_free(d);
    }
}

#[test]
fn invalid_device_json_is_rejected() {
    let json = CString::new(r#"{"lo_tones": []}"#).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { qcvz_device_from_json(json.as_ptr(), &mut d) }, QcvzStatus::InvalidInput);
    assert!(d.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/qcvz.h");
    for name in [
        "qcvz_last_error",
        "qcvz_string_free",
        "qcvz_resources",
        "qcvz_schedule_compile",
        "qcvz_schedule_to_json",
        "qcvz_device_from_json",
        "qcvz_device_run_experiment",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name}");
    }
}
