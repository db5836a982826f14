use std::ffi::{CStr, CString};
use std::ptr;

use mimo_crossing_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mcx_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn bpsk_mmse_matches_known_value() {
    let mut input = ptr::null_mut();
    assert_eq!(unsafe { mcx_input_bpsk(1, &mut input) }, MCX_OK);
    assert_eq!(unsafe { mcx_input_dim(input) }, 1);
    let (mut v, mut e) = ([0.0], [0.0]);
    let gain = [1.0];
    let rc = unsafe { mcx_mmse_matrix(input, gain.as_ptr(), 200_000, 7, v.as_mut_ptr(), e.as_mut_ptr()) };
    assert_eq!(rc, MCX_OK, "{}", last_error());
    // 1 − E[tanh(1 + Z)]
    assert!((v[0] - 0.449_599_509).abs() < 4.0 * e[0] + 1e-6, "{} ± {}", v[0], e[0]);
    unsafe { mcx_input_free(input) };
}

#[test]
fn gaussian_input_gives_zero_q() {
    let json = CString::new(r#"{"dim":2,"components":[{"w":1.0,"mean":[0,0],"cov":[[1.0,0.3],[0.3,0.5]]}]}"#).unwrap();
    let mut input = ptr::null_mut();
    assert_eq!(unsafe { mcx_input_from_json(json.as_ptr(), &mut input) }, MCX_OK, "{}", last_error());
    let mut cov = [0.0; 4];
    assert_eq!(unsafe { mcx_input_covariance(input, cov.as_mut_ptr(), 4) }, MCX_OK);
    assert_eq!(cov, [1.0, 0.3, 0.3, 0.5]);

    let mut path = ptr::null_mut();
    assert_eq!(unsafe { mcx_path_snr(2, 10.0, &mut path) }, MCX_OK);
    let mut g = [0.0; 2];
    assert_eq!(unsafe { mcx_path_gains(path, 4.0, g.as_mut_ptr(), 2) }, MCX_OK);
    assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);

    let (mut q, mut qe) = ([0.0; 4], [0.0; 4]);
    let rc = unsafe { mcx_q_matrix(input, cov.as_ptr(), path, 3.0, 20_000, 1, q.as_mut_ptr(), qe.as_mut_ptr()) };
    assert_eq!(rc, MCX_OK, "{}", last_error());
    assert!(q.iter().all(|x| x.abs() < 1e-10), "{q:?}");

    let (mut d, mut de, mut i, mut ie) = (0.0, 0.0, 0.0, 0.0);
    let rc = unsafe { mcx_mutual_information(input, path, 3.0, 20_000, 1, &mut d, &mut de, &mut i, &mut ie) };
    assert_eq!(rc, MCX_OK, "{}", last_error());
    assert!((d - i).abs() <= 3.0 * (de.hypot(ie)) + 1e-6, "{d} vs {i}");

    unsafe {
        mcx_path_free(path);
        mcx_input_free(input);
    }
}

#[test]
fn errors_are_reported_per_call() {
    let mut input = ptr::null_mut();
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { mcx_input_from_json(bad.as_ptr(), &mut input) }, MCX_ERR_CONFIG);
    assert!(input.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { mcx_input_from_json(ptr::null(), &mut input) }, MCX_ERR_NULL);
    assert_eq!(unsafe { mcx_input_bpsk(0, &mut input) }, MCX_ERR_INVALID);

    let mut path = ptr::null_mut();
    assert_eq!(unsafe { mcx_path_snr(1, 1.0, &mut path) }, MCX_OK);
    assert!(last_error().is_empty());
    let mut small = [0.0; 1];
    let mut p2 = ptr::null_mut();
    assert_eq!(unsafe { mcx_path_snr(3, 1.0, &mut p2) }, MCX_OK);
    assert_eq!(unsafe { mcx_path_gains(p2, 0.5, small.as_mut_ptr(), 1) }, MCX_ERR_RANGE);
    unsafe {
        mcx_path_free(path);
        mcx_path_free(p2);
        mcx_input_free(ptr::null_mut());
    }
}

#[test]
fn scenario_runs_and_is_deterministic() {
    let cfg = CString::new(
        r#"{"command":"mmse-scan","seed":5,"input":{"dim":1,"components":[{"w":0.5,"mean":[-1],"cov":[[0]]},{"w":0.5,"mean":[1],"cov":[[0]]}]},
            "path":{"dim":1,"snr_max":4},"grid":{"linear":{"lo":0,"hi":4,"points":5}},"estimator":{"samples":2000}}"#,
    )
    .unwrap();
    let run_once = || {
        let mut out = ptr::null_mut();
        let rc = unsafe { mcx_scenario_run(cfg.as_ptr(), ptr::null(), MCX_FORMAT_CSV, &mut out) };
        assert_eq!(rc, MCX_OK, "{}", last_error());
        let n = unsafe { mcx_outcome_artifact_count(out) };
        assert!(n >= 1);
        let texts: Vec<(String, String)> = (0..n)
            .map(|k| unsafe {
                (
                    CStr::from_ptr(mcx_outcome_artifact_name(out, k)).to_string_lossy().into_owned(),
                    CStr::from_ptr(mcx_outcome_artifact_contents(out, k)).to_string_lossy().into_owned(),
                )
            })
            .collect();
        assert!(unsafe { mcx_outcome_artifact_name(out, n) }.is_null());
        assert_eq!(unsafe { mcx_outcome_violation(out) }, 0);
        unsafe { mcx_outcome_free(out) };
        texts
    };
    let a = run_once();
    assert_eq!(a, run_once());
    assert!(a[0].1.contains("# config_hash"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mimo_crossing.h")).unwrap();
    for sym in [
        "mcx_last_error",
        "mcx_input_from_json",
        "mcx_mmse_matrix",
        "mcx_q_matrix",
        "mcx_mutual_information",
        "mcx_scenario_run",
        "mcx_outcome_free",
        "typedef struct McxInput McxInput",
        "MCX_ERR_PANIC",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}
