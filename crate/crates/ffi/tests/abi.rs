use std::ffi::{CStr, CString};
use std::ptr;

use escrowsim_ffi::*;

const SCRIPT: &str = r#"{
    "genesis": {"alice": "10000000000000000000", "provider": "1000000000000000000"},
    "events": [
        {"at": 0, "actor": "alice", "action": "request_session", "session": "call", "owner": "provider",
         "prefs": {"availability_target_bp": 9980, "video_quality": "hd",
                   "max_period_seconds": 3600, "monetization_kind": "dynamic_price"}},
        {"at": 15, "actor": "alice", "action": "pay", "session": "call"},
        {"at": 1815, "actor": "alice", "action": "stop", "session": "call"}
    ]
}"#;

fn take(s: *mut libc::c_char) -> String {
    assert!(!s.is_null());
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { esim_string_free(s) };
    text
}

fn last_error() -> String {
    let p = esim_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn stepwise_run_matches_one_shot_run() {
    let script = CString::new(SCRIPT).unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { esim_simulator_new(script.as_ptr(), false, 0, &mut sim) },
        EsimStatus::Ok
    );
    let mut done = false;
    let mut steps = 0;
    loop {
        assert_eq!(unsafe { esim_simulator_step(sim, &mut done) }, EsimStatus::Ok);
        if done {
            break;
        }
        steps += 1;
    }
    assert_eq!(steps, 3);
    assert_eq!(unsafe { esim_simulator_finish(sim) }, EsimStatus::Ok);
    let mut ok = false;
    assert_eq!(
        unsafe { esim_simulator_conservation_ok(sim, &mut ok) },
        EsimStatus::Ok
    );
    assert!(ok);
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { esim_simulator_report_json(sim, &mut out) },
        EsimStatus::Ok
    );
    let stepwise = take(out);
    unsafe { esim_simulator_free(sim) };

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { esim_run_script(script.as_ptr(), false, 0, &mut out) },
        EsimStatus::Ok
    );
    assert_eq!(take(out), stepwise);

    let report: serde_json::Value = serde_json::from_str(&stepwise).unwrap();
    assert_eq!(report["settlements"]["call"]["charge"], "324000000000000000");
    assert_eq!(report["settlements"]["call"]["refund"], "324000000000000000");
}

#[test]
fn rejected_events_keep_the_handle_usable() {
    let script = CString::new(SCRIPT).unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { esim_simulator_new(script.as_ptr(), false, 0, &mut sim) },
        EsimStatus::Ok
    );
    let stop = CString::new(r#"{"at": 0, "actor": "alice", "action": "stop", "session": "call"}"#).unwrap();
    // the session label is not declared yet
    assert_eq!(
        unsafe { esim_simulator_apply_event(sim, stop.as_ptr()) },
        EsimStatus::ValidationError
    );
    let mut done = false;
    assert_eq!(unsafe { esim_simulator_step(sim, &mut done) }, EsimStatus::Ok);
    assert_eq!(
        unsafe { esim_simulator_apply_event(sim, stop.as_ptr()) },
        EsimStatus::EventRejected
    );
    assert!(last_error().contains("Quoted"), "{}", last_error());
    let broke = CString::new(r#"{"at": 5, "actor": "provider", "action": "transfer", "to": "alice", "value": "5000000000000000000"}"#).unwrap();
    assert_eq!(
        unsafe { esim_simulator_apply_event(sim, broke.as_ptr()) },
        EsimStatus::InsufficientFunds
    );
    let garbage = CString::new("{").unwrap();
    assert_eq!(
        unsafe { esim_simulator_apply_event(sim, garbage.as_ptr()) },
        EsimStatus::ParseError
    );
    assert_eq!(unsafe { esim_simulator_finish(sim) }, EsimStatus::Ok);
    unsafe { esim_simulator_free(sim) };
}

#[test]
fn null_and_bad_arguments() {
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { esim_simulator_new(ptr::null(), false, 0, &mut sim) },
        EsimStatus::NullPointer
    );
    assert!(sim.is_null());
    let mut done = false;
    assert_eq!(
        unsafe { esim_simulator_step(ptr::null_mut(), &mut done) },
        EsimStatus::NullPointer
    );
    let bad = CString::new(r#"{"genesis": {"a": 1}}"#).unwrap();
    assert_eq!(
        unsafe { esim_simulator_new(bad.as_ptr(), false, 0, &mut sim) },
        EsimStatus::ParseError
    );
    assert!(last_error().contains("genesis.a"));
    let invalid_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { esim_simulator_new(invalid_utf8.as_ptr().cast(), false, 0, &mut sim) },
        EsimStatus::InvalidUtf8
    );
    unsafe {
        esim_simulator_free(ptr::null_mut());
        esim_string_free(ptr::null_mut());
    }
}

#[test]
fn fee_rows() {
    let mut rows = [EsimFeeRow {
        method: ptr::null(),
        fee_min_usd_cents: 0,
        fee_max_usd_cents: 0,
        fee_gwei: 0,
        proportional: false,
        merchant_min_bp: 0,
        merchant_fixed_usd_cents: 0,
        flexible_lockin: false,
    }; 4];
    let mut written = 0;
    let status = unsafe {
        esim_fee_comparison(
            10_000,
            50_000,
            20,
            21_000,
            true,
            rows.as_mut_ptr(),
            2,
            &mut written,
        )
    };
    assert_eq!(status, EsimStatus::BufferTooSmall);
    assert_eq!(written, 4);
    let status = unsafe {
        esim_fee_comparison(
            10_000,
            50_000,
            20,
            21_000,
            true,
            rows.as_mut_ptr(),
            4,
            &mut written,
        )
    };
    assert_eq!(status, EsimStatus::Ok);
    let name = |r: &EsimFeeRow| unsafe { CStr::from_ptr(r.method) }.to_str().unwrap().to_string();
    assert_eq!(name(&rows[0]), "Visa");
    assert_eq!((rows[0].fee_min_usd_cents, rows[0].fee_max_usd_cents), (143, 240));
    assert_eq!(name(&rows[3]), "Ethereum");
    assert_eq!(rows[3].fee_gwei, 420_000);
    assert_eq!(rows[3].fee_min_usd_cents, 21);
    assert!(rows[3].flexible_lockin && !rows[3].proportional);
    let status = unsafe {
        esim_fee_comparison(
            10_000,
            50_000,
            41,
            21_000,
            true,
            rows.as_mut_ptr(),
            4,
            &mut written,
        )
    };
    assert_eq!(status, EsimStatus::InvalidInput);
}

#[test]
fn prorate_with_decimal_strings() {
    let price = CString::new("1000000000000000000").unwrap();
    let (mut charge, mut refund) = (ptr::null_mut(), ptr::null_mut());
    let status = unsafe { esim_prorate(price.as_ptr(), 1_000, 3_600, &mut charge, &mut refund) };
    assert_eq!(status, EsimStatus::Ok);
    assert_eq!(take(charge), "277777777777777777");
    assert_eq!(take(refund), "722222222222222223");
    let status = unsafe { esim_prorate(price.as_ptr(), 1, 0, &mut charge, &mut refund) };
    assert_eq!(status, EsimStatus::InvalidInput);
    let junk = CString::new("12e3").unwrap();
    let status = unsafe { esim_prorate(junk.as_ptr(), 1, 2, &mut charge, &mut refund) };
    assert_eq!(status, EsimStatus::InvalidInput);
}

#[test]
fn oracle_and_version() {
    let script = CString::new(SCRIPT).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { esim_oracle_json(script.as_ptr(), true, 7, &mut out) },
        EsimStatus::Ok
    );
    let outcome: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert!(outcome["settlements"]["call"]["charge"].is_string());
    let version = unsafe { CStr::from_ptr(esim_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
