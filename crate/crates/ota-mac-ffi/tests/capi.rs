//! Exercises the C surface through the same entry points a foreign caller
//! would use: handles in and out, status codes, and the generated header.

use std::ffi::{CStr, CString};
use std::ptr;

use ota_mac_ffi::{
    ota_experiment_free, ota_experiment_from_toml, ota_experiment_run, ota_last_error_message,
    ota_results_free, ota_results_len, ota_results_row, ota_results_trace_row, ota_results_write,
    ota_select_params, OtaExperiment, OtaFormat, OtaResultRow, OtaResults, OtaScheme,
    OtaSchemeParams, OtaStatus,
};

fn last_error() -> String {
    let ptr = ota_last_error_message();
    assert!(!ptr.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_owned()
}

const SWEEP_TOML: &str = r#"
    mode = "mean-estimation"
    scheme = "uq"
    k = 4
    d = 8
    snr_db = 40.0
    b = [1.0, 2.0]
    sigma_prime = 0.1
    runs = 4
    seed = 11
"#;

#[test]
fn sweep_through_the_c_surface() {
    let text = CString::new(SWEEP_TOML).unwrap();
    let mut exp: *mut OtaExperiment = ptr::null_mut();
    assert_eq!(
        unsafe { ota_experiment_from_toml(text.as_ptr(), &mut exp) },
        OtaStatus::Ok
    );
    assert!(!exp.is_null());

    let mut results: *mut OtaResults = ptr::null_mut();
    assert_eq!(
        unsafe { ota_experiment_run(exp, &mut results) },
        OtaStatus::Ok
    );
    assert_eq!(unsafe { ota_results_len(results) }, 2);

    let mut row = OtaResultRow {
        scheme: OtaScheme::Analog,
        num_clients: 0,
        dim: 0,
        snr_db: 0.0,
        bound: 0.0,
        sigma: 0.0,
        runs: 0,
        rmse: 0.0,
        uses_per_round: 0,
        metric: 0.0,
        decode_fail_rate: 0.0,
    };
    assert_eq!(
        unsafe { ota_results_row(results, 0, &mut row) },
        OtaStatus::Ok
    );
    assert_eq!(row.scheme, OtaScheme::Uq);
    assert_eq!(row.num_clients, 4);
    assert_eq!(row.dim, 8);
    assert_eq!(row.bound, 1.0);
    assert!(row.rmse >= 0.0);
    assert_eq!(row.metric, row.rmse * (row.uses_per_round as f64).sqrt());

    // Rows match a direct library run byte for byte once written out.
    let dir = std::env::temp_dir().join("ota-mac-ffi-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ffi.csv");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { ota_results_write(results, cpath.as_ptr(), OtaFormat::Csv as u32) },
        OtaStatus::Ok
    );
    let expected = {
        let cfg = ota_mac::harness::RawConfig::parse(SWEEP_TOML)
            .unwrap()
            .into_config()
            .unwrap();
        ota_mac::harness::format_rows(
            &ota_mac::harness::run_mean_estimation(&cfg).unwrap(),
            ota_mac::harness::OutputFormat::Csv,
        )
    };
    assert_eq!(std::fs::read_to_string(&path).unwrap(), expected);
    let _ = std::fs::remove_dir_all(&dir);

    // Trace accessor must refuse a sweep handle.
    let mut it = 0u64;
    let mut gap = 0.0f64;
    assert_eq!(
        unsafe { ota_results_trace_row(results, 0, &mut it, &mut gap) },
        OtaStatus::OutOfRange
    );

    // Out-of-range row index.
    assert_eq!(
        unsafe { ota_results_row(results, 2, &mut row) },
        OtaStatus::OutOfRange
    );
    assert!(last_error().contains("out of range"));

    unsafe {
        ota_results_free(results);
        ota_experiment_free(exp);
    }
}

#[test]
fn psgd_trace_through_the_c_surface() {
    let toml = r#"
        mode = "psgd"
        scheme = "analog"
        k = 2
        d = 4
        snr_db = 60.0
        b = 4.0
        sigma_prime = 0.1
        runs = 2
        n_budget = 64
        seed = 3
    "#;
    let text = CString::new(toml).unwrap();
    let mut exp: *mut OtaExperiment = ptr::null_mut();
    assert_eq!(
        unsafe { ota_experiment_from_toml(text.as_ptr(), &mut exp) },
        OtaStatus::Ok
    );
    let mut results: *mut OtaResults = ptr::null_mut();
    assert_eq!(
        unsafe { ota_experiment_run(exp, &mut results) },
        OtaStatus::Ok
    );
    let len = unsafe { ota_results_len(results) };
    assert_eq!(len, 16); // budget 64 / ell 4

    let mut it = 0u64;
    let mut gap = f64::NAN;
    assert_eq!(
        unsafe { ota_results_trace_row(results, len - 1, &mut it, &mut gap) },
        OtaStatus::Ok
    );
    assert_eq!(it, 16);
    assert!(gap.is_finite() && gap >= 0.0);

    unsafe {
        ota_results_free(results);
        ota_experiment_free(exp);
    }
}

#[test]
fn error_paths_and_status_codes() {
    // Null pointers.
    let mut exp: *mut OtaExperiment = ptr::null_mut();
    assert_eq!(
        unsafe { ota_experiment_from_toml(ptr::null(), &mut exp) },
        OtaStatus::NullPointer
    );

    // Bad TOML.
    let text = CString::new("scheme = ").unwrap();
    assert_eq!(
        unsafe { ota_experiment_from_toml(text.as_ptr(), &mut exp) },
        OtaStatus::InvalidConfig
    );
    assert!(last_error().contains("config parse"));

    // Validation failure: odd K with the side-information scheme.
    let text = CString::new("scheme = \"wz\"\nk = 5\n").unwrap();
    assert_eq!(
        unsafe { ota_experiment_from_toml(text.as_ptr(), &mut exp) },
        OtaStatus::InvalidConfig
    );

    // Parameter selection with an impossible constellation hits the guard.
    let mut params = OtaSchemeParams::default();
    let status = unsafe {
        ota_select_params(
            OtaScheme::Uq as u32,
            1,
            64,
            10_000.0, // absurd SNR in dB; block size explodes past the guard
            1,
            1.0,
            1.0,
            &mut params,
        )
    };
    assert_eq!(status, OtaStatus::Overflow);
    assert!(last_error().contains("overflow guard"));
}

#[test]
fn invalid_raw_discriminants_are_rejected() {
    let mut params = OtaSchemeParams::default();
    assert_eq!(
        unsafe { ota_select_params(99, 4, 8, 50.0, 8, 1.0, 1.0, &mut params) },
        OtaStatus::InvalidConfig
    );
    assert!(last_error().contains("unknown scheme"));
}

#[test]
fn params_match_library_selection() {
    let mut params = OtaSchemeParams::default();
    assert_eq!(
        unsafe {
            ota_select_params(
                OtaScheme::Uq as u32,
                500,
                64,
                180.0,
                64,
                1.0,
                1.0,
                &mut params,
            )
        },
        OtaStatus::Ok
    );
    assert_eq!(params.levels, 9);
    assert_eq!(params.base, 4001);
    assert_eq!(params.block_size, 2);
    assert_eq!(params.uses_per_round, 32);

    assert_eq!(
        unsafe {
            ota_select_params(
                OtaScheme::Wz as u32,
                500,
                64,
                50.0,
                64,
                1.0,
                1.0,
                &mut params,
            )
        },
        OtaStatus::Ok
    );
    assert_eq!(params.levels, 7);
    assert_eq!(params.daq_samples, 4);
    assert_eq!(params.base, 1501);

    assert_eq!(
        unsafe {
            ota_select_params(
                OtaScheme::Analog as u32,
                16,
                24,
                50.0,
                24,
                1.0,
                1.0,
                &mut params,
            )
        },
        OtaStatus::Ok
    );
    assert_eq!(params.uses_per_round, 24);
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ota_mac.h"))
        .expect("cbindgen header missing");
    for symbol in [
        "OTA_MAC_H",
        "typedef struct OtaExperiment OtaExperiment",
        "typedef struct OtaResults OtaResults",
        "ota_experiment_from_toml",
        "ota_experiment_run",
        "ota_results_row",
        "ota_results_trace_row",
        "ota_results_write",
        "ota_select_params",
        "ota_last_error_message",
        "OtaStatus_Overflow",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
