//! C ABI for the ota-mac simulator.
//!
//! The surface follows the usual opaque-handle pattern: configuration and
//! result objects live behind pointers created and freed here, every call
//! returns an [`OtaStatus`] code, and the most recent error message per
//! thread is available through [`ota_last_error_message`]. The companion
//! header `include/ota_mac.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ota_mac::harness::{
    run_mean_estimation, run_psgd_experiment, write_results, write_trace, ExperimentConfig, Mode,
    OutputFormat, RawConfig, ResultRow, TraceRow,
};
use ota_mac::schemes::{select_params_uq, select_params_wz, SchemeKind};
use ota_mac::Error;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn record_error(message: String) {
    let cstring = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

/// Status code returned by every fallible call.
#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Configuration rejected during parsing or validation.
    InvalidConfig = 3,
    /// A constellation or lattice size violated the exact-integer guard.
    Overflow = 4,
    /// File I/O failed.
    Io = 5,
    /// An index was out of range or the handle holds the wrong result kind.
    OutOfRange = 6,
    /// The underlying call panicked; state may be inconsistent.
    Panic = 7,
}

/// Scheme selector mirrored into C.
#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtaScheme {
    Uq = 0,
    Wz = 1,
    Analog = 2,
}

impl From<SchemeKind> for OtaScheme {
    fn from(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::Uq => OtaScheme::Uq,
            SchemeKind::Wz => OtaScheme::Wz,
            SchemeKind::Analog => OtaScheme::Analog,
        }
    }
}

/// Output format selector mirrored into C.
#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtaFormat {
    Csv = 0,
    Dat = 1,
}

impl From<OtaFormat> for OutputFormat {
    fn from(fmt: OtaFormat) -> Self {
        match fmt {
            OtaFormat::Csv => OutputFormat::Csv,
            OtaFormat::Dat => OutputFormat::Dat,
        }
    }
}

// Raw discriminants arriving over the boundary are validated, never
// transmuted; an unknown value is a config error, not undefined behavior.
fn scheme_from_raw(raw: u32) -> Result<OtaScheme, OtaStatus> {
    match raw {
        0 => Ok(OtaScheme::Uq),
        1 => Ok(OtaScheme::Wz),
        2 => Ok(OtaScheme::Analog),
        other => {
            record_error(format!("unknown scheme value {other}"));
            Err(OtaStatus::InvalidConfig)
        }
    }
}

fn format_from_raw(raw: u32) -> Result<OtaFormat, OtaStatus> {
    match raw {
        0 => Ok(OtaFormat::Csv),
        1 => Ok(OtaFormat::Dat),
        other => {
            record_error(format!("unknown format value {other}"));
            Err(OtaStatus::InvalidConfig)
        }
    }
}

/// Opaque experiment handle.
pub struct OtaExperiment {
    config: ExperimentConfig,
}

enum ResultsInner {
    Rows(Vec<ResultRow>),
    Trace(Vec<TraceRow>),
}

/// Opaque result-set handle.
pub struct OtaResults {
    inner: ResultsInner,
}

/// One mean-estimation sweep row, flattened for C.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OtaResultRow {
    pub scheme: OtaScheme,
    pub num_clients: u64,
    pub dim: u64,
    pub snr_db: f64,
    pub bound: f64,
    pub sigma: f64,
    pub runs: u64,
    pub rmse: f64,
    pub uses_per_round: u64,
    pub metric: f64,
    pub decode_fail_rate: f64,
}

/// Derived scheme parameters, flattened for C. Fields that do not apply to
/// the requested scheme are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OtaSchemeParams {
    pub levels: u64,
    pub block_size: u64,
    pub wz_block_size: u64,
    pub base: u64,
    pub wz_base: u64,
    pub ask_size: u64,
    pub wz_ask_size: u64,
    pub daq_range: f64,
    pub daq_samples: u64,
    pub uses_per_round: u64,
}

fn status_for(err: &Error) -> OtaStatus {
    match err {
        Error::Overflow { .. } => OtaStatus::Overflow,
        Error::Io { .. } => OtaStatus::Io,
        Error::IndexOutOfRange { .. } | Error::RangeViolation { .. } => OtaStatus::OutOfRange,
        _ => OtaStatus::InvalidConfig,
    }
}

fn fail(err: Error) -> OtaStatus {
    let status = status_for(&err);
    record_error(err.to_string());
    status
}

fn guarded(body: impl FnOnce() -> OtaStatus) -> OtaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            record_error("panic inside ota-mac".into());
            OtaStatus::Panic
        }
    }
}

/// # Safety
/// `text` must be a valid NUL-terminated string or null.
unsafe fn utf8_arg<'a>(text: *const c_char) -> Result<&'a str, OtaStatus> {
    if text.is_null() {
        record_error("null pointer argument".into());
        return Err(OtaStatus::NullPointer);
    }
    // SAFETY: caller guarantees text is NUL terminated.
    unsafe { CStr::from_ptr(text) }.to_str().map_err(|_| {
        record_error("argument was not valid UTF-8".into());
        OtaStatus::InvalidUtf8
    })
}

/// Most recent error message on this thread, or null when the last call
/// succeeded. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn ota_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |msg| msg.as_ptr())
    })
}

/// Parses a TOML experiment description (the same format the CLI accepts)
/// into a new experiment handle, written to `out`.
///
/// # Safety
/// `text` must be NUL terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ota_experiment_from_toml(
    text: *const c_char,
    out: *mut *mut OtaExperiment,
) -> OtaStatus {
    guarded(|| {
        if out.is_null() {
            record_error("null output pointer".into());
            return OtaStatus::NullPointer;
        }
        let text = match unsafe { utf8_arg(text) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let config = match RawConfig::parse(text).and_then(RawConfig::into_config) {
            Ok(cfg) => cfg,
            Err(err) => return fail(err),
        };
        if let Err(err) = config.validate() {
            return fail(err);
        }
        // SAFETY: out checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(OtaExperiment { config })) };
        OtaStatus::Ok
    })
}

/// Runs the experiment (mean estimation or PSGD, per its `mode`) and writes
/// a fresh results handle to `out`.
///
/// # Safety
/// `experiment` must come from [`ota_experiment_from_toml`]; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ota_experiment_run(
    experiment: *const OtaExperiment,
    out: *mut *mut OtaResults,
) -> OtaStatus {
    guarded(|| {
        if experiment.is_null() || out.is_null() {
            record_error("null pointer argument".into());
            return OtaStatus::NullPointer;
        }
        // SAFETY: caller guarantees the handle is live.
        let config = unsafe { &(*experiment).config };
        let inner = match config.mode {
            Mode::MeanEstimation => match run_mean_estimation(config) {
                Ok(rows) => ResultsInner::Rows(rows),
                Err(err) => return fail(err),
            },
            Mode::Psgd => match run_psgd_experiment(config) {
                Ok(rows) => ResultsInner::Trace(rows),
                Err(err) => return fail(err),
            },
        };
        // SAFETY: out checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(OtaResults { inner })) };
        OtaStatus::Ok
    })
}

/// Frees an experiment handle. Null is ignored.
///
/// # Safety
/// `experiment` must be null or a pointer from [`ota_experiment_from_toml`],
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ota_experiment_free(experiment: *mut OtaExperiment) {
    if !experiment.is_null() {
        // SAFETY: caller guarantees ownership.
        drop(unsafe { Box::from_raw(experiment) });
    }
}

/// Number of rows in a results handle (sweep rows or trace rows).
///
/// # Safety
/// `results` must be a live handle from [`ota_experiment_run`].
#[no_mangle]
pub unsafe extern "C" fn ota_results_len(results: *const OtaResults) -> usize {
    if results.is_null() {
        return 0;
    }
    // SAFETY: caller guarantees the handle is live.
    match unsafe { &(*results).inner } {
        ResultsInner::Rows(rows) => rows.len(),
        ResultsInner::Trace(rows) => rows.len(),
    }
}

/// Copies mean-estimation row `index` into `out`. Fails with `OutOfRange`
/// when the handle holds a PSGD trace or the index is past the end.
///
/// # Safety
/// `results` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ota_results_row(
    results: *const OtaResults,
    index: usize,
    out: *mut OtaResultRow,
) -> OtaStatus {
    guarded(|| {
        if results.is_null() || out.is_null() {
            record_error("null pointer argument".into());
            return OtaStatus::NullPointer;
        }
        // SAFETY: caller guarantees the handle is live.
        let rows = match unsafe { &(*results).inner } {
            ResultsInner::Rows(rows) => rows,
            ResultsInner::Trace(_) => {
                record_error("results hold a PSGD trace, not sweep rows".into());
                return OtaStatus::OutOfRange;
            }
        };
        let Some(row) = rows.get(index) else {
            record_error(format!("row {index} out of range ({} rows)", rows.len()));
            return OtaStatus::OutOfRange;
        };
        // SAFETY: out checked non-null above.
        unsafe {
            *out = OtaResultRow {
                scheme: row.scheme.into(),
                num_clients: row.num_clients as u64,
                dim: row.dim as u64,
                snr_db: row.snr_db,
                bound: row.bound,
                sigma: row.sigma,
                runs: row.runs as u64,
                rmse: row.rmse,
                uses_per_round: row.uses,
                metric: row.metric,
                decode_fail_rate: row.decode_fail_rate,
            };
        }
        OtaStatus::Ok
    })
}

/// Copies PSGD trace row `index` into `iteration` and `gap`.
///
/// # Safety
/// `results` must be a live handle; `iteration` and `gap` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ota_results_trace_row(
    results: *const OtaResults,
    index: usize,
    iteration: *mut u64,
    gap: *mut f64,
) -> OtaStatus {
    guarded(|| {
        if results.is_null() || iteration.is_null() || gap.is_null() {
            record_error("null pointer argument".into());
            return OtaStatus::NullPointer;
        }
        // SAFETY: caller guarantees the handle is live.
        let rows = match unsafe { &(*results).inner } {
            ResultsInner::Trace(rows) => rows,
            ResultsInner::Rows(_) => {
                record_error("results hold sweep rows, not a PSGD trace".into());
                return OtaStatus::OutOfRange;
            }
        };
        let Some(row) = rows.get(index) else {
            record_error(format!("row {index} out of range ({} rows)", rows.len()));
            return OtaStatus::OutOfRange;
        };
        // SAFETY: pointers checked non-null above.
        unsafe {
            *iteration = row.iteration;
            *gap = row.gap;
        }
        OtaStatus::Ok
    })
}

/// Writes the results to `path` in the requested format (an `OtaFormat`
/// value; the same bytes the CLI emits).
///
/// # Safety
/// `results` must be a live handle; `path` must be NUL terminated.
#[no_mangle]
pub unsafe extern "C" fn ota_results_write(
    results: *const OtaResults,
    path: *const c_char,
    format: u32,
) -> OtaStatus {
    guarded(|| {
        if results.is_null() {
            record_error("null pointer argument".into());
            return OtaStatus::NullPointer;
        }
        let format = match format_from_raw(format) {
            Ok(f) => f,
            Err(status) => return status,
        };
        let path = match unsafe { utf8_arg(path) } {
            Ok(p) => Path::new(p).to_path_buf(),
            Err(status) => return status,
        };
        // SAFETY: caller guarantees the handle is live.
        let outcome = match unsafe { &(*results).inner } {
            ResultsInner::Rows(rows) => write_results(rows, &path, format.into()),
            ResultsInner::Trace(rows) => write_trace(rows, &path, format.into()),
        };
        match outcome {
            Ok(()) => OtaStatus::Ok,
            Err(err) => fail(err),
        }
    })
}

/// Frees a results handle. Null is ignored.
///
/// # Safety
/// `results` must be null or a pointer from [`ota_experiment_run`], not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn ota_results_free(results: *mut OtaResults) {
    if !results.is_null() {
        // SAFETY: caller guarantees ownership.
        drop(unsafe { Box::from_raw(results) });
    }
}

/// Computes the derived scheme parameters for a configuration and writes
/// them to `out` (`scheme` is an `OtaScheme` value). For the analog scheme
/// only `uses_per_round` is set.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ota_select_params(
    scheme: u32,
    num_clients: u64,
    dim: u64,
    snr_db: f64,
    n_budget: u64,
    bound: f64,
    c2: f64,
    out: *mut OtaSchemeParams,
) -> OtaStatus {
    guarded(|| {
        if out.is_null() {
            record_error("null output pointer".into());
            return OtaStatus::NullPointer;
        }
        let scheme = match scheme_from_raw(scheme) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let snr = 10f64.powf(snr_db / 10.0);
        let params = match scheme {
            OtaScheme::Uq => {
                match select_params_uq(num_clients as usize, dim as usize, snr, n_budget, bound) {
                    Ok(p) => OtaSchemeParams {
                        levels: p.levels,
                        block_size: p.block_size as u64,
                        base: p.base,
                        ask_size: p.ask_size,
                        uses_per_round: p.uses_per_round,
                        ..Default::default()
                    },
                    Err(err) => return fail(err),
                }
            }
            OtaScheme::Wz => {
                match select_params_wz(num_clients as usize, dim as usize, snr, n_budget, bound, c2)
                {
                    Ok(p) => OtaSchemeParams {
                        levels: p.levels,
                        block_size: p.block_size as u64,
                        wz_block_size: p.wz_block_size as u64,
                        base: p.base,
                        wz_base: p.wz_base,
                        ask_size: p.ask_size,
                        wz_ask_size: p.wz_ask_size,
                        daq_range: p.daq_range,
                        daq_samples: p.daq_samples,
                        uses_per_round: p.uses_per_round,
                    },
                    Err(err) => return fail(err),
                }
            }
            OtaScheme::Analog => OtaSchemeParams {
                uses_per_round: dim,
                ..Default::default()
            },
        };
        // SAFETY: out checked non-null above.
        unsafe { *out = params };
        OtaStatus::Ok
    })
}
