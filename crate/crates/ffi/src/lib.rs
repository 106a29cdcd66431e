//! C interface to the cmom engine.
//!
//! Every function returns a [`CmomStatus`]; on failure the message is
//! available from [`cmom_last_error`] on the same thread. Objects cross the
//! boundary as opaque handles that the caller frees with the matching
//! `*_free` function. Strings returned through out-parameters are owned by
//! the caller and released with [`cmom_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cmom::econometrics::{ols, sharpe_ratio, Covariance};
use cmom::panel::{ingest_returns, IngestOptions, ReturnPanel};
use cmom::period::{Frequency, Timeline};
use cmom::signals::{window_return, LagWindow};
use cmom::sorter::{assign_bucket, compute_breakpoints};
use cmom::study::{exit_code, run_study, Command, StudyConfig};
use cmom::synth::{generate, DgpConfig};
use cmom::Error;

/// Result of every call. Values 1 to 6 match the `cmom` binary's exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmomStatus {
    Ok = 0,
    Failed = 1,
    Config = 2,
    Schema = 3,
    MissingFactors = 4,
    DegenerateBreakpoints = 5,
    Io = 6,
    NullPointer = 7,
    InvalidArgument = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmomFrequency {
    Monthly = 0,
    Daily = 1,
}

/// A monthly return panel loaded from a returns CSV.
pub struct CmomPanel {
    inner: ReturnPanel,
}

/// A study configuration.
pub struct CmomStudy {
    inner: StudyConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: CmomStatus, msg: &str) -> CmomStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> CmomStatus {
    set_error(&e.to_string());
    match exit_code(e) {
        2 => CmomStatus::Config,
        3 => CmomStatus::Schema,
        4 => CmomStatus::MissingFactors,
        5 => CmomStatus::DegenerateBreakpoints,
        6 => CmomStatus::Io,
        _ => CmomStatus::Failed,
    }
}

/// Runs `f`, converting panics into [`CmomStatus::Panic`].
fn guard(f: impl FnOnce() -> CmomStatus) -> CmomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CmomStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CmomStatus::Panic, &format!("internal panic: {msg}"))
        }
    }
}

macro_rules! nonnull {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(CmomStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, CmomStatus> {
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CmomStatus::InvalidArgument, &format!("`{name}` is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> &'a [f64] {
    if n == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(p, n)
    }
}

fn give_string(s: String, out: *mut *mut c_char) -> CmomStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            CmomStatus::Ok
        }
        Err(_) => fail(CmomStatus::Failed, "output contains a nul byte"),
    }
}

/// Engine version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cmom_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn cmom_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cmom_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Least squares of `y` (length `n_obs`) on the row-major `n_obs x n_cols`
/// design `x`; include a column of ones for an intercept. `nw_lags < 0`
/// gives plain OLS standard errors, `nw_lags >= 0` Newey-West with that
/// many lags. Writes `n_cols` coefficients and standard errors; `out_r2`
/// may be null.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cmom_ols(
    y: *const f64,
    x: *const f64,
    n_obs: usize,
    n_cols: usize,
    nw_lags: i64,
    out_coef: *mut f64,
    out_se: *mut f64,
    out_r2: *mut f64,
) -> CmomStatus {
    guard(|| {
        nonnull!(y, x, out_coef, out_se);
        if n_cols == 0 {
            return fail(CmomStatus::InvalidArgument, "n_cols must be positive");
        }
        let Some(cells) = n_obs.checked_mul(n_cols) else {
            return fail(CmomStatus::InvalidArgument, "design size overflows");
        };
        let design = nalgebra::DMatrix::from_row_slice(n_obs, n_cols, slice(x, cells));
        let names: Vec<String> = (0..n_cols).map(|j| format!("x{j}")).collect();
        let cov = if nw_lags < 0 {
            Covariance::Plain
        } else {
            Covariance::NeweyWest(Some(nw_lags as usize))
        };
        match ols(slice(y, n_obs), &design, &names, cov) {
            Ok(r) => {
                std::slice::from_raw_parts_mut(out_coef, n_cols).copy_from_slice(&r.coef);
                std::slice::from_raw_parts_mut(out_se, n_cols).copy_from_slice(&r.se);
                if !out_r2.is_null() {
                    *out_r2 = r.r2;
                }
                CmomStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Compounded return over periods `t-j ..= t-k` of a series whose element
/// `i` is period `i`. Fails with `InvalidArgument` when the window is
/// malformed or falls outside the series.
///
/// # Safety
/// `returns` must be valid for `n` values.
#[no_mangle]
pub unsafe extern "C" fn cmom_window_return(
    returns: *const f64,
    n: usize,
    t: i32,
    j: u32,
    k: u32,
    out: *mut f64,
) -> CmomStatus {
    guard(|| {
        nonnull!(returns, out);
        let w = match LagWindow::new(j, k) {
            Ok(w) => w,
            Err(e) => return fail(CmomStatus::InvalidArgument, &e.to_string()),
        };
        let series: Vec<(i32, f64)> = slice(returns, n)
            .iter()
            .enumerate()
            .map(|(i, r)| (i as i32, *r))
            .collect();
        match window_return(&series, t, w) {
            Some(v) => {
                *out = v;
                CmomStatus::Ok
            }
            None => fail(CmomStatus::InvalidArgument, "window not covered by the series"),
        }
    })
}

/// Writes the `n_buckets - 1` quantile thresholds of `values`.
///
/// # Safety
/// `values` must hold `n` values and `out` room for `n_buckets - 1`.
#[no_mangle]
pub unsafe extern "C" fn cmom_breakpoints(
    values: *const f64,
    n: usize,
    n_buckets: usize,
    out: *mut f64,
) -> CmomStatus {
    guard(|| {
        nonnull!(values, out);
        if n_buckets < 2 {
            return fail(CmomStatus::InvalidArgument, "need at least two buckets");
        }
        match compute_breakpoints(slice(values, n), n_buckets) {
            Ok(th) => {
                std::slice::from_raw_parts_mut(out, th.len()).copy_from_slice(&th);
                CmomStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// 1-based bucket of `value` given ascending thresholds; ties go to the
/// lower bucket.
///
/// # Safety
/// `thresholds` must hold `n_thresholds` values.
#[no_mangle]
pub unsafe extern "C" fn cmom_assign_bucket(
    thresholds: *const f64,
    n_thresholds: usize,
    value: f64,
    out_bucket: *mut usize,
) -> CmomStatus {
    guard(|| {
        nonnull!(thresholds, out_bucket);
        *out_bucket = assign_bucket(slice(thresholds, n_thresholds), value);
        CmomStatus::Ok
    })
}

/// Annualized Sharpe ratio `mean / sd * sqrt(periods per year)` of a
/// return series, with the sample SD.
///
/// # Safety
/// `values` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn cmom_sharpe(
    values: *const f64,
    n: usize,
    frequency: CmomFrequency,
    out: *mut f64,
) -> CmomStatus {
    guard(|| {
        nonnull!(values, out);
        let v = slice(values, n);
        if n < 2 {
            return fail(CmomStatus::InvalidArgument, "need at least two values");
        }
        let freq = match frequency {
            CmomFrequency::Monthly => Frequency::Monthly,
            CmomFrequency::Daily => Frequency::Daily,
        };
        match sharpe_ratio(
            cmom::econometrics::mean(v),
            cmom::econometrics::sample_sd(v),
            freq,
        ) {
            Some(s) => {
                *out = s;
                CmomStatus::Ok
            }
            None => fail(CmomStatus::InvalidArgument, "zero standard deviation"),
        }
    })
}

/// Loads a monthly `returns.csv`. Rejected rows are skipped.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cmom_panel_open(path: *const c_char, out: *mut *mut CmomPanel) -> CmomStatus {
    guard(|| {
        nonnull!(path, out);
        let path = match str_arg(path, "path") {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        match ingest_returns(&path, Timeline::Monthly, &IngestOptions::default()) {
            Ok((panel, _)) => {
                *out = Box::into_raw(Box::new(CmomPanel { inner: panel }));
                CmomStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of firms and firm-month observations in a panel. Either out
/// pointer may be null.
///
/// # Safety
/// `panel` must come from [`cmom_panel_open`].
#[no_mangle]
pub unsafe extern "C" fn cmom_panel_shape(
    panel: *const CmomPanel,
    out_firms: *mut usize,
    out_obs: *mut usize,
) -> CmomStatus {
    guard(|| {
        nonnull!(panel);
        let p = &(*panel).inner;
        if !out_firms.is_null() {
            *out_firms = p.firms().len();
        }
        if !out_obs.is_null() {
            *out_obs = p.len();
        }
        CmomStatus::Ok
    })
}

/// Compounded return of one firm over months `from ..= to`, written as
/// `YYYY-MM`.
///
/// # Safety
/// `panel` must come from [`cmom_panel_open`]; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cmom_panel_compound(
    panel: *const CmomPanel,
    firm: *const c_char,
    from: *const c_char,
    to: *const c_char,
    out: *mut f64,
) -> CmomStatus {
    guard(|| {
        nonnull!(panel, firm, from, to, out);
        let p = &(*panel).inner;
        let (firm, from, to) = match (str_arg(firm, "firm"), str_arg(from, "from"), str_arg(to, "to")) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let Some(id) = p.firm_id(firm) else {
            return fail(CmomStatus::InvalidArgument, &format!("unknown firm {firm}"));
        };
        let (Some(a), Some(b)) = (p.timeline().parse(from), p.timeline().parse(to)) else {
            return fail(CmomStatus::InvalidArgument, "months must be YYYY-MM");
        };
        match p.compound(id, a, b) {
            Some(v) => {
                *out = v;
                CmomStatus::Ok
            }
            None => fail(CmomStatus::InvalidArgument, "months missing inside the range"),
        }
    })
}

/// # Safety
/// `panel` must come from [`cmom_panel_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cmom_panel_free(panel: *mut CmomPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Creates a study configuration from TOML text, or defaults when `toml`
/// is null.
///
/// # Safety
/// `toml` must be null or NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cmom_study_new(toml: *const c_char, out: *mut *mut CmomStudy) -> CmomStatus {
    guard(|| {
        nonnull!(out);
        let cfg = if toml.is_null() {
            Ok(StudyConfig::default())
        } else {
            match str_arg(toml, "toml") {
                Ok(t) => StudyConfig::from_toml(t),
                Err(s) => return s,
            }
        };
        match cfg {
            Ok(c) => {
                *out = Box::into_raw(Box::new(CmomStudy { inner: c }));
                CmomStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Sets the data and output directories; either may be null to keep the
/// current value.
///
/// # Safety
/// `study` must come from [`cmom_study_new`]; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cmom_study_set_dirs(
    study: *mut CmomStudy,
    data_dir: *const c_char,
    out_dir: *const c_char,
) -> CmomStatus {
    guard(|| {
        nonnull!(study);
        let s = &mut (*study).inner;
        if !data_dir.is_null() {
            match str_arg(data_dir, "data_dir") {
                Ok(d) => s.data_dir = d.into(),
                Err(e) => return e,
            }
        }
        if !out_dir.is_null() {
            match str_arg(out_dir, "out_dir") {
                Ok(d) => s.out_dir = d.into(),
                Err(e) => return e,
            }
        }
        CmomStatus::Ok
    })
}

/// Runs one command (`synth`, `sort`, ..., `all`). When `out_json` is not
/// null it receives a JSON array of the reports produced.
///
/// # Safety
/// `study` must come from [`cmom_study_new`]; `command` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cmom_study_run(
    study: *const CmomStudy,
    command: *const c_char,
    out_json: *mut *mut c_char,
) -> CmomStatus {
    guard(|| {
        nonnull!(study, command);
        let cmd: Command = match str_arg(command, "command").map(str::parse) {
            Ok(Ok(c)) => c,
            Ok(Err(e)) => return from_error(&e),
            Err(s) => return s,
        };
        match run_study(&(*study).inner, cmd) {
            Ok(outcome) => {
                if out_json.is_null() {
                    return CmomStatus::Ok;
                }
                match serde_json::to_string(&outcome.reports) {
                    Ok(j) => give_string(j, out_json),
                    Err(e) => fail(CmomStatus::Failed, &e.to_string()),
                }
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `study` must come from [`cmom_study_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cmom_study_free(study: *mut CmomStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

/// Writes a synthetic market into `dir`. `toml` holds generator settings
/// (the keys of a study file's `[synth]` table) or is null for defaults.
///
/// # Safety
/// `dir` must be NUL-terminated; `toml` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cmom_synth_write(toml: *const c_char, dir: *const c_char) -> CmomStatus {
    guard(|| {
        nonnull!(dir);
        let dir = match str_arg(dir, "dir") {
            Ok(d) => PathBuf::from(d),
            Err(s) => return s,
        };
        let cfg: DgpConfig = if toml.is_null() {
            DgpConfig::default()
        } else {
            let text = match str_arg(toml, "toml") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match toml::from_str(text) {
                Ok(c) => c,
                Err(e) => return fail(CmomStatus::Config, &format!("config error: {e}")),
            }
        };
        match generate(&cfg).and_then(|m| m.write_dir(&dir)) {
            Ok(()) => CmomStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}
