//! C ABI over the hazard-search library.
//!
//! Configurations and reports are opaque handles owned by the caller and
//! released with their `_free` functions. Every fallible call returns an
//! [`HsStatus`]; on failure [`hs_last_error`] describes the most recent error
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hazard_search::harness::{
    emit_plots, ground_truth_for, run_baseline_with, run_item_with, Budget, RunConfig, RunReport,
    RunStatus,
};
use hazard_search::objectives::FnObjective;
use hazard_search::{Error, SearchSpace};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Objective = 5,
    Io = 6,
    OutOfRange = 7,
    NoMetrics = 8,
    Panic = 9,
}

/// How a run ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsRunState {
    BudgetExhausted = 0,
    Stopped = 1,
    Incomplete = 2,
}

/// Scores of a run against ground truth. Optional values are NaN when absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsMetrics {
    pub f2_grid: f64,
    pub api: f64,
    pub adi: f64,
    pub hazard_ratio: f64,
    pub no_detection: bool,
}

/// Opaque run configuration.
pub struct HsConfig {
    inner: RunConfig,
}

/// Opaque run report.
pub struct HsReport {
    inner: RunReport,
}

/// Risk callback for [`hs_run_custom`]. Writes the risk at `point` (length
/// `dim`) to `out_risk` and returns 0, or returns nonzero on failure.
pub type HsObjectiveFn = Option<
    unsafe extern "C" fn(
        point: *const f64,
        dim: usize,
        user_data: *mut c_void,
        out_risk: *mut f64,
    ) -> c_int,
>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(HsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => HsStatus::Config,
            Error::Objective(_) => HsStatus::Objective,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => HsStatus::Io,
            _ => HsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            HsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            HsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn config_arg<'a>(p: *const HsConfig) -> Result<&'a RunConfig, Failure> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| null("config"))
}

unsafe fn report_arg<'a>(p: *const HsReport) -> Result<&'a RunReport, Failure> {
    p.as_ref().map(|r| &r.inner).ok_or_else(|| null("report"))
}

fn boxed_config(cfg: RunConfig) -> *mut HsConfig {
    Box::into_raw(Box::new(HsConfig { inner: cfg }))
}

fn boxed_report(report: RunReport) -> *mut HsReport {
    Box::into_raw(Box::new(HsReport { inner: report }))
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_config_from_toml(
    toml: *const c_char,
    out: *mut *mut HsConfig,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = RunConfig::from_toml_str(str_arg(toml, "toml")?)?;
        *out = boxed_config(cfg);
        Ok(())
    })
}

/// Loads a named preset such as `"gaussian-2d"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_config_preset(
    name: *const c_char,
    out: *mut *mut HsConfig,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed_config(RunConfig::preset(str_arg(name, "name")?)?);
        Ok(())
    })
}

/// Replaces the budget with a fixed number of samples.
///
/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn hs_config_set_fixed_budget(
    config: *mut HsConfig,
    samples: usize,
) -> HsStatus {
    guard(|| {
        let cfg = &mut config.as_mut().ok_or_else(|| null("config"))?.inner;
        let mut next = cfg.clone();
        next.budget = Budget::Fixed { samples };
        next.validate()?;
        *cfg = next;
        Ok(())
    })
}

/// Writes the configuration as TOML into a new string released with
/// [`hs_string_free`].
///
/// # Safety
/// `config` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_config_to_toml(
    config: *const HsConfig,
    out: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = config_arg(config)?.to_toml_string()?;
        *out = CString::new(text)
            .map_err(|e| Failure(HsStatus::Io, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library or be null; it must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_config_free(config: *mut HsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn run_builtin(
    config: *const HsConfig,
    seed: u64,
    out: *mut *mut HsReport,
    baseline: bool,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = config_arg(config)?;
        cfg.validate()?;
        let objective = cfg.build_objective()?;
        let truth = ground_truth_for(&*objective, cfg)?;
        let report = if baseline {
            run_baseline_with(&*objective, cfg, seed, truth.as_ref())?
        } else {
            run_item_with(&*objective, cfg, seed, truth.as_ref())?
        };
        *out = boxed_report(report);
        Ok(())
    })
}

/// Tree search on the configured built-in objective.
///
/// A run whose objective fails still yields a report, with state
/// [`HsRunState::Incomplete`].
///
/// # Safety
/// `config` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_run_item(
    config: *const HsConfig,
    seed: u64,
    out: *mut *mut HsReport,
) -> HsStatus {
    run_builtin(config, seed, out, false)
}

/// Uniform random sampling on the configured built-in objective.
///
/// # Safety
/// `config` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_run_baseline(
    config: *const HsConfig,
    seed: u64,
    out: *mut *mut HsReport,
) -> HsStatus {
    run_builtin(config, seed, out, true)
}

/// Tree search on a caller-supplied risk function over the box
/// `[lower, upper]` of dimension `dim`. Points with risk above
/// `hazard_threshold` are hazardous; `metric_low` and `metric_high` bound the
/// risk. The objective in `config` is ignored. When the configuration sets a
/// grid resolution the callback is also evaluated on that grid for scoring.
///
/// # Safety
/// `lower` and `upper` must point to `dim` doubles; `objective` must be safe
/// to call with `user_data` for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn hs_run_custom(
    config: *const HsConfig,
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    hazard_threshold: f64,
    metric_low: f64,
    metric_high: f64,
    objective: HsObjectiveFn,
    user_data: *mut c_void,
    seed: u64,
    out: *mut *mut HsReport,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = config_arg(config)?;
        let callback = objective.ok_or_else(|| null("objective"))?;
        if lower.is_null() || upper.is_null() {
            return Err(null("bounds"));
        }
        if dim == 0 {
            return Err(Failure(
                HsStatus::InvalidArgument,
                "dim must be >= 1".into(),
            ));
        }
        let lower = std::slice::from_raw_parts(lower, dim).to_vec();
        let upper = std::slice::from_raw_parts(upper, dim).to_vec();
        let space = SearchSpace::new(lower, upper, hazard_threshold, (metric_low, metric_high))?;
        let f = |p: &[f64]| {
            let mut risk = f64::NAN;
            let code = callback(p.as_ptr(), p.len(), user_data, &mut risk);
            if code == 0 {
                Ok(risk)
            } else {
                Err(Error::Objective(format!("callback returned {code}")))
            }
        };
        let objective = FnObjective::new("custom", space, f);
        cfg.validate()?;
        let truth = ground_truth_for(&objective, cfg)?;
        *out = boxed_report(run_item_with(&objective, cfg, seed, truth.as_ref())?);
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library or be null; it must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_report_free(report: *mut HsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of evaluated samples, or 0 for a null report.
///
/// # Safety
/// `report` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hs_report_n_samples(report: *const HsReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.n_samples())
}

/// Dimension of the search space, or 0 for a null report.
///
/// # Safety
/// `report` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hs_report_dim(report: *const HsReport) -> usize {
    report
        .as_ref()
        .map_or(0, |r| r.inner.final_tree.root().region.dim())
}

/// Number of identified hazardous domains, or 0 for a null report.
///
/// # Safety
/// `report` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hs_report_n_domains(report: *const HsReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.domains.len())
}

/// # Safety
/// `report` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_report_state(
    report: *const HsReport,
    out: *mut HsRunState,
) -> HsStatus {
    guard(|| {
        *out_arg(out, "out")? = match report_arg(report)?.status {
            RunStatus::BudgetExhausted => HsRunState::BudgetExhausted,
            RunStatus::Stopped => HsRunState::Stopped,
            RunStatus::Incomplete { .. } => HsRunState::Incomplete,
        };
        Ok(())
    })
}

/// Copies the bounds of domain `index` into `lower` and `upper`, each of
/// length [`hs_report_dim`].
///
/// # Safety
/// `lower` and `upper` must each have room for `hs_report_dim(report)`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_report_domain(
    report: *const HsReport,
    index: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> HsStatus {
    guard(|| {
        let r = report_arg(report)?;
        if lower.is_null() || upper.is_null() {
            return Err(null("bounds"));
        }
        let domain = r.domains.get(index).ok_or_else(|| {
            Failure(
                HsStatus::OutOfRange,
                format!("domain {index} of {}", r.domains.len()),
            )
        })?;
        let dim = domain.bounds.lower.len();
        ptr::copy_nonoverlapping(domain.bounds.lower.as_ptr(), lower, dim);
        ptr::copy_nonoverlapping(domain.bounds.upper.as_ptr(), upper, dim);
        Ok(())
    })
}

/// Copies the run's scores into `out`; [`HsStatus::NoMetrics`] when the run
/// had no ground truth.
///
/// # Safety
/// `report` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_report_metrics(
    report: *const HsReport,
    out: *mut HsMetrics,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = report_arg(report)?.metrics.as_ref().ok_or_else(|| {
            Failure(
                HsStatus::NoMetrics,
                "run has no ground truth to score against".into(),
            )
        })?;
        *out = HsMetrics {
            f2_grid: m.f2_grid.unwrap_or(f64::NAN),
            api: m.api,
            adi: m.adi,
            hazard_ratio: m.hazard_ratio.unwrap_or(f64::NAN),
            no_detection: m.no_detection,
        };
        Ok(())
    })
}

/// Serializes the full report as JSON into a new string released with
/// [`hs_string_free`].
///
/// # Safety
/// `report` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_report_to_json(
    report: *const HsReport,
    out: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = report_arg(report)?.to_json()?;
        *out = CString::new(text)
            .map_err(|e| Failure(HsStatus::Io, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Writes the report and its CSV/JSONL exports into directory `dir`.
///
/// # Safety
/// `report` must come from this library and `dir` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hs_report_write(report: *const HsReport, dir: *const c_char) -> HsStatus {
    guard(|| {
        let r = report_arg(report)?;
        emit_plots(r, Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
