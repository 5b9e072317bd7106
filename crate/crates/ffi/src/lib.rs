//! C ABI for the duality-lab check suite.
//!
//! Objects cross the boundary as opaque handles created by `dl_*_new` or
//! `dl_*_parse` style functions and released with the matching `dl_*_free`.
//! Every fallible function returns a [`DlStatus`]; on failure a message is
//! available from [`dl_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use duality_lab::report::{render_csv, render_json, CheckReport};
use duality_lab::specfun::KernelId;
use duality_lab::suite::{default_suite, parse_config, run_suite, SuiteConfig};
use duality_lab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidParam = 4,
    DomainError = 5,
    ComputeError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlFamily {
    Sep = 0,
    Sip = 1,
    Irw = 2,
    Bep = 3,
    Bmp = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlFormat {
    Json = 0,
    Csv = 1,
}

/// Numeric fields of one report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlReportSummary {
    /// Residual, or z-score for statistical checks; NaN if the check errored.
    pub residual: f64,
    pub tolerance: f64,
    pub elapsed_ms: f64,
    pub passed: bool,
}

/// A parsed check suite.
pub struct DlSuite(SuiteConfig);

/// Reports produced by running a suite.
pub struct DlReports(Vec<CheckReport>);

/// A single-site duality kernel.
pub struct DlKernel(KernelId);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> DlStatus {
    match e {
        Error::Parse { .. } | Error::UnknownCheckName(_) => DlStatus::ParseError,
        Error::BadParam(_)
        | Error::BadParamRange(_)
        | Error::MissingParam(_)
        | Error::OutOfRange(_)
        | Error::ZeroDenominatorParam { .. }
        | Error::UnknownSymbol(_)
        | Error::InvalidGraph(_)
        | Error::InvalidInitialState(_) => DlStatus::InvalidParam,
        Error::DomainError(_)
        | Error::OutOfSupport(_)
        | Error::NotApplicable(_)
        | Error::InfeasibleTotal { .. }
        | Error::NoCasimir
        | Error::GraphMismatch
        | Error::DimMismatch(_)
        | Error::UnassignedSymbol(_) => DlStatus::DomainError,
        Error::NonTerminatingDivergence { .. }
        | Error::SeriesDivergence { .. }
        | Error::StepSizeUnderflow(_)
        | Error::Io(_) => DlStatus::ComputeError,
    }
}

/// Runs `f`, converting errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> Result<(), (DlStatus, String)>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            DlStatus::Panic
        }
    }
}

fn core(e: Error) -> (DlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DlStatus, String) {
    (DlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (DlStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| (DlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DlStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (DlStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses suite text into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_suite_parse(text: *const c_char, out: *mut *mut DlSuite) -> DlStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let config = parse_config(text).map_err(core)?;
        write(out, Box::into_raw(Box::new(DlSuite(config))), "out")
    })
}

/// The bundled suite.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_suite_default(out: *mut *mut DlSuite) -> DlStatus {
    guard(|| write(out, Box::into_raw(Box::new(DlSuite(default_suite()))), "out"))
}

/// Number of check descriptors in the suite.
///
/// # Safety
/// `suite` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_suite_len(suite: *const DlSuite, out: *mut usize) -> DlStatus {
    guard(|| write(out, borrow(suite, "suite")?.0.checks.len(), "out"))
}

/// Replaces the suite seed.
///
/// # Safety
/// `suite` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dl_suite_set_seed(suite: *mut DlSuite, seed: u64) -> DlStatus {
    guard(|| {
        let suite = suite.as_mut().ok_or_else(|| null("suite"))?;
        suite.0.seed = seed;
        Ok(())
    })
}

/// Runs every check. Failing checks are reported, not returned as errors.
///
/// # Safety
/// `suite` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_suite_run(suite: *const DlSuite, out: *mut *mut DlReports) -> DlStatus {
    guard(|| {
        let reports = run_suite(&borrow(suite, "suite")?.0);
        write(out, Box::into_raw(Box::new(DlReports(reports))), "out")
    })
}

/// # Safety
/// `suite` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_suite_free(suite: *mut DlSuite) {
    if !suite.is_null() {
        drop(Box::from_raw(suite));
    }
}

/// # Safety
/// `reports` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_reports_len(reports: *const DlReports, out: *mut usize) -> DlStatus {
    guard(|| write(out, borrow(reports, "reports")?.0.len(), "out"))
}

/// Number of failed reports.
///
/// # Safety
/// `reports` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_reports_failed(reports: *const DlReports, out: *mut usize) -> DlStatus {
    guard(|| write(out, borrow(reports, "reports")?.0.iter().filter(|r| !r.passed).count(), "out"))
}

/// # Safety
/// `reports` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_reports_get(reports: *const DlReports, index: usize, out: *mut DlReportSummary) -> DlStatus {
    guard(|| {
        let all = &borrow(reports, "reports")?.0;
        let r = all
            .get(index)
            .ok_or_else(|| (DlStatus::InvalidParam, format!("index {index} out of bounds for {} reports", all.len())))?;
        let summary =
            DlReportSummary { residual: r.residual, tolerance: r.tolerance, elapsed_ms: r.elapsed_ms, passed: r.passed };
        write(out, summary, "out")
    })
}

/// Serializes all reports. Release the string with [`dl_string_free`].
///
/// # Safety
/// `reports` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_reports_render(reports: *const DlReports, format: DlFormat, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let reports = &borrow(reports, "reports")?.0;
        let text = match format {
            DlFormat::Json => render_json(reports),
            DlFormat::Csv => render_csv(reports),
        }
        .map_err(core)?;
        let c = CString::new(text).map_err(|e| (DlStatus::ComputeError, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `reports` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_reports_free(reports: *mut DlReports) {
    if !reports.is_null() {
        drop(Box::from_raw(reports));
    }
}

/// Creates a kernel. Parameters by family: SEP `(j, p)`, SIP `(k, c)`,
/// IRW `(lambda, _)`, BEP `(k, _)`, BMP `(_, _)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_kernel_new(family: DlFamily, a: f64, b: f64, out: *mut *mut DlKernel) -> DlStatus {
    guard(|| {
        let kernel = match family {
            DlFamily::Sep => KernelId::sep(a, b),
            DlFamily::Sip => KernelId::sip(a, b),
            DlFamily::Irw => KernelId::irw(a),
            DlFamily::Bep => KernelId::bep(a),
            DlFamily::Bmp => Ok(KernelId::Bmp),
        }
        .map_err(core)?;
        write(out, Box::into_raw(Box::new(DlKernel(kernel))), "out")
    })
}

/// Kernel value at occupation numbers (SEP, SIP, IRW).
///
/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_kernel_discrete(kernel: *const DlKernel, x: u32, n: u32, out: *mut f64) -> DlStatus {
    guard(|| write(out, borrow(kernel, "kernel")?.0.discrete(x, n).map_err(core)?, "out"))
}

/// Kernel value at real arguments (BEP, BMP).
///
/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_kernel_continuous(kernel: *const DlKernel, a: f64, b: f64, out: *mut f64) -> DlStatus {
    guard(|| write(out, borrow(kernel, "kernel")?.0.continuous(a, b).map_err(core)?, "out"))
}

/// # Safety
/// `kernel` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_kernel_free(kernel: *mut DlKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}
