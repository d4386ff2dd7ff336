//! C ABI over `mstoep`.
//!
//! Objects cross the boundary as opaque handles created by `mst_*_new` and
//! released by the matching `mst_*_free`. Every fallible call returns an
//! [`MstStatus`]; on failure the message is kept per thread and read back
//! with [`mst_last_error`]. Complex arrays are interleaved `re, im` pairs.
//! Handles may be shared across threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mstoep::cli::{render, ExperimentConfig};
use mstoep::error::Error;
use mstoep::laurent::MatrixLaurentSeries;
use mstoep::linalg::{LogDet, C64};
use mstoep::modelspace::BlaschkeProduct;
use mstoep::params::NumericParams;
use mstoep::verify::{bo_report, DeterminantReport};

/// Call outcome.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MstStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A zero outside the open unit disk or above the desk-scale cap.
    InvalidZero = 3,
    /// The symbol vanishes, winds, or has no canonical factorization.
    BadSymbol = 4,
    /// A grid, quadrature or truncation limit was reached.
    NotConverged = 5,
    /// Two routes to the same quantity disagree.
    RouteDiscrepancy = 6,
    Numerical = 7,
    Panic = 8,
}

/// Parameters mirrored field by field from the library defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MstParams {
    pub grid_cap: usize,
    pub tail_tol: f64,
    pub section_cap: usize,
    pub truncation_cap: usize,
    pub tol: f64,
    pub desk_radius: f64,
    pub det_floor: f64,
    pub quad_tol: f64,
    pub route_tol: f64,
}

impl From<NumericParams> for MstParams {
    fn from(p: NumericParams) -> Self {
        MstParams {
            grid_cap: p.grid_cap,
            tail_tol: p.tail_tol,
            section_cap: p.section_cap,
            truncation_cap: p.truncation_cap,
            tol: p.tol,
            desk_radius: p.desk_radius,
            det_floor: p.det_floor,
            quad_tol: p.quad_tol,
            route_tol: p.route_tol,
        }
    }
}

impl From<MstParams> for NumericParams {
    fn from(p: MstParams) -> Self {
        NumericParams {
            grid_cap: p.grid_cap,
            tail_tol: p.tail_tol,
            section_cap: p.section_cap,
            truncation_cap: p.truncation_cap,
            tol: p.tol,
            desk_radius: p.desk_radius,
            det_floor: p.det_floor,
            quad_tol: p.quad_tol,
            route_tol: p.route_tol,
        }
    }
}

/// A determinant as `exp(log_abs + i arg)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MstLogDet {
    pub log_abs: f64,
    pub arg: f64,
}

impl From<LogDet> for MstLogDet {
    fn from(d: LogDet) -> Self {
        MstLogDet {
            log_abs: d.log_abs,
            arg: d.arg,
        }
    }
}

/// Opaque matrix Laurent polynomial.
pub struct MstSymbol(MatrixLaurentSeries);
/// Opaque finite Blaschke product.
pub struct MstBlaschke(BlaschkeProduct);
/// Opaque determinant-identity report.
pub struct MstReport(DeterminantReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn root(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => root(source),
        other => other,
    }
}

fn status_of(e: &Error) -> MstStatus {
    match root(e) {
        Error::ZeroOutsideDisk { .. } | Error::DeskScaleCap { .. } | Error::PoleHit => {
            MstStatus::InvalidZero
        }
        Error::SingularSample { .. }
        | Error::NearSingular { .. }
        | Error::NonzeroWinding(_)
        | Error::NoCanonicalFactorization { .. } => MstStatus::BadSymbol,
        Error::TailTooLarge { .. }
        | Error::UnwrapNotResolved { .. }
        | Error::GramDefect { .. }
        | Error::QuadratureNotConverged { .. }
        | Error::FredholmStagnation { .. }
        | Error::TailBoundTooLarge { .. }
        | Error::TruncationTooSmall { .. } => MstStatus::NotConverged,
        Error::RouteDiscrepancy { .. } => MstStatus::RouteDiscrepancy,
        Error::InvalidArgument(_)
        | Error::InvalidSeries(_)
        | Error::BlockSizeMismatch { .. }
        | Error::GridNotPowerOfTwo { .. }
        | Error::Aliasing { .. }
        | Error::RegionMismatch { .. }
        | Error::SummabilityViolation(_) => MstStatus::InvalidArgument,
        _ => MstStatus::Numerical,
    }
}

/// Runs `f`, turning errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (MstStatus, String)>) -> MstStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MstStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MstStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (MstStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MstStatus, String) {
    (MstStatus::NullPointer, format!("{what} is null"))
}

unsafe fn complex_slice<'a>(data: *const f64, count: usize) -> Result<&'a [f64], (MstStatus, String)> {
    if count == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("data"));
    }
    Ok(std::slice::from_raw_parts(data, 2 * count))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn mst_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mst_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn mst_params_default() -> MstParams {
    NumericParams::default().into()
}

/// Builds a symbol from `count` coefficient blocks `a_{n_min}, ...`; each block
/// is `block_size * block_size` complex entries in row-major order.
///
/// # Safety
/// `data` must point to `2 * count * block_size^2` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mst_symbol_new(
    block_size: usize,
    n_min: i64,
    count: usize,
    data: *const f64,
    out: *mut *mut MstSymbol,
) -> MstStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = block_size;
        if m == 0 || count == 0 {
            return Err((MstStatus::InvalidArgument, "empty symbol".into()));
        }
        let raw = complex_slice(data, count * m * m)?;
        let mut flat = Vec::with_capacity(count * m * m);
        for k in 0..count {
            for c in 0..m {
                for r in 0..m {
                    let i = 2 * (k * m * m + r * m + c);
                    flat.push(C64::new(raw[i], raw[i + 1]));
                }
            }
        }
        let s = MatrixLaurentSeries::from_flat(m, n_min, flat).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MstSymbol(s)));
        Ok(())
    })
}

/// # Safety
/// `symbol` must come from [`mst_symbol_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mst_symbol_free(symbol: *mut MstSymbol) {
    if !symbol.is_null() {
        drop(Box::from_raw(symbol));
    }
}

/// Builds a Blaschke product from `count` interleaved complex zeros. Zeros
/// outside the open unit disk give `MST_STATUS_INVALID_ZERO`.
///
/// # Safety
/// `zeros` must point to `2 * count` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mst_blaschke_new(
    count: usize,
    zeros: *const f64,
    out: *mut *mut MstBlaschke,
) -> MstStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = complex_slice(zeros, count)?;
        let z = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let u = BlaschkeProduct::new(z).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MstBlaschke(u)));
        Ok(())
    })
}

/// # Safety
/// `u` must come from [`mst_blaschke_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mst_blaschke_free(u: *mut MstBlaschke) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// Checks `det T_u(a)` against the factored right-hand side. `params` may be
/// null for the defaults.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mst_bo_report(
    symbol: *const MstSymbol,
    u: *const MstBlaschke,
    params: *const MstParams,
    out: *mut *mut MstReport,
) -> MstStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = symbol.as_ref().ok_or_else(|| null("symbol"))?;
        let u = u.as_ref().ok_or_else(|| null("blaschke"))?;
        let p: NumericParams = params.as_ref().map_or_else(NumericParams::default, |p| (*p).into());
        let r = bo_report(&a.0, &u.0, &p).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MstReport(r)));
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`mst_bo_report`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mst_report_free(report: *mut MstReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Both sides of the identity and their relative defect.
///
/// # Safety
/// `report` must be live; the out pointers must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn mst_report_sides(
    report: *const MstReport,
    lhs: *mut MstLogDet,
    rhs: *mut MstLogDet,
    rel_defect: *mut f64,
) -> MstStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        if let Some(l) = lhs.as_mut() {
            *l = r.lhs.into();
        }
        if let Some(x) = rhs.as_mut() {
            *x = r.rhs.into();
        }
        if let Some(d) = rel_defect.as_mut() {
            *d = r.rel_defect;
        }
        Ok(())
    })
}

/// 1 when every check passed, 0 otherwise, -1 on a null handle.
///
/// # Safety
/// `report` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn mst_report_verdict(report: *const MstReport) -> i32 {
    report.as_ref().map_or(-1, |r| i32::from(r.0.verdict))
}

/// The full report as JSON; release with [`mst_string_free`].
///
/// # Safety
/// `report` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mst_report_json(report: *const MstReport, out: *mut *mut c_char) -> MstStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let s = serde_json::to_string(r).map_err(|e| (MstStatus::Numerical, e.to_string()))?;
        *out = CString::new(s).map_err(|e| (MstStatus::Numerical, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Runs an experiment config (the CLI's JSON format) and returns the rendered
/// report. `verdict` receives 1 or 0 when not null.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mst_run_config(
    config_json: *const c_char,
    out: *mut *mut c_char,
    verdict: *mut i32,
) -> MstStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| (MstStatus::InvalidArgument, e.to_string()))?;
        let cfg = ExperimentConfig::from_json(text).map_err(lib_err)?;
        let (s, v) = render(&cfg).map_err(lib_err)?;
        if let Some(p) = verdict.as_mut() {
            *p = i32::from(v);
        }
        *out = CString::new(s).map_err(|e| (MstStatus::Numerical, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mst_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
