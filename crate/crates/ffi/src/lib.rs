//! C ABI over `liouville-area`.
//!
//! Objects are opaque handles created by `la_*_new` style functions and
//! released with the matching `la_*_free`. Every fallible call returns an
//! [`LaStatus`]; on failure `la_last_error` describes the problem for the
//! calling thread. Panics never cross the boundary.

use liouville_area::area::{area_process, AreaMode};
use liouville_area::curves::{sample_brownian, Polyline};
use liouville_area::field::{CovarianceKernel, FieldSampler};
use liouville_area::gmc::{gmc_from_field, GmcSample};
use liouville_area::harness::{run_experiment, EstimateReport, ExperimentConfig};
use liouville_area::winding::winding_numbers;
use liouville_area::{Error, GridSpec, Point2};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Precondition = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Kernel families accepted by [`la_sampler_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaKernel {
    PureLog = 0,
    LogPlusConstant = 1,
}

/// Grid of `nx * ny` square cells of side `h` with lower-left corner `(x0, y0)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LaGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
}

pub struct LaSampler {
    inner: FieldSampler,
}

pub struct LaGmc {
    inner: GmcSample,
}

pub struct LaPolyline {
    inner: Polyline,
}

pub struct LaReport {
    inner: EstimateReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LaStatus {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::ConfigHashMismatch => LaStatus::Config,
        Error::Io(_) => LaStatus::Io,
        Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::GammaOutOfRange(_) | Error::Format(_) => {
            LaStatus::InvalidArgument
        }
        _ => LaStatus::Precondition,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), LaStatus>) -> LaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LaStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LaStatus::Panic
        }
    }
}

fn lib<T>(r: liouville_area::Result<T>) -> Result<T, LaStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn nonnull<'a, T>(p: *const T, what: &str) -> Result<&'a T, LaStatus> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error(format!("{what} is null"));
        LaStatus::NullPointer
    })
}

fn out_ptr<T>(out: *mut *mut T, value: T) -> Result<(), LaStatus> {
    if out.is_null() {
        set_error("output pointer is null".into());
        return Err(LaStatus::NullPointer);
    }
    // SAFETY: `out` is non-null and points to writable storage for a pointer.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn grid_of(g: &LaGrid) -> Result<GridSpec, LaStatus> {
    lib(GridSpec::new(g.x0, g.y0, g.h, g.nx, g.ny))
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library and is freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn la_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn la_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Field sampler for `kernel` on `grid`. `param` is the constant of
/// `LogPlusConstant` and ignored otherwise; `eps_reg <= 0` selects `h / 2`.
#[no_mangle]
pub extern "C" fn la_sampler_new(
    kernel: LaKernel,
    param: f64,
    eps_reg: f64,
    grid: LaGrid,
    out: *mut *mut LaSampler,
) -> LaStatus {
    guard(|| {
        let g = grid_of(&grid)?;
        let mut k = match kernel {
            LaKernel::PureLog => CovarianceKernel::pure_log(),
            LaKernel::LogPlusConstant => CovarianceKernel::log_plus_constant(param),
        };
        if eps_reg > 0.0 {
            k = k.with_eps(eps_reg);
        }
        let inner = lib(FieldSampler::auto(&k, &g))?;
        out_ptr(out, LaSampler { inner })
    })
}

/// Fraction of spectral mass removed by eigenvalue clipping.
#[no_mangle]
pub extern "C" fn la_sampler_clipped_fraction(sampler: *const LaSampler) -> f64 {
    // SAFETY: null or a live handle from `la_sampler_new`.
    unsafe { sampler.as_ref() }.map_or(f64::NAN, |s| s.inner.clipped_fraction())
}

#[no_mangle]
pub extern "C" fn la_sampler_free(sampler: *mut LaSampler) {
    free(sampler)
}

/// Chaos sample `index` of the stream keyed by `seed`.
#[no_mangle]
pub extern "C" fn la_gmc_sample(
    sampler: *const LaSampler,
    gamma: f64,
    seed: u64,
    index: u64,
    out: *mut *mut LaGmc,
) -> LaStatus {
    guard(|| {
        let s = nonnull(sampler, "sampler")?;
        let inner = lib(gmc_from_field(&s.inner.sample(seed, index), gamma))?;
        out_ptr(out, LaGmc { inner })
    })
}

/// Lebesgue measure on `grid` as a chaos sample (the `gamma = 0` case).
#[no_mangle]
pub extern "C" fn la_gmc_lebesgue(grid: LaGrid, out: *mut *mut LaGmc) -> LaStatus {
    guard(|| {
        let g = grid_of(&grid)?;
        out_ptr(out, LaGmc { inner: GmcSample::lebesgue(g) })
    })
}

#[no_mangle]
pub extern "C" fn la_gmc_total_mass(gmc: *const LaGmc) -> f64 {
    // SAFETY: null or a live handle.
    unsafe { gmc.as_ref() }.map_or(f64::NAN, |g| g.inner.total_mass())
}

/// Copies the row-major cell masses into `buf`, which must hold `nx * ny` values.
#[no_mangle]
pub extern "C" fn la_gmc_masses(gmc: *const LaGmc, buf: *mut f64, len: usize) -> LaStatus {
    guard(|| {
        let g = nonnull(gmc, "gmc")?;
        let m = &g.inner.masses;
        if buf.is_null() {
            set_error("buffer is null".into());
            return Err(LaStatus::NullPointer);
        }
        if len < m.len() {
            set_error(format!("buffer holds {len} values, need {}", m.len()));
            return Err(LaStatus::BufferTooSmall);
        }
        // SAFETY: `buf` is non-null with room for `len >= m.len()` values.
        unsafe { ptr::copy_nonoverlapping(m.as_ptr(), buf, m.len()) };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn la_gmc_free(gmc: *mut LaGmc) {
    free(gmc)
}

/// Polyline through `n` points with times spread evenly over `[0, 1]`.
#[no_mangle]
pub extern "C" fn la_polyline_new(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    closed: bool,
    out: *mut *mut LaPolyline,
) -> LaStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() {
            set_error("coordinate array is null".into());
            return Err(LaStatus::NullPointer);
        }
        // SAFETY: both arrays are non-null and hold `n` values by contract.
        let (x, y) = unsafe { (std::slice::from_raw_parts(xs, n), std::slice::from_raw_parts(ys, n)) };
        let pts = x.iter().zip(y).map(|(&a, &b)| Point2::new(a, b)).collect();
        let inner = lib(Polyline::from_points(pts, closed))?;
        out_ptr(out, LaPolyline { inner })
    })
}

/// Brownian path on `[0, 1]` with `n_steps` Gaussian increments.
#[no_mangle]
pub extern "C" fn la_polyline_brownian(n_steps: usize, seed: u64, out: *mut *mut LaPolyline) -> LaStatus {
    guard(|| {
        let inner = lib(sample_brownian(n_steps, seed))?;
        out_ptr(out, LaPolyline { inner })
    })
}

#[no_mangle]
pub extern "C" fn la_polyline_free(poly: *mut LaPolyline) {
    free(poly)
}

/// Winding numbers of the chord-closed polyline at the cell centers of
/// `grid`, row-major into `buf` of at least `nx * ny` values.
#[no_mangle]
pub extern "C" fn la_winding_numbers(poly: *const LaPolyline, grid: LaGrid, buf: *mut i32, len: usize) -> LaStatus {
    guard(|| {
        let p = nonnull(poly, "polyline")?;
        let g = grid_of(&grid)?;
        if buf.is_null() {
            set_error("buffer is null".into());
            return Err(LaStatus::NullPointer);
        }
        if len < g.cells() {
            set_error(format!("buffer holds {len} values, need {}", g.cells()));
            return Err(LaStatus::BufferTooSmall);
        }
        let w = winding_numbers(&g, p.inner.closure().segments());
        // SAFETY: `buf` is non-null with room for `len >= w.len()` values.
        unsafe { ptr::copy_nonoverlapping(w.as_ptr(), buf, w.len()) };
        Ok(())
    })
}

/// `A_{0,1}`: the integral of the winding function of the whole path
/// against `gmc`. The grid of `gmc` must hold the path with a spare cell.
#[no_mangle]
pub extern "C" fn la_levy_area(poly: *const LaPolyline, gmc: *const LaGmc, out: *mut f64) -> LaStatus {
    guard(|| {
        let p = nonnull(poly, "polyline")?;
        let g = nonnull(gmc, "gmc")?;
        if out.is_null() {
            set_error("output pointer is null".into());
            return Err(LaStatus::NullPointer);
        }
        let aps = lib(area_process(&p.inner, &g.inner, 0, AreaMode::Full))?;
        // SAFETY: `out` is non-null.
        unsafe { *out = aps.get(0, 1) };
        Ok(())
    })
}

/// Runs the experiment described by the JSON config `config_json`.
#[no_mangle]
pub extern "C" fn la_run_experiment(config_json: *const c_char, out: *mut *mut LaReport) -> LaStatus {
    guard(|| {
        if config_json.is_null() {
            set_error("config is null".into());
            return Err(LaStatus::NullPointer);
        }
        // SAFETY: non-null NUL-terminated string by contract.
        let text = unsafe { CStr::from_ptr(config_json) }.to_str().map_err(|e| {
            set_error(format!("config is not UTF-8: {e}"));
            LaStatus::InvalidArgument
        })?;
        let cfg = lib(ExperimentConfig::from_json(text))?;
        let inner = lib(run_experiment(&cfg))?;
        let json = lib(serde_json::to_string(&inner).map_err(Error::from))?;
        let json = CString::new(json).map_err(|_| LaStatus::InvalidArgument)?;
        out_ptr(out, LaReport { inner, json })
    })
}

/// The report as JSON, owned by the report handle.
#[no_mangle]
pub extern "C" fn la_report_json(report: *const LaReport) -> *const c_char {
    // SAFETY: null or a live handle.
    unsafe { report.as_ref() }.map_or(ptr::null(), |r| r.json.as_ptr())
}

/// 1 when every check passed, 0 when one failed, -1 for a null handle.
#[no_mangle]
pub extern "C" fn la_report_passed(report: *const LaReport) -> i32 {
    // SAFETY: null or a live handle.
    unsafe { report.as_ref() }.map_or(-1, |r| r.inner.passed() as i32)
}

#[no_mangle]
pub extern "C" fn la_report_free(report: *mut LaReport) {
    free(report)
}
