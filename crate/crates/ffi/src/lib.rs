//! C ABI over `isospec`.
//!
//! Every function returns an [`IsoStatus`]; results go through out-pointers. Objects are opaque
//! handles released with the matching `*_free`. On failure a message is kept per thread and can
//! be read with [`iso_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use isospec::quantize::{
    diagonal_model_spectrum, multiplicity, oscillator_spectrum, sqrt_oscillator_spectrum_scaled, SpectrumTable,
};
use isospec::spectra::{counting, mollified_counting, WindowSpec};
use isospec::symbols::Symbol;
use isospec::trace::{mehler_kernel, trace_transform};
use isospec::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    TrustViolation = 4,
    WindowSupport = 5,
    Numerical = 6,
    Parse = 7,
    Panic = 8,
}

/// Opaque symbol handle.
pub struct IsoSymbol(Symbol);

/// Opaque spectrum handle.
pub struct IsoSpectrumTable(SpectrumTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IsoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => IsoStatus::Domain,
            Error::Precondition(_) => IsoStatus::InvalidArgument,
            Error::Trust { .. } => IsoStatus::TrustViolation,
            Error::WindowSupport(_) => IsoStatus::WindowSupport,
            Error::InvalidSymbol(_) | Error::Json(_) => IsoStatus::Parse,
            _ => IsoStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(IsoStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(IsoStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IsoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsoStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IsoStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn table<'a>(t: *const IsoSpectrumTable) -> Result<&'a SpectrumTable, Failure> {
    t.as_ref().map(|t| &t.0).ok_or_else(|| null("table"))
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn iso_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn iso_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a symbol document (UTF-8 JSON).
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iso_symbol_from_json(json: *const c_char, out_symbol: *mut *mut IsoSymbol) -> IsoStatus {
    guard(|| {
        let slot = out(out_symbol, "out_symbol")?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Failure(IsoStatus::Parse, e.to_string()))?;
        let s = Symbol::from_json(text)?;
        *slot = Box::into_raw(Box::new(IsoSymbol(s)));
        Ok(())
    })
}

/// # Safety
/// `symbol` must come from `iso_symbol_from_json` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iso_symbol_free(symbol: *mut IsoSymbol) {
    if !symbol.is_null() {
        drop(Box::from_raw(symbol));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_symbol_dimension(symbol: *const IsoSymbol, out_d: *mut usize) -> IsoStatus {
    guard(|| {
        let s = symbol.as_ref().ok_or_else(|| null("symbol"))?;
        *out(out_d, "out_d")? = s.0.d;
        Ok(())
    })
}

/// Evaluates the symbol at stacked coordinates `(x_1..x_d, xi_1..xi_d)`; `len` must be `2d`.
///
/// # Safety
/// `w` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iso_symbol_evaluate(
    symbol: *const IsoSymbol,
    w: *const f64,
    len: usize,
    out_value: *mut f64,
) -> IsoStatus {
    guard(|| {
        let s = symbol.as_ref().ok_or_else(|| null("symbol"))?;
        let w = slice(w, len, "w")?;
        if len != 2 * s.0.d {
            return Err(invalid(format!("expected {} coordinates, got {len}", 2 * s.0.d)));
        }
        *out(out_value, "out_value")? = s.0.value(w)?;
        Ok(())
    })
}

fn emit(slot: &mut *mut IsoSpectrumTable, t: SpectrumTable) {
    *slot = Box::into_raw(Box::new(IsoSpectrumTable(t)));
}

/// Oscillator spectrum `j + d/2` with multiplicity `binomial(d + j - 1, j)` up to `lambda_max`.
///
/// # Safety
/// `out_table` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_oscillator(
    d: usize,
    lambda_max: f64,
    out_table: *mut *mut IsoSpectrumTable,
) -> IsoStatus {
    guard(|| {
        let slot = out(out_table, "out_table")?;
        *slot = ptr::null_mut();
        emit(slot, oscillator_spectrum(d, lambda_max)?);
        Ok(())
    })
}

/// Spectrum of `H0 + a sqrt(H0)`.
///
/// # Safety
/// `out_table` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_sqrt(
    d: usize,
    a: f64,
    lambda_max: f64,
    out_table: *mut *mut IsoSpectrumTable,
) -> IsoStatus {
    guard(|| {
        let slot = out(out_table, "out_table")?;
        *slot = ptr::null_mut();
        emit(slot, sqrt_oscillator_spectrum_scaled(d, a, lambda_max)?);
        Ok(())
    })
}

/// Spectrum of the diagonal model with coefficients `c[0..d]`.
///
/// # Safety
/// `c` must point to `d` doubles and `out_table` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_diagonal(
    c: *const f64,
    d: usize,
    lambda_max: f64,
    out_table: *mut *mut IsoSpectrumTable,
) -> IsoStatus {
    guard(|| {
        let slot = out(out_table, "out_table")?;
        *slot = ptr::null_mut();
        let c = slice(c, d, "c")?;
        emit(slot, diagonal_model_spectrum(c, lambda_max)?);
        Ok(())
    })
}

/// # Safety
/// `table` must come from an `iso_spectrum_*` constructor and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_free(table: *mut IsoSpectrumTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of distinct eigenvalues.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_len(t: *const IsoSpectrumTable, out_len: *mut usize) -> IsoStatus {
    guard(|| {
        *out(out_len, "out_len")? = table(t)?.len();
        Ok(())
    })
}

/// Eigenvalue and multiplicity at `index` (ascending order).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_get(
    t: *const IsoSpectrumTable,
    index: usize,
    out_eigenvalue: *mut f64,
    out_multiplicity: *mut u64,
) -> IsoStatus {
    guard(|| {
        let t = table(t)?;
        if index >= t.len() {
            return Err(invalid(format!("index {index} out of range (len {})", t.len())));
        }
        *out(out_eigenvalue, "out_eigenvalue")? = t.eigenvalues()[index];
        *out(out_multiplicity, "out_multiplicity")? = t.multiplicities()[index];
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_spectrum_lambda_trust(t: *const IsoSpectrumTable, out_trust: *mut f64) -> IsoStatus {
    guard(|| {
        *out(out_trust, "out_trust")? = table(t)?.lambda_trust();
        Ok(())
    })
}

/// Eigenvalues `<= lambda` counted with multiplicity.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_counting(t: *const IsoSpectrumTable, lambda: f64, out_count: *mut u64) -> IsoStatus {
    guard(|| {
        *out(out_count, "out_count")? = counting(table(t)?, lambda)?;
        Ok(())
    })
}

/// Counting function smoothed by a Gaussian of time width `sigma_t`, on `len` grid points.
///
/// # Safety
/// `grid` and `out_values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iso_mollified_counting(
    t: *const IsoSpectrumTable,
    sigma_t: f64,
    grid: *const f64,
    len: usize,
    out_values: *mut f64,
) -> IsoStatus {
    guard(|| {
        let t = table(t)?;
        let grid = slice(grid, len, "grid")?;
        let dst = slice_mut(out_values, len, "out_values")?;
        let v = mollified_counting(t, &WindowSpec::gaussian(sigma_t, 0.0), grid)?;
        dst.copy_from_slice(&v);
        Ok(())
    })
}

/// Windowed trace near `2 pi n` with a Gaussian of width `sigma_t` centred there.
///
/// # Safety
/// `grid`, `out_re` and `out_im` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iso_trace_transform(
    t: *const IsoSpectrumTable,
    n: i64,
    sigma_t: f64,
    grid: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> IsoStatus {
    guard(|| {
        let t = table(t)?;
        let grid = slice(grid, len, "grid")?;
        let re = slice_mut(out_re, len, "out_re")?;
        let im = slice_mut(out_im, len, "out_im")?;
        let w = WindowSpec::gaussian(sigma_t, 2.0 * std::f64::consts::PI * n as f64);
        let tt = trace_transform(t, n, &w, grid)?;
        for (k, z) in tt.values.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// `binomial(d + j - 1, j)`.
///
/// # Safety
/// `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_multiplicity(j: i64, d: i64, out_value: *mut u64) -> IsoStatus {
    guard(|| {
        *out(out_value, "out_value")? = multiplicity(j, d)?;
        Ok(())
    })
}

/// Kernel of `e^{-i t H0}` at `x, y` in dimension `d`.
///
/// # Safety
/// `x` and `y` must point to `d` doubles; the outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_mehler_kernel(
    t: f64,
    x: *const f64,
    y: *const f64,
    d: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> IsoStatus {
    guard(|| {
        let x = slice(x, d, "x")?;
        let y = slice(y, d, "y")?;
        let k = mehler_kernel(t, x, y)?;
        *out(out_re, "out_re")? = k.re;
        *out(out_im, "out_im")? = k.im;
        Ok(())
    })
}
