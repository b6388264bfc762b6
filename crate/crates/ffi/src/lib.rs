//! C ABI for the lrdwave toolkit.
//!
//! Handles are opaque pointers created and destroyed through this interface;
//! every fallible call returns an [`LrdStatus`] and writes its result through
//! out-pointers. The last error message of the calling thread is available
//! via [`lrd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lrdwave::filters::{Family, FilterBank};
use lrdwave::hermite::Filter;
use lrdwave::limit::{limit_var, ss_exponent, LimitSpec};
use lrdwave::mc;
use lrdwave::spectra::{critical_order, memory_param, MemoryModel};
use lrdwave::synth::{integrate_k, CirculantEmbedding};
use lrdwave::transform::coeffs_from_stationary;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericError = 3,
    Utf8Error = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> LrdStatus>(f: F) -> LrdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            LrdStatus::Panic
        }
    }
}

fn fail(err: impl std::fmt::Display, status: LrdStatus) -> LrdStatus {
    set_error(&err.to_string());
    status
}

/// Message describing the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lrd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opaque spectral model handle.
pub struct LrdModel {
    inner: MemoryModel,
}

/// Opaque filter bank handle.
pub struct LrdBank {
    inner: FilterBank,
}

/// Create a FARIMA(0,d,0)-type model normalized to unit variance.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be released with
/// [`lrd_model_free`].
#[no_mangle]
pub unsafe extern "C" fn lrd_model_farima(d: f64, out: *mut *mut LrdModel) -> LrdStatus {
    guard(|| {
        if out.is_null() {
            return fail("out pointer is null", LrdStatus::NullPointer);
        }
        match MemoryModel::farima(d) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(LrdModel { inner: model })) };
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::InvalidArgument),
        }
    })
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn lrd_model_free(model: *mut LrdModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Build a built-in filter bank ("haar", "db2" or "db4") with `levels` scales
/// and difference order `k`.
///
/// # Safety
/// `family` must be a valid NUL-terminated string, `out` a valid pointer; the
/// handle must be released with [`lrd_bank_free`].
#[no_mangle]
pub unsafe extern "C" fn lrd_bank_builtin(
    family: *const c_char,
    levels: u32,
    k: u32,
    out: *mut *mut LrdBank,
) -> LrdStatus {
    guard(|| {
        if family.is_null() || out.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        let name = match unsafe { CStr::from_ptr(family) }.to_str() {
            Ok(s) => s,
            Err(e) => return fail(e, LrdStatus::Utf8Error),
        };
        let bank = Family::parse(name)
            .and_then(|f| FilterBank::builtin(f, levels))
            .and_then(|b| b.with_k(k));
        match bank {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(LrdBank { inner })) };
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::InvalidArgument),
        }
    })
}

/// Release a bank handle. Null is ignored.
///
/// # Safety
/// `bank` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn lrd_bank_free(bank: *mut LrdBank) {
    if !bank.is_null() {
        drop(unsafe { Box::from_raw(bank) });
    }
}

/// Exact synthesis of `n` samples of the stationary Gaussian sequence into
/// `out`; deterministic in (seed, replicate).
///
/// # Safety
/// `out` must point to at least `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lrd_synth_gaussian(
    model: *const LrdModel,
    n: usize,
    seed: u64,
    replicate: u64,
    out: *mut f64,
) -> LrdStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        let model = unsafe { &*model };
        match CirculantEmbedding::new(&model.inner, n) {
            Ok(emb) => {
                let x = emb.sample(seed, replicate);
                unsafe { std::ptr::copy_nonoverlapping(x.as_ptr(), out, n) };
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::NumericError),
        }
    })
}

/// K-fold cumulative summation in place.
///
/// # Safety
/// `data` must point to at least `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lrd_integrate_k(data: *mut f64, n: usize, k: u32) -> LrdStatus {
    guard(|| {
        if data.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        let slice = unsafe { std::slice::from_raw_parts_mut(data, n) };
        let integrated = integrate_k(slice, k);
        slice.copy_from_slice(&integrated);
        LrdStatus::Ok
    })
}

/// Critical chaos order q_c = max{q : q < 1/(1-2d)}.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrd_critical_order(d: f64, out: *mut u32) -> LrdStatus {
    guard(|| {
        if out.is_null() {
            return fail("out pointer is null", LrdStatus::NullPointer);
        }
        match critical_order(d) {
            Ok(qc) => {
                unsafe { *out = qc };
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::InvalidArgument),
        }
    })
}

/// Memory parameter d(q) = q d + (1-q)/2 of the q-th Hermite transform.
#[no_mangle]
pub extern "C" fn lrd_memory_param(d: f64, q: u32) -> f64 {
    memory_param(d, q)
}

/// Self-similarity exponent H = K + q d - q/2 of the limit process family.
#[no_mangle]
pub extern "C" fn lrd_ss_exponent(q: u32, d: f64, k: u32) -> f64 {
    ss_exponent(q, d, k)
}

/// Per-scale second moments of the wavelet coefficients of `series` for
/// j = j1..=j2 through the bank's h^{(K)} route. Writes j2-j1+1 variances and
/// interior-coefficient counts.
///
/// # Safety
/// `series` must hold `n` doubles; `out_var` and `out_count` must hold
/// j2-j1+1 entries each.
#[no_mangle]
pub unsafe extern "C" fn lrd_wavelet_variances(
    bank: *const LrdBank,
    series: *const f64,
    n: usize,
    j1: u32,
    j2: u32,
    out_var: *mut f64,
    out_count: *mut usize,
) -> LrdStatus {
    guard(|| {
        if bank.is_null() || series.is_null() || out_var.is_null() || out_count.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        if j2 < j1 {
            return fail("empty scale range", LrdStatus::InvalidArgument);
        }
        let bank = unsafe { &*bank };
        let series = unsafe { std::slice::from_raw_parts(series, n) };
        match coeffs_from_stationary(&bank.inner, series, (j1, j2)) {
            Ok(matrix) => {
                let len = (j2 - j1 + 1) as usize;
                let vars = unsafe { std::slice::from_raw_parts_mut(out_var, len) };
                let counts = unsafe { std::slice::from_raw_parts_mut(out_count, len) };
                for (i, j) in (j1..=j2).enumerate() {
                    match matrix.level(j) {
                        Some(lvl) => {
                            vars[i] = lvl.second_moment();
                            counts[i] = lvl.count();
                        }
                        None => {
                            vars[i] = f64::NAN;
                            counts[i] = 0;
                        }
                    }
                }
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::NumericError),
        }
    })
}

/// Estimate the memory exponent d(q0) + K from one series by the wavelet
/// log-variance regression over scales j1..=j2.
///
/// # Safety
/// `series` must hold `n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrd_estimate_memory(
    bank: *const LrdBank,
    series: *const f64,
    n: usize,
    j1: u32,
    j2: u32,
    out: *mut f64,
) -> LrdStatus {
    guard(|| {
        if bank.is_null() || series.is_null() || out.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        let bank = unsafe { &*bank };
        let series = unsafe { std::slice::from_raw_parts(series, n) };
        let result = coeffs_from_stationary(&bank.inner, series, (j1, j2))
            .and_then(|m| mc::estimate_memory(&[m], j1, j2, 0));
        match result {
            Ok(est) => {
                unsafe { *out = est.estimate };
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::NumericError),
        }
    })
}

/// Variance of the limit field Y_{m,0} for chaos order q, memory d and
/// difference order k, evaluated by the reduced one-dimensional quadrature.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrd_limit_variance(
    bank: *const LrdBank,
    q: u32,
    d: f64,
    k: u32,
    m: i32,
    out: *mut f64,
) -> LrdStatus {
    guard(|| {
        if bank.is_null() || out.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        let bank = unsafe { &*bank };
        let result = LimitSpec::new(q, d, k, &bank.inner).and_then(|spec| limit_var(&spec, m));
        match result {
            Ok(v) => {
                unsafe { *out = v.value };
                LrdStatus::Ok
            }
            Err(e) => fail(e, LrdStatus::NumericError),
        }
    })
}

/// Subordinate a series by a named filter: 0 identity, 1 cube, 2 centered-exp,
/// q >= 3 is reserved; negative values -q select the Hermite polynomial H_q.
///
/// # Safety
/// `data` must point to at least `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lrd_subordinate(data: *mut f64, n: usize, code: i32) -> LrdStatus {
    guard(|| {
        if data.is_null() {
            return fail("null pointer argument", LrdStatus::NullPointer);
        }
        let filter = match code {
            0 => Filter::Identity,
            1 => Filter::Cube,
            2 => Filter::CenteredExp,
            c if c < 0 => Filter::Hermite((-c) as usize),
            _ => return fail("unknown filter code", LrdStatus::InvalidArgument),
        };
        let slice = unsafe { std::slice::from_raw_parts_mut(data, n) };
        let mapped = filter.apply(slice);
        slice.copy_from_slice(&mapped);
        LrdStatus::Ok
    })
}
