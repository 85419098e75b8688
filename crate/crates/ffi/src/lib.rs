//! C ABI for `numline`.
//!
//! Every fallible function returns a [`NumlineStatus`] and writes its result
//! through an out-pointer. On failure, [`numline_last_error`] returns a
//! message for the calling thread. Strings returned by the library are
//! released with [`numline_string_free`]; handles with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use numline::binning::{fit_freq_bins, FreqBins};
use numline::dexp::{dexp_nll, dexp_predict, DExpParams};
use numline::metrics::{e_acc, log_mae, wilson_halfwidth};
use numline::notation::{parse_token_slice, render, NotationScheme};
use numline::{decompose, recompose, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumlineStatus {
    Ok = 0,
    NullPointer = 1,
    OutOfRange = 2,
    Overflow = 3,
    InvalidParam = 4,
    InvalidInput = 5,
    EmptyInput = 6,
    IndexOutOfRange = 7,
    LengthMismatch = 8,
    ShapeMismatch = 9,
    InvalidUtf8 = 10,
    Json = 11,
    Internal = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumlineScheme {
    Digits = 0,
    Scientific = 1,
    Numbert = 2,
    NumbertLeadSplit = 3,
    Subword = 4,
}

/// Schemes travel as plain integers so that out-of-range codes from C are
/// rejected instead of being undefined behaviour.
fn scheme_of(code: u32) -> Result<NotationScheme, Failure> {
    Ok(match code {
        c if c == NumlineScheme::Digits as u32 => NotationScheme::digits(),
        c if c == NumlineScheme::Scientific as u32 => NotationScheme::scientific(),
        c if c == NumlineScheme::Numbert as u32 => NotationScheme::numbert(),
        c if c == NumlineScheme::NumbertLeadSplit as u32 => NotationScheme::numbert_lead_split(),
        c if c == NumlineScheme::Subword as u32 => NotationScheme::decimal(),
        other => return Err(Failure(NumlineStatus::InvalidParam, format!("unknown scheme code {other}"))),
    })
}

/// Opaque DExp parameter set.
pub struct NumlineDExp {
    params: DExpParams,
}

/// Opaque equal-frequency binning.
pub struct NumlineFreqBins {
    bins: FreqBins,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(NumlineStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::OutOfRange(_) => NumlineStatus::OutOfRange,
            Error::Overflow { .. } => NumlineStatus::Overflow,
            Error::InvalidParam(_) => NumlineStatus::InvalidParam,
            Error::EmptyInput => NumlineStatus::EmptyInput,
            Error::IndexOutOfRange { .. } => NumlineStatus::IndexOutOfRange,
            Error::LengthMismatch { .. } => NumlineStatus::LengthMismatch,
            Error::ShapeMismatch(_) => NumlineStatus::ShapeMismatch,
            Error::Json(_) => NumlineStatus::Json,
            _ => NumlineStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(NumlineStatus::Json, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

/// Runs `f`, records any failure and converts panics to `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NumlineStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            NumlineStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            NumlineStatus::Internal
        }
    }
}

fn null() -> Failure {
    Failure(NumlineStatus::NullPointer, "null pointer argument".into())
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(null)
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(NumlineStatus::InvalidUtf8, e.to_string()))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("library strings contain no NUL").into_raw()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn numline_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn numline_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_decompose(value: f64, exponent: *mut u32, mantissa: *mut f64) -> NumlineStatus {
    guard(|| {
        let (e, m) = (out(exponent)?, out(mantissa)?);
        let p = decompose(value)?;
        *e = p.exponent;
        *m = p.mantissa;
        Ok(())
    })
}

/// # Safety
/// `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_recompose(exponent: u32, mantissa: f64, value: *mut f64) -> NumlineStatus {
    guard(|| {
        *out(value)? = recompose(exponent, mantissa)?;
        Ok(())
    })
}

/// # Safety
/// `hit` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_e_acc(pred: f64, truth: f64, hit: *mut bool) -> NumlineStatus {
    guard(|| {
        *out(hit)? = e_acc(pred, truth)?;
        Ok(())
    })
}

/// # Safety
/// `preds` and `truths` must point to `n` values; `result` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_log_mae(
    preds: *const f64,
    truths: *const f64,
    n: usize,
    result: *mut f64,
) -> NumlineStatus {
    guard(|| {
        let r = out(result)?;
        *r = log_mae(slice(preds, n)?, slice(truths, n)?)?;
        Ok(())
    })
}

/// # Safety
/// `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_wilson_halfwidth(a: f64, n: usize, z: f64, result: *mut f64) -> NumlineStatus {
    guard(|| {
        *out(result)? = wilson_halfwidth(a, n, z)?;
        Ok(())
    })
}

/// Renders `value` under the [`NumlineScheme`] code `scheme` as space-separated tokens, padding
/// included. Free the result with [`numline_string_free`].
///
/// # Safety
/// `tokens` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_render(value: f64, scheme: u32, tokens: *mut *mut c_char) -> NumlineStatus {
    guard(|| {
        let o = out(tokens)?;
        let t = render(&decompose(value)?, &scheme_of(scheme)?)?;
        *o = to_c_string(t.tokens.join(" "));
        Ok(())
    })
}

/// Parses space-separated tokens. Missing trailing padding is filled in.
/// Sequences that are not a canonical rendering yield `InvalidInput`.
///
/// # Safety
/// `tokens` must be a NUL-terminated string; `value` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn numline_parse(tokens: *const c_char, scheme: u32, value: *mut f64) -> NumlineStatus {
    guard(|| {
        let v = out(value)?;
        let scheme = scheme_of(scheme)?;
        let mut toks: Vec<String> = text(tokens)?.split_whitespace().map(String::from).collect();
        if toks.len() < scheme.pad_len {
            toks.resize(scheme.pad_len, scheme.pad_token.clone());
        }
        let p = parse_token_slice(&toks, &scheme)
            .ok_or_else(|| Failure(NumlineStatus::InvalidInput, "not a valid rendering".into()))?;
        *v = p.value;
        Ok(())
    })
}

/// Builds a DExp head from 17 logits, 17 log-space means and `log_sigma`.
///
/// # Safety
/// `logits` and `mu` must point to `n` values; `handle` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn numline_dexp_new(
    logits: *const f64,
    mu: *const f64,
    n: usize,
    log_sigma: f64,
    handle: *mut *mut NumlineDExp,
) -> NumlineStatus {
    guard(|| {
        let h = out(handle)?;
        let params = DExpParams::new(slice(logits, n)?.to_vec(), slice(mu, n)?.to_vec(), log_sigma)?;
        *h = Box::into_raw(Box::new(NumlineDExp { params }));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `handle` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn numline_dexp_from_json(json: *const c_char, handle: *mut *mut NumlineDExp) -> NumlineStatus {
    guard(|| {
        let h = out(handle)?;
        let params: DExpParams = serde_json::from_str(text(json)?)?;
        params.validate()?;
        *h = Box::into_raw(Box::new(NumlineDExp { params }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be live; `json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_dexp_to_json(handle: *const NumlineDExp, json: *mut *mut c_char) -> NumlineStatus {
    guard(|| {
        let (h, o) = (handle.as_ref().ok_or_else(null)?, out(json)?);
        *o = to_c_string(serde_json::to_string(&h.params)?);
        Ok(())
    })
}

/// # Safety
/// `handle` must be live; `nll` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_dexp_nll(handle: *const NumlineDExp, value: f64, nll: *mut f64) -> NumlineStatus {
    guard(|| {
        let (h, o) = (handle.as_ref().ok_or_else(null)?, out(nll)?);
        *o = dexp_nll(&h.params, value)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must be live; `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_dexp_predict(handle: *const NumlineDExp, value: *mut f64) -> NumlineStatus {
    guard(|| {
        let (h, o) = (handle.as_ref().ok_or_else(null)?, out(value)?);
        *o = dexp_predict(&h.params)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn numline_dexp_free(handle: *mut NumlineDExp) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `values` must point to `n` values; `handle` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_freq_bins_fit(
    values: *const f64,
    n: usize,
    n_bins: usize,
    handle: *mut *mut NumlineFreqBins,
) -> NumlineStatus {
    guard(|| {
        let h = out(handle)?;
        let bins = fit_freq_bins(slice(values, n)?, n_bins)?;
        *h = Box::into_raw(Box::new(NumlineFreqBins { bins }));
        Ok(())
    })
}

/// The shipped 21-edge FinNews bins.
///
/// # Safety
/// `handle` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_freq_bins_finnews(handle: *mut *mut NumlineFreqBins) -> NumlineStatus {
    guard(|| {
        *out(handle)? = Box::into_raw(Box::new(NumlineFreqBins { bins: FreqBins::finnews() }));
        Ok(())
    })
}

/// Number of bins; 0 for a null handle.
///
/// # Safety
/// `handle` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn numline_freq_bins_len(handle: *const NumlineFreqBins) -> usize {
    handle.as_ref().map_or(0, |h| h.bins.n_bins())
}

/// # Safety
/// `handle` must be live; `bin` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_freq_bins_bin_of(
    handle: *const NumlineFreqBins,
    value: f64,
    bin: *mut usize,
) -> NumlineStatus {
    guard(|| {
        let (h, o) = (handle.as_ref().ok_or_else(null)?, out(bin)?);
        *o = h.bins.bin_of(value)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must be live; `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn numline_freq_bins_representative(
    handle: *const NumlineFreqBins,
    bin: usize,
    value: *mut f64,
) -> NumlineStatus {
    guard(|| {
        let (h, o) = (handle.as_ref().ok_or_else(null)?, out(value)?);
        *o = h.bins.representative(bin)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn numline_freq_bins_free(handle: *mut NumlineFreqBins) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

