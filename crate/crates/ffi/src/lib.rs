//! C ABI for `nhse-circuit`.
//!
//! Netlists and spectra cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function. Every fallible call
//! returns an [`NhseStatus`]; on failure [`nhse_last_error_message`] holds
//! a description for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nhse_circuit::analytic::{skin_factor, LatticeSpec};
use nhse_circuit::eigen::{eig, SolverConfig, Spectrum};
use nhse_circuit::laplacian::{assemble, assemble_shifted, FrequencySpec};
use nhse_circuit::netlist::{build_chain, parse_netlist, ChainParams, Netlist};
use nhse_circuit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    NumericalError = 4,
    IoError = 5,
    Panic = 6,
}

/// Opaque netlist handle.
pub struct NhseNetlist(Netlist);

/// Opaque spectrum handle; eigenvectors are max-abs normalized.
pub struct NhseSpectrum(Spectrum);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> NhseStatus {
    match e {
        Error::Parse { .. } => NhseStatus::ParseError,
        Error::Io(_) => NhseStatus::IoError,
        Error::Singular { .. }
        | Error::NoConvergence { .. }
        | Error::NonFinite
        | Error::ZeroVector
        | Error::Calibration(_) => NhseStatus::NumericalError,
        _ => NhseStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NhseStatus, String)>) -> NhseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NhseStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NhseStatus::Panic
        }
    }
}

fn fail(e: Error) -> (NhseStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NhseStatus, String) {
    (NhseStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn nhse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nhse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses netlist text (NUL-terminated UTF-8).
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nhse_netlist_parse(
    text: *const c_char,
    out: *mut *mut NhseNetlist,
) -> NhseStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| (NhseStatus::InvalidArgument, "text is not UTF-8".to_string()))?;
        let net = parse_netlist(s).map_err(fail)?;
        *out = Box::into_raw(Box::new(NhseNetlist(net)));
        Ok(())
    })
}

/// Builds the unidirectional chain netlist from its six parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nhse_chain_build(
    n: usize,
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    l: f64,
    out: *mut *mut NhseNetlist,
) -> NhseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = build_chain(&ChainParams {
            n,
            c0,
            c1,
            c2,
            c3,
            l,
        })
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(NhseNetlist(net)));
        Ok(())
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nhse_netlist_num_nodes(net: *const NhseNetlist) -> usize {
    net.as_ref().map_or(0, |n| n.0.num_nodes())
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nhse_netlist_free(net: *mut NhseNetlist) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Eigen-decomposition of `J` (or of the shifted `J~` when `shifted` is
/// nonzero; chain netlists only) at `freq_hz`.
///
/// # Safety
/// `net` must be a handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nhse_spectrum_compute(
    net: *const NhseNetlist,
    freq_hz: f64,
    shifted: bool,
    out: *mut *mut NhseSpectrum,
) -> NhseStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = FrequencySpec::from_hz(freq_hz).map_err(fail)?;
        let j = if shifted {
            assemble_shifted(&net.0, &f).map_err(fail)?
        } else {
            assemble(&net.0, &f)
        };
        let s = eig(&j.entries, &SolverConfig::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(NhseSpectrum(s)));
        Ok(())
    })
}

/// Number of eigenvalues, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nhse_spectrum_len(s: *const NhseSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Eigenvalue `k` (0-based) in siemens.
///
/// # Safety
/// `s` must be a handle from this library; `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nhse_spectrum_eigenvalue(
    s: *const NhseSpectrum,
    k: usize,
    re: *mut f64,
    im: *mut f64,
) -> NhseStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        let z = *s.0.eigenvalues.get(k).ok_or_else(|| {
            (
                NhseStatus::InvalidArgument,
                format!("index {k} out of range for {} eigenvalues", s.0.len()),
            )
        })?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Copies eigenvector `k` into `re[0..len]`, `im[0..len]`; `len` must equal
/// the spectrum length.
///
/// # Safety
/// `s` must be a handle from this library; `re` and `im` must point to at
/// least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nhse_spectrum_eigenvector(
    s: *const NhseSpectrum,
    k: usize,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> NhseStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        if k >= s.0.len() || len != s.0.len() {
            return Err((
                NhseStatus::InvalidArgument,
                format!(
                    "index {k} / length {len} do not fit a spectrum of {}",
                    s.0.len()
                ),
            ));
        }
        for (i, z) in s.0.eigenvector(k).iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nhse_spectrum_free(s: *mut NhseSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Closed-form skin factor `|delta_t|^(1/N)` of the hopping chain.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nhse_skin_factor(n: usize, delta_t: f64, out: *mut f64) -> NhseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = LatticeSpec::real(n, 1.0, delta_t).map_err(fail)?;
        *out = skin_factor(&spec);
        Ok(())
    })
}
