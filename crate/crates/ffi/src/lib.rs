//! C ABI over the `mrc` crate.
//!
//! Conventions: every fallible function returns an [`MrcStatus`] and writes
//! results through out-pointers; objects are opaque handles released with the
//! matching `_free` function; the message of the last error on the calling
//! thread is available from [`mrc_last_error_message`]. Indices are 0-based and
//! matrices row-major `d × d`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mrc::corematrix::{CorrelationMatrix, SymMatrix};
use mrc::mcengine::{simulate_paths, TimeGrid};
use mrc::momentoracle::{MomentTable, MonomialIndex};
use mrc::schemes::{RngStream, Stepper, Workspace};
use mrc::{MrcError, MrcParams, SchemeKind};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    IoError = 4,
    Panic = 5,
}

/// Values accepted by the `scheme` arguments.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MrcScheme {
    EulerCorrected = 0,
    SecondOrderDirect = 1,
}

/// Opaque MRC parameter set.
pub struct MrcModel {
    inner: MrcParams,
}

/// Opaque memoizing moment table. Not safe for concurrent use.
pub struct MrcMomentTable {
    inner: MomentTable,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &MrcError) -> MrcStatus {
    match e.exit_code() {
        2 => MrcStatus::InvalidArgument,
        4 => MrcStatus::IoError,
        _ => MrcStatus::DomainError,
    }
}

enum Fail {
    Null(&'static str),
    Mrc(MrcError),
}

impl From<MrcError> for Fail {
    fn from(e: MrcError) -> Self {
        Fail::Mrc(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> MrcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MrcStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MrcStatus::NullPointer
        }
        Ok(Err(Fail::Mrc(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MrcStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn model<'a>(p: *const MrcModel) -> Result<&'a MrcParams, Fail> {
    p.as_ref().map(|m| &m.inner).ok_or(Fail::Null("params"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    *out = v;
    Ok(())
}

unsafe fn monomial(s: *const c_char, d: usize) -> Result<MonomialIndex, Fail> {
    if s.is_null() {
        return Err(Fail::Null("monomial"));
    }
    let text = CStr::from_ptr(s)
        .to_str()
        .map_err(|_| MrcError::Usage("monomial is not UTF-8".into()))?;
    Ok(MonomialIndex::parse_with_dim(text, d)?)
}

fn scheme(code: c_int) -> Result<SchemeKind, Fail> {
    match code {
        0 => Ok(SchemeKind::EulerCorrected),
        1 => Ok(SchemeKind::SecondOrderDirect),
        _ => Err(MrcError::InvalidParameter(format!("unknown scheme code {code}")).into()),
    }
}

/// Builds parameters from `x`, `c` (`d × d`) and `kappa`, `a` (length `d`).
///
/// # Safety
/// Pointers must reference arrays of the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_params_new(
    d: usize,
    x: *const f64,
    kappa: *const f64,
    c: *const f64,
    a: *const f64,
    out: *mut *mut MrcModel,
) -> MrcStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let corr = |p, what| -> Result<CorrelationMatrix, Fail> {
            let m = SymMatrix::from_row_major(d, slice(p, d * d, what)?)?;
            Ok(CorrelationMatrix::try_from(m)?)
        };
        let params = MrcParams::new(
            corr(x, "x")?,
            slice(kappa, d, "kappa")?.to_vec(),
            corr(c, "c")?,
            slice(a, d, "a")?.to_vec(),
        )?;
        *out = Box::into_raw(Box::new(MrcModel { inner: params }));
        Ok(())
    })
}

/// Benchmark parameters: `κ = 1.25`, `c = I`, `a = 1`, off-diagonal `x = 0.7`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_params_reference(d: usize, out: *mut *mut MrcModel) -> MrcStatus {
    guard(|| {
        if d < 1 {
            return Err(MrcError::InvalidParameter("d must be positive".into()).into());
        }
        let m = Box::into_raw(Box::new(MrcModel { inner: MrcParams::reference(d) }));
        write(out, m, "out")
    })
}

/// # Safety
/// `p` must come from `mrc_params_new`/`mrc_params_reference` (or be null).
#[no_mangle]
pub unsafe extern "C" fn mrc_params_free(p: *mut MrcModel) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mrc_params_dim(p: *const MrcModel) -> usize {
    p.as_ref().map_or(0, |m| m.inner.dim())
}

/// `E[X_t^m]` for a monomial string such as `"1-2^2*2-3"` (1-based pairs).
///
/// # Safety
/// `p` live, `mono` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_moment(p: *const MrcModel, mono: *const c_char, t: f64, out: *mut f64) -> MrcStatus {
    guard(|| {
        let params = model(p)?;
        let m = monomial(mono, params.dim())?;
        let v = mrc::momentoracle::moment(params, &m)?.eval(t);
        write(out, v, "out")
    })
}

/// Ergodic moment `lim_{t→∞} E[X_t^m]`.
///
/// # Safety
/// As for `mrc_moment`.
#[no_mangle]
pub unsafe extern "C" fn mrc_ergodic_moment(p: *const MrcModel, mono: *const c_char, out: *mut f64) -> MrcStatus {
    guard(|| {
        let params = model(p)?;
        let m = monomial(mono, params.dim())?;
        write(out, mrc::momentoracle::ergodic_moment(params, &m)?, "out")
    })
}

/// # Safety
/// `p` live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_moment_table_new(p: *const MrcModel, out: *mut *mut MrcMomentTable) -> MrcStatus {
    guard(|| {
        let params = model(p)?.clone();
        let t = Box::into_raw(Box::new(MrcMomentTable { inner: MomentTable::new(params) }));
        write(out, t, "out")
    })
}

/// Memoized `E[X_t^m]`.
///
/// # Safety
/// `table` live and not used concurrently, `mono` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_moment_table_eval(
    table: *mut MrcMomentTable,
    mono: *const c_char,
    t: f64,
    out: *mut f64,
) -> MrcStatus {
    guard(|| {
        let table = table.as_mut().ok_or(Fail::Null("table"))?;
        let m = monomial(mono, table.inner.params().dim())?;
        let v = table.inner.moment(&m)?.eval(t);
        write(out, v, "out")
    })
}

/// # Safety
/// `t` must come from `mrc_moment_table_new` (or be null).
#[no_mangle]
pub unsafe extern "C" fn mrc_moment_table_free(t: *mut MrcMomentTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Closed-form correlation swap `E[(1/T) ∫ (C_t)_ij dt]`.
///
/// # Safety
/// `p` live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_corr_swap_closed(p: *const MrcModel, i: usize, j: usize, t: f64, out: *mut f64) -> MrcStatus {
    guard(|| {
        let v = mrc::finance::corr_swap_price_closed(model(p)?, i, j, t)?;
        write(out, v, "out")
    })
}

/// Monte Carlo estimate of `E[(X_T)_ij]` with its 95% half-width.
///
/// # Safety
/// `p` live, out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_simulate_pair_mean(
    p: *const MrcModel,
    scheme_code: c_int,
    i: usize,
    j: usize,
    horizon: f64,
    steps: usize,
    n_paths: u64,
    seed: u64,
    out_mean: *mut f64,
    out_ci: *mut f64,
) -> MrcStatus {
    guard(|| {
        let params = model(p)?;
        let d = params.dim();
        if i >= d || j >= d {
            return Err(MrcError::InvalidParameter(format!("pair ({i},{j}) out of range")).into());
        }
        let grid = TimeGrid::new(horizon, steps)?;
        let e = simulate_paths(params, scheme(scheme_code)?, grid, n_paths, seed, |x| x[i * d + j])?;
        write(out_mean, e.mean, "out_mean")?;
        write(out_ci, e.ci_half_width_95, "out_ci")
    })
}

/// One scheme step of size `h` applied in place to the row-major `state`, with
/// the random stream of path `index` under `seed`.
///
/// # Safety
/// `p` live, `state` holds `d × d` writable values.
#[no_mangle]
pub unsafe extern "C" fn mrc_step(
    p: *const MrcModel,
    scheme_code: c_int,
    h: f64,
    state: *mut f64,
    seed: u64,
    index: u64,
) -> MrcStatus {
    guard(|| {
        let params = model(p)?;
        let d = params.dim();
        if state.is_null() {
            return Err(Fail::Null("state"));
        }
        let x = std::slice::from_raw_parts_mut(state, d * d);
        CorrelationMatrix::try_from(SymMatrix::from_row_major(d, x)?)?;
        let stepper = Stepper::new(params, scheme(scheme_code)?, h)?;
        let mut rng = RngStream::for_path(seed, mrc::schemes::rng::LANE_TEST, index);
        stepper.step(x, &mut Workspace::new(d), &mut rng)?;
        Ok(())
    })
}

/// Black-Scholes implied volatility of a call price.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrc_implied_vol(price: f64, spot: f64, strike: f64, r: f64, t: f64, out: *mut f64) -> MrcStatus {
    guard(|| write(out, mrc::finance::implied_vol(price, spot, strike, r, t)?, "out"))
}

/// Copies the last error message of this thread (NUL-terminated, truncated to
/// `len`) into `buf` and returns its full length in bytes without the NUL.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must have room for `len` bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn mrc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mrc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
