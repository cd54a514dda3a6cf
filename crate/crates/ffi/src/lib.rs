//! C interface. Objects cross the boundary as opaque handles owned by the
//! caller and released with the matching `_free`; every fallible call
//! returns a status code and leaves a message for `cocycle_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cocycle_lab::connection::{build_glued, connection_size, GluedMap, Profile, Vector};
use cocycle_lab::generate::{generate, GeneratorKind, GeneratorSpec};
use cocycle_lab::linalg::Mat;
use cocycle_lab::spectral::spectrum_of;
use cocycle_lab::synthesis::{
    pipeline_small_angle, push_moduli_with, realify_with, small_angle_with, SynthesisBudget, SynthesisOutcome,
};
use cocycle_lab::{bound_of, dist_cocycle, Error, PeriodicCocycle};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocycleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    /// the library reported an error; see `cocycle_last_error`
    Domain = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocycleGenerator {
    Generic = 0,
    Saddle = 1,
    DetOne2d = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocycleStage {
    Realify = 0,
    PushModuli = 1,
    SmallAngle = 2,
    Pipeline = 3,
}

/// Opaque periodic cocycle.
pub struct Cocycle(PeriodicCocycle);
/// Opaque synthesis result.
pub struct CocycleOutcome(SynthesisOutcome);
/// Opaque glued map.
pub struct CocycleGlued(GluedMap);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: CocycleStatus, msg: &str) -> CocycleStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> CocycleStatus {
    let status = match e {
        Error::Parse(_) => CocycleStatus::Parse,
        Error::InvalidArgument(_) | Error::ShapeMismatch(_) | Error::InvalidMatrix(_) => CocycleStatus::InvalidArgument,
        _ => CocycleStatus::Domain,
    };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> CocycleStatus) -> CocycleStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CocycleStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(CocycleStatus::Panic, "internal panic"),
    }
}

fn boxed<T>(value: T, out: *mut *mut T) -> CocycleStatus {
    // SAFETY: caller checked `out` is non-null
    unsafe { *out = Box::into_raw(Box::new(value)) };
    CocycleStatus::Ok
}

fn string_out(s: String, out: *mut *mut c_char) -> CocycleStatus {
    match CString::new(s) {
        // SAFETY: caller checked `out` is non-null
        Ok(c) => unsafe {
            *out = c.into_raw();
            CocycleStatus::Ok
        },
        Err(_) => fail(CocycleStatus::Domain, "string contains a NUL byte"),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cocycle_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cocycle_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_matrices(dim: usize, count: usize, data: *const f64) -> Vec<Mat> {
    let all = std::slice::from_raw_parts(data, dim * dim * count);
    all.chunks(dim * dim).map(|c| Mat::from_row_slice(dim, dim, c)).collect()
}

/// Build from `period` row-major dim×dim matrices stored back to back.
///
/// # Safety
/// `data` must point to dim·dim·period doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_new(dim: usize, period: usize, data: *const f64, out: *mut *mut Cocycle) -> CocycleStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        if dim == 0 || period == 0 {
            return fail(CocycleStatus::InvalidArgument, "dimension and period must be positive");
        }
        match PeriodicCocycle::new(read_matrices(dim, period, data)) {
            Ok(c) => boxed(Cocycle(c), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_from_json(json: *const c_char, out: *mut *mut Cocycle) -> CocycleStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(CocycleStatus::Parse, "input is not UTF-8");
        };
        match PeriodicCocycle::from_json(text) {
            Ok(c) => boxed(Cocycle(c), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_to_json(c: *const Cocycle, out: *mut *mut c_char) -> CocycleStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        string_out((*c).0.to_json(), out)
    })
}

/// # Safety
/// `c` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cocycle_free(c: *mut Cocycle) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cocycle_dim(c: *const Cocycle) -> usize {
    c.as_ref().map_or(0, |c| c.0.dim())
}

/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cocycle_period(c: *const Cocycle) -> usize {
    c.as_ref().map_or(0, |c| c.0.period())
}

/// max over maps of ‖A‖ and ‖A⁻¹‖.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_bound(c: *const Cocycle, out: *mut f64) -> CocycleStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        *out = bound_of(&(*c).0);
        CocycleStatus::Ok
    })
}

/// # Safety
/// `a`, `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_distance(a: *const Cocycle, b: *const Cocycle, out: *mut f64) -> CocycleStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        match dist_cocycle(&(*a).0, &(*b).0) {
            Ok(d) => {
                *out = d;
                CocycleStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// First-return moduli in increasing order, written to `out[0..dim]`.
///
/// # Safety
/// `c` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cocycle_moduli(c: *const Cocycle, out: *mut f64, len: usize) -> CocycleStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        let c = &(*c).0;
        if len < c.dim() {
            return fail(CocycleStatus::BufferTooSmall, &format!("need {} entries", c.dim()));
        }
        match spectrum_of(c) {
            Ok(s) => {
                std::slice::from_raw_parts_mut(out, len)[..s.moduli.len()].copy_from_slice(&s.moduli);
                CocycleStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_generate(
    kind: CocycleGenerator,
    dim: usize,
    period: usize,
    bound: f64,
    seed: u64,
    out: *mut *mut Cocycle,
) -> CocycleStatus {
    guard(|| {
        if out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        let kind = match kind {
            CocycleGenerator::Generic => GeneratorKind::Generic,
            CocycleGenerator::Saddle => GeneratorKind::Saddle,
            CocycleGenerator::DetOne2d => GeneratorKind::DetOne2d,
        };
        match generate(&GeneratorSpec::new(kind, dim, period, bound, seed)) {
            Ok(c) => boxed(Cocycle(c), out),
            Err(e) => from_error(e),
        }
    })
}

/// Run one synthesis stage, or the whole pipeline.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_synthesize(
    c: *const Cocycle,
    stage: CocycleStage,
    epsilon: f64,
    n: usize,
    seed: u64,
    out: *mut *mut CocycleOutcome,
) -> CocycleStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        let c = &(*c).0;
        let budget = match SynthesisBudget::new(epsilon) {
            Ok(b) => b.with_n(n).with_seed(seed),
            Err(e) => return from_error(e),
        };
        let result = match stage {
            CocycleStage::Realify => realify_with(c, &budget),
            CocycleStage::PushModuli => push_moduli_with(c, &budget),
            CocycleStage::SmallAngle => small_angle_with(c, &budget),
            CocycleStage::Pipeline => pipeline_small_angle(c, &budget).map_err(|f| f.error.clone()),
        };
        match result {
            Ok(o) => boxed(CocycleOutcome(o), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `o` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cocycle_outcome_free(o: *mut CocycleOutcome) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// 1 when every certificate passed, 0 otherwise (or for null).
///
/// # Safety
/// `o` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cocycle_outcome_passed(o: *const CocycleOutcome) -> i32 {
    o.as_ref().map_or(0, |o| i32::from(o.0.passed()))
}

/// # Safety
/// `o` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cocycle_outcome_radius(o: *const CocycleOutcome) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.0.radius_report.radius)
}

/// # Safety
/// `o` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_outcome_end(o: *const CocycleOutcome, out: *mut *mut Cocycle) -> CocycleStatus {
    guard(|| {
        if o.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        match (*o).0.end() {
            Ok(c) => boxed(Cocycle(c), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `o` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_outcome_to_json(o: *const CocycleOutcome, out: *mut *mut c_char) -> CocycleStatus {
    guard(|| {
        if o.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        string_out((*o).0.to_json(), out)
    })
}

/// Glue row-major `outer` (far away) and `inner` (near the origin) with the
/// smooth plateau between radii `r_in` and `r_out`.
///
/// # Safety
/// `outer`, `inner` must hold dim·dim doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_glued_new(
    dim: usize,
    outer: *const f64,
    inner: *const f64,
    r_in: f64,
    r_out: f64,
    out: *mut *mut CocycleGlued,
) -> CocycleStatus {
    guard(|| {
        if outer.is_null() || inner.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        if dim == 0 {
            return fail(CocycleStatus::InvalidArgument, "dimension must be positive");
        }
        let a = read_matrices(dim, 1, outer).remove(0);
        let b = read_matrices(dim, 1, inner).remove(0);
        match build_glued(a, b, r_in, r_out, Profile::Plateau) {
            Ok(g) => boxed(CocycleGlued(g), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `g` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cocycle_glued_free(g: *mut CocycleGlued) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// y = C(x) for vectors of length dim.
///
/// # Safety
/// `g` must be a live handle; `x`, `y` must hold dim doubles.
#[no_mangle]
pub unsafe extern "C" fn cocycle_glued_apply(g: *const CocycleGlued, x: *const f64, y: *mut f64) -> CocycleStatus {
    guard(|| {
        if g.is_null() || x.is_null() || y.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        let g = &(*g).0;
        let d = g.dim();
        let v = g.apply(&Vector::from_column_slice(std::slice::from_raw_parts(x, d)));
        std::slice::from_raw_parts_mut(y, d).copy_from_slice(v.as_slice());
        CocycleStatus::Ok
    })
}

/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_glued_size(g: *const CocycleGlued, samples: usize, out: *mut f64) -> CocycleStatus {
    guard(|| {
        if g.is_null() || out.is_null() {
            return fail(CocycleStatus::NullPointer, "null pointer");
        }
        *out = connection_size(&(*g).0, samples).size;
        CocycleStatus::Ok
    })
}
