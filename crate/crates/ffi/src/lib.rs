//! C ABI over `biflip`.
//!
//! Models live behind an opaque [`BiflipModel`] handle. Every fallible call
//! returns a [`BiflipStatus`]; on failure the message is available from
//! [`biflip_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use biflip::flip::{solve_flip_locus, FlipKind, FlipSide};
use biflip::normalform::{analyze_point, normalize_model, nu_derivatives, BConvention, DoubleFlipVerdict, FdOptions};
use biflip::{DomainWindow, Error, Model, ModelId, ModelParams, NuSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiflipStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Domain = 3,
    DegenerateInput = 4,
    Normalization = 5,
    Precondition = 6,
    Parse = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiflipModelKind {
    NormalForm = 0,
    Oscillator12 = 1,
    Oscillator12Cubic = 2,
    Hirzebruch = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiflipFlipKind {
    Flip = 0,
    DualFlip = 1,
    Undetermined = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiflipFlipSide {
    Minus = 0,
    Plus = 1,
    Double = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiflipVerdict {
    Affirmed = 0,
    Degenerate = 1,
    NotAffirmed = 2,
}

/// `ν(j, t) = c_jj j² + c_j j + c_t t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiflipNuSpec {
    pub c_jj: f64,
    pub c_j: f64,
    pub c_t: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiflipParams {
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub nu1: BiflipNuSpec,
    pub nu2: BiflipNuSpec,
    pub branch_sign: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiflipCoefficients {
    pub a: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub u3_coeff: f64,
    pub b_sextic: f64,
    pub b_u3: f64,
    pub residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiflipDerivatives {
    pub nu1: f64,
    pub nu2: f64,
    pub d_nu1_dj: f64,
    pub d2_nu1_dj2: f64,
    pub d_nu1_dt: f64,
    pub d_nu2_dj: f64,
    pub step_j: f64,
    pub step_t: f64,
}

/// Point analysis with the sextic `b`; `concavity_ratio` is NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiflipAnalysis {
    pub coefficients: BiflipCoefficients,
    pub derivatives: BiflipDerivatives,
    pub saddle_node_passed: bool,
    pub concavity_ratio: f64,
    pub verdict: BiflipVerdict,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiflipFlipEvent {
    pub j0: f64,
    pub t: f64,
    pub a: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub side: BiflipFlipSide,
    pub kind: BiflipFlipKind,
}

/// Opaque model handle.
pub struct BiflipModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(e: &Error) -> BiflipStatus {
    match e {
        Error::Usage(_) => BiflipStatus::Usage,
        Error::Domain(_) => BiflipStatus::Domain,
        Error::DegenerateInput(_) => BiflipStatus::DegenerateInput,
        Error::NormalizationFailure { .. } => BiflipStatus::Normalization,
        Error::Precondition(_) => BiflipStatus::Precondition,
        Error::Parse(_) => BiflipStatus::Parse,
        Error::Io(_) => BiflipStatus::Io,
    }
}

/// Clear the error slot, run `body`, and turn errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (BiflipStatus, String)>) -> BiflipStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BiflipStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BiflipStatus::Panic
        }
    }
}

fn lib<T>(r: biflip::Result<T>) -> Result<T, (BiflipStatus, String)> {
    r.map_err(|e| (status_of(&e), format!("error[{}]: {e}", e.code())))
}

fn null(what: &str) -> (BiflipStatus, String) {
    (BiflipStatus::NullPointer, format!("{what} is null"))
}

fn model_ref<'a>(model: *const BiflipModel) -> Result<&'a Model, (BiflipStatus, String)> {
    // SAFETY: non-null handles come from biflip_model_new and are live until freed.
    unsafe { model.as_ref() }.map(|m| &m.inner).ok_or_else(|| null("model"))
}

fn to_params(p: &BiflipParams) -> ModelParams {
    let nu = |s: BiflipNuSpec| NuSpec::new(s.c_jj, s.c_j, s.c_t);
    ModelParams {
        epsilon: p.epsilon,
        a: p.a,
        b: p.b,
        nu1: nu(p.nu1),
        nu2: nu(p.nu2),
        branch_sign: p.branch_sign,
    }
}

fn coefficients(c: &biflip::normalform::NormalFormCoefficients) -> BiflipCoefficients {
    BiflipCoefficients {
        a: c.a,
        nu1: c.nu1,
        nu2: c.nu2,
        u3_coeff: c.u3_coeff,
        b_sextic: c.b_sextic,
        b_u3: c.b_u3,
        residual: c.residual,
    }
}

fn derivatives(d: &biflip::normalform::NuDerivatives) -> BiflipDerivatives {
    BiflipDerivatives {
        nu1: d.nu1,
        nu2: d.nu2,
        d_nu1_dj: d.d_nu1_dj,
        d2_nu1_dj2: d.d2_nu1_dj2,
        d_nu1_dt: d.d_nu1_dt,
        d_nu2_dj: d.d_nu2_dj,
        step_j: d.step_j,
        step_t: d.step_t,
    }
}

fn fd_options(step: f64, degree_cap: u32) -> FdOptions {
    let step = (step > 0.0).then_some(step);
    FdOptions {
        step_j: step,
        step_t: step,
        richardson: false,
        degree_cap: degree_cap as usize,
    }
}

/// Library defaults: ε = 1/8, a = b = 1, ν₁ = j² − t, ν₂ = 3j − t.
#[no_mangle]
pub extern "C" fn biflip_default_params() -> BiflipParams {
    let p = ModelParams::default();
    let nu = |s: NuSpec| BiflipNuSpec { c_jj: s.c_jj, c_j: s.c_j, c_t: s.c_t };
    BiflipParams {
        epsilon: p.epsilon,
        a: p.a,
        b: p.b,
        nu1: nu(p.nu1),
        nu2: nu(p.nu2),
        branch_sign: p.branch_sign,
    }
}

/// Create a model; `kind` is a [`BiflipModelKind`] value. Free with [`biflip_model_free`].
///
/// # Safety
/// `params` must be null or point to a valid `BiflipParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_model_new(kind: i32, params: *const BiflipParams, out: *mut *mut BiflipModel) -> BiflipStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let id = match kind {
            0 => ModelId::NormalForm,
            1 => ModelId::Oscillator12,
            2 => ModelId::Oscillator12Cubic,
            3 => ModelId::Hirzebruch,
            k => return Err((BiflipStatus::Usage, format!("error[usage]: unknown model kind {k}"))),
        };
        let params = match unsafe { params.as_ref() } {
            Some(p) => to_params(p),
            None => ModelParams::default(),
        };
        let model = lib(Model::new(id, params))?;
        *out = Box::into_raw(Box::new(BiflipModel { inner: model }));
        Ok(())
    })
}

/// Create a model by CLI name (`normal-form`, `osc12`, `osc12-cubic`, `hirzebruch`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `params` null or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_model_from_name(
    name: *const c_char,
    params: *const BiflipParams,
    out: *mut *mut BiflipModel,
) -> BiflipStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let text = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| (BiflipStatus::Parse, "error[parse]: model name is not UTF-8".to_string()))?;
        let id = lib(text.parse::<ModelId>())?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let params = match unsafe { params.as_ref() } {
            Some(p) => to_params(p),
            None => ModelParams::default(),
        };
        let model = lib(Model::new(id, params))?;
        *out = Box::into_raw(Box::new(BiflipModel { inner: model }));
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn biflip_model_free(model: *mut BiflipModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `j0` and `t0` writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_model_candidate(model: *const BiflipModel, j0: *mut f64, t0: *mut f64) -> BiflipStatus {
    guard(|| {
        let m = model_ref(model)?;
        let (j, t) = m.candidate();
        let (jo, to) = unsafe { (j0.as_mut(), t0.as_mut()) };
        *jo.ok_or_else(|| null("j0"))? = j;
        *to.ok_or_else(|| null("t0"))? = t;
        Ok(())
    })
}

/// Normal-form coefficients of the reduced Hamiltonian at `(j, t)`.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_normalize(
    model: *const BiflipModel,
    j: f64,
    t: f64,
    degree_cap: u32,
    out: *mut BiflipCoefficients,
) -> BiflipStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = coefficients(&lib(normalize_model(m, j, t, degree_cap as usize))?);
        Ok(())
    })
}

/// Finite-difference derivatives of `ν₁`, `ν₂`; `step <= 0` picks the default steps.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_nu_derivatives(
    model: *const BiflipModel,
    j: f64,
    t: f64,
    step: f64,
    degree_cap: u32,
    out: *mut BiflipDerivatives,
) -> BiflipStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = derivatives(&lib(nu_derivatives(m, j, t, &fd_options(step, degree_cap)))?);
        Ok(())
    })
}

/// Normal form, derivatives, saddle-node test, concavity and verdict at `(j, t)`.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_analyze_point(
    model: *const BiflipModel,
    j: f64,
    t: f64,
    step: f64,
    degree_cap: u32,
    out: *mut BiflipAnalysis,
) -> BiflipStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let p = lib(analyze_point(m, j, t, &fd_options(step, degree_cap), BConvention::Sextic))?;
        *out = BiflipAnalysis {
            coefficients: coefficients(&p.coefficients),
            derivatives: derivatives(&p.derivatives),
            saddle_node_passed: p.saddle_node.passed,
            concavity_ratio: p.concavity.map_or(f64::NAN, |c| c.ratio),
            verdict: match p.verdict {
                DoubleFlipVerdict::Affirmed => BiflipVerdict::Affirmed,
                DoubleFlipVerdict::Degenerate => BiflipVerdict::Degenerate,
                DoubleFlipVerdict::NotAffirmed => BiflipVerdict::NotAffirmed,
            },
        };
        Ok(())
    })
}

/// Flip events at fixed `t` for `j` in `[j_min, j_max]`.
///
/// `*count` receives the number of events. If it exceeds `capacity` nothing
/// is copied and the call returns `BufferTooSmall`; `events` may be null
/// when `capacity` is 0.
///
/// # Safety
/// `model` must be a live handle; `events` must hold `capacity` elements; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn biflip_flip_locus(
    model: *const BiflipModel,
    t: f64,
    j_min: f64,
    j_max: f64,
    degree_cap: u32,
    events: *mut BiflipFlipEvent,
    capacity: usize,
    count: *mut usize,
) -> BiflipStatus {
    guard(|| {
        let m = model_ref(model)?;
        let count = unsafe { count.as_mut() }.ok_or_else(|| null("count"))?;
        *count = 0;
        let window = lib(DomainWindow::new(j_min, j_max))?;
        let found = lib(solve_flip_locus(m, t, &window, degree_cap as usize))?;
        *count = found.len();
        if found.len() > capacity {
            return Err((
                BiflipStatus::BufferTooSmall,
                format!("need room for {} events, got {capacity}", found.len()),
            ));
        }
        if found.is_empty() {
            return Ok(());
        }
        if events.is_null() {
            return Err(null("events"));
        }
        // SAFETY: the caller guarantees `capacity` writable elements.
        let slots = unsafe { std::slice::from_raw_parts_mut(events, capacity) };
        for (slot, e) in slots.iter_mut().zip(&found) {
            *slot = BiflipFlipEvent {
                j0: e.j0,
                t: e.t,
                a: e.a,
                nu1: e.nu1_at,
                nu2: e.nu2_at,
                side: match e.side {
                    FlipSide::Minus => BiflipFlipSide::Minus,
                    FlipSide::Plus => BiflipFlipSide::Plus,
                    FlipSide::Double => BiflipFlipSide::Double,
                },
                kind: match e.kind {
                    FlipKind::Flip => BiflipFlipKind::Flip,
                    FlipKind::DualFlip => BiflipFlipKind::DualFlip,
                    FlipKind::Undetermined => BiflipFlipKind::Undetermined,
                },
            };
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn biflip_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a `BiflipStatus` value; `unknown` for anything else.
#[no_mangle]
pub extern "C" fn biflip_status_name(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null-pointer",
        2 => c"usage",
        3 => c"domain",
        4 => c"degenerate-input",
        5 => c"normalization",
        6 => c"precondition",
        7 => c"parse",
        8 => c"io",
        9 => c"buffer-too-small",
        10 => c"panic",
        _ => c"unknown",
    };
    s.as_ptr()
}
