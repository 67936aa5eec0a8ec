//! C interface to `defect_resonance`.
//!
//! Every entry point returns a [`DrStatus`]; on failure the message is kept
//! per thread and read back with [`dr_last_error_message`]. Potentials are
//! opaque handles created by [`dr_potential_from_json`] and released with
//! [`dr_potential_free`]. Variable-length results go into caller buffers:
//! the required length is always written to `*count`, and
//! `DR_STATUS_BUFFER_TOO_SMALL` is returned when it exceeds `capacity`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use defect_resonance::defect::{self, DefectMode, Normalization, Parity};
use defect_resonance::floquet::{self, IntervalKind, SpectralInterval};
use defect_resonance::ode::StateVector;
use defect_resonance::resonance::{self, SolverOptions, SqrtBranch};
use defect_resonance::{Error, Potential};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPotential = 3,
    TruncationInsideSupport = 4,
    InBand = 5,
    BranchCut = 6,
    NonConvergence = 7,
    SingularJacobian = 8,
    PreconditionViolated = 9,
    IntegrationFailure = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

impl From<&Error> for DrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidPotential(_) => DrStatus::InvalidPotential,
            Error::TruncationInsideSupport { .. } => DrStatus::TruncationInsideSupport,
            Error::InvalidArgument(_) | Error::ZeroEnergy | Error::InsufficientPoints { .. } => {
                DrStatus::InvalidArgument
            }
            Error::InBand { .. } => DrStatus::InBand,
            Error::BranchCut { .. } => DrStatus::BranchCut,
            Error::NonConvergence { .. } => DrStatus::NonConvergence,
            Error::SingularJacobian { .. } => DrStatus::SingularJacobian,
            Error::PreconditionViolated { .. } => DrStatus::PreconditionViolated,
            Error::StepSizeUnderflow { .. } | Error::TooManySteps { .. } | Error::NonFinite { .. } => {
                DrStatus::IntegrationFailure
            }
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for DrComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<DrComplex> for Complex64 {
    fn from(z: DrComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

const NAN_C: DrComplex = DrComplex {
    re: f64::NAN,
    im: f64::NAN,
};

/// Square-root branch of the outgoing condition.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrBranch {
    /// Principal root, for resonances near `E > 0`.
    Resonance = 0,
    /// `i sqrt(-z)`, for bound states near `E < 0`.
    Bound = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrParity {
    Even = 0,
    Odd = 1,
    None = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrNormalization {
    /// `Phi(0) = 1`, `Phi'(0) = w0`.
    UnitValue = 0,
    /// `Phi(0) = -w0`, `Phi'(0) = 1`.
    UnitSlope = 1,
}

/// Floquet data of the periodic background at one energy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrFloquet {
    pub discriminant: DrComplex,
    pub lambda_small: DrComplex,
    pub lambda_large: DrComplex,
    pub k: f64,
    pub is_gap: bool,
    pub antiperiodic: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrInterval {
    pub is_gap: bool,
    pub lo: f64,
    pub hi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrDefectMode {
    pub energy: f64,
    pub parity: DrParity,
    pub normalization: DrNormalization,
    pub w0: f64,
    pub k: f64,
    pub k_fit: f64,
    pub antiperiodic: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrSolverOptions {
    pub step_tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub precondition_tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrResonance {
    pub z_star: DrComplex,
    /// NaN unless the two-sided problem was solved.
    pub w_star: DrComplex,
    /// First iterate `E - Theta(E)/Theta'(E)`.
    pub asymptotic_z1: DrComplex,
    pub residual: f64,
    pub iterations: usize,
    pub ball_radius: f64,
    pub in_ball: bool,
    /// NaN for a real root.
    pub lifetime: f64,
}

/// Opaque potential handle.
pub struct DrPotential(Potential);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (DrStatus, String)>) -> DrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DrStatus::Panic
        }
    }
}

fn lib(e: Error) -> (DrStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(name: &str) -> (DrStatus, String) {
    (DrStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (DrStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (DrStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn fill<T: Copy>(
    items: &[T],
    buf: *mut T,
    capacity: usize,
    count: *mut usize,
) -> Result<(), (DrStatus, String)> {
    *out(count, "count")? = items.len();
    if items.len() > capacity {
        return Err((
            DrStatus::BufferTooSmall,
            format!("need {} entries, capacity is {capacity}", items.len()),
        ));
    }
    if !items.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(items.as_ptr(), buf, items.len());
    }
    Ok(())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len`, into `buf`. Returns the untruncated length in bytes
/// (without the terminator); pass `buf = NULL` to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a potential from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_potential_from_json(
    json: *const c_char,
    out_handle: *mut *mut DrPotential,
) -> DrStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (DrStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let p: Potential =
            serde_json::from_str(text).map_err(|e| (DrStatus::InvalidPotential, e.to_string()))?;
        *slot = Box::into_raw(Box::new(DrPotential(p)));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `handle` must come from [`dr_potential_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dr_potential_free(handle: *mut DrPotential) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// `V(x)` of the untruncated potential.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dr_potential_eval(handle: *const DrPotential, x: f64, value: *mut f64) -> DrStatus {
    guard(|| {
        let p = &deref(handle, "handle")?.0;
        *out(value, "value")? = p.eval(x);
        Ok(())
    })
}

/// Monodromy data of the periodic background at complex energy `z`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dr_floquet(
    handle: *const DrPotential,
    z: DrComplex,
    tol: f64,
    result: *mut DrFloquet,
) -> DrStatus {
    guard(|| {
        let p = &deref(handle, "handle")?.0;
        let dst = out(result, "result")?;
        let f = floquet::monodromy(p.periodic(), z.into(), tol).map_err(lib)?;
        *dst = DrFloquet {
            discriminant: f.discriminant.into(),
            lambda_small: f.lambda_small.into(),
            lambda_large: f.lambda_large.into(),
            k: f.k,
            is_gap: f.is_gap(),
            antiperiodic: f.is_antiperiodic(),
        };
        Ok(())
    })
}

/// Bands and gaps of the periodic background on `[z_min, z_max]`.
///
/// # Safety
/// `buf` must hold `capacity` entries; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dr_band_gap_scan(
    handle: *const DrPotential,
    z_min: f64,
    z_max: f64,
    n_samples: usize,
    buf: *mut DrInterval,
    capacity: usize,
    count: *mut usize,
) -> DrStatus {
    guard(|| {
        let p = &deref(handle, "handle")?.0;
        let report = floquet::band_gap_scan(p.periodic(), z_min, z_max, n_samples).map_err(lib)?;
        let items: Vec<DrInterval> = report
            .intervals
            .iter()
            .map(|i| DrInterval {
                is_gap: i.kind == IntervalKind::Gap,
                lo: i.lo,
                hi: i.hi,
            })
            .collect();
        fill(&items, buf, capacity, count)
    })
}

fn to_c_mode(m: &DefectMode) -> DrDefectMode {
    DrDefectMode {
        energy: m.energy,
        parity: match m.parity {
            Parity::Even => DrParity::Even,
            Parity::Odd => DrParity::Odd,
            Parity::None => DrParity::None,
        },
        normalization: match m.normalization {
            Normalization::UnitValue => DrNormalization::UnitValue,
            Normalization::UnitSlope => DrNormalization::UnitSlope,
        },
        w0: m.w0,
        k: m.k,
        k_fit: m.k_fit,
        antiperiodic: m.antiperiodic,
    }
}

fn from_c_mode(m: &DrDefectMode) -> DefectMode {
    DefectMode {
        energy: m.energy,
        parity: match m.parity {
            DrParity::Even => Parity::Even,
            DrParity::Odd => Parity::Odd,
            DrParity::None => Parity::None,
        },
        normalization: match m.normalization {
            DrNormalization::UnitValue => Normalization::UnitValue,
            DrNormalization::UnitSlope => Normalization::UnitSlope,
        },
        w0: m.w0,
        k: m.k,
        k_fit: m.k_fit,
        antiperiodic: m.antiperiodic,
        matching_residual: 0.0,
        profile: Vec::new(),
    }
}

/// Defect eigenvalues inside the gap `(gap_lo, gap_hi)`, ascending.
///
/// # Safety
/// `buf` must hold `capacity` entries; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dr_find_defect_modes(
    handle: *const DrPotential,
    gap_lo: f64,
    gap_hi: f64,
    tol: f64,
    buf: *mut DrDefectMode,
    capacity: usize,
    count: *mut usize,
) -> DrStatus {
    guard(|| {
        let p = &deref(handle, "handle")?.0;
        let gap = SpectralInterval {
            kind: IntervalKind::Gap,
            lo: gap_lo,
            hi: gap_hi,
        };
        let modes = defect::find_defect_modes(p, &gap, tol).map_err(lib)?;
        let items: Vec<DrDefectMode> = modes.iter().map(to_c_mode).collect();
        fill(&items, buf, capacity, count)
    })
}

/// Root of the truncated problem at radius `m` continued from `mode`.
/// `options` may be null for the defaults.
///
/// # Safety
/// Pointers must be valid (`options` may be null).
#[no_mangle]
pub unsafe extern "C" fn dr_solve_resonance(
    handle: *const DrPotential,
    mode: *const DrDefectMode,
    m: f64,
    options: *const DrSolverOptions,
    result: *mut DrResonance,
) -> DrStatus {
    guard(|| {
        let p = &deref(handle, "handle")?.0;
        let mode = from_c_mode(deref(mode, "mode")?);
        let dst = out(result, "result")?;
        let opts = match options.as_ref() {
            Some(o) => SolverOptions {
                step_tol: o.step_tol,
                residual_tol: o.residual_tol,
                max_iter: o.max_iter,
                precondition_tol: o.precondition_tol,
            },
            None => SolverOptions::default(),
        };
        let (r, _) = resonance::solve_mode(p, &mode, m, &opts).map_err(lib)?;
        *dst = DrResonance {
            z_star: r.z_star.into(),
            w_star: r.w_star.map_or(NAN_C, Into::into),
            asymptotic_z1: r.asymptotic_z1.into(),
            residual: r.residual,
            iterations: r.iterations(),
            ball_radius: r.ball_radius,
            in_ball: r.in_ball,
            lifetime: r.lifetime.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Default solver options.
#[no_mangle]
pub extern "C" fn dr_solver_options_default() -> DrSolverOptions {
    let o = SolverOptions::default();
    DrSolverOptions {
        step_tol: o.step_tol,
        residual_tol: o.residual_tol,
        max_iter: o.max_iter,
        precondition_tol: o.precondition_tol,
    }
}

/// `Theta(z) = u'(M) - i sqrt(z) u(M)` for the solution with data
/// `(u0, du0)` at the origin, and `dTheta/dz` when `d_theta` is non-null.
///
/// # Safety
/// Pointers must be valid (`d_theta` may be null).
#[no_mangle]
pub unsafe extern "C" fn dr_theta(
    handle: *const DrPotential,
    z: DrComplex,
    m: f64,
    u0: DrComplex,
    du0: DrComplex,
    branch: DrBranch,
    theta: *mut DrComplex,
    d_theta: *mut DrComplex,
) -> DrStatus {
    guard(|| {
        let p = &deref(handle, "handle")?.0;
        let dst = out(theta, "theta")?;
        let branch = match branch {
            DrBranch::Resonance => SqrtBranch::Resonance,
            DrBranch::Bound => SqrtBranch::Bound,
        };
        let init = StateVector::new(u0.into(), du0.into());
        let t = resonance::theta(p, z.into(), m, init, branch, !d_theta.is_null()).map_err(lib)?;
        *dst = t.theta.into();
        if let Some(d) = d_theta.as_mut() {
            *d = t.d_z().into();
        }
        Ok(())
    })
}
