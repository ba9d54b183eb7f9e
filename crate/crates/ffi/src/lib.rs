//! C ABI over `triplet-mur`.
//!
//! Conventions:
//! - Every fallible function returns a [`TmurStatus`]; on failure a message
//!   is kept per thread and can be read with [`tmur_last_error`].
//! - Triplets and solutions are opaque heap handles. Free them with the
//!   matching `_free` function; passing NULL to a free function is a no-op.
//! - Vectors are flat `double` arrays: a triplet is 9 values (m1, m2, m3),
//!   a Bloch vector is 3.
//! - Angles are in degrees.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use triplet_mur::analytic::{delta_orthogonal, delta_perp, delta_y};
use triplet_mur::experiment::{family_triplet, Family};
use triplet_mur::{analyze, solve_bloch_form, solve_povm_form, Error, SolveResult, SolveStatus, Triplet, Vec3};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TmurStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Unsupported = 3,
    Precondition = 4,
    DegenerateGeometry = 5,
    Numeric = 6,
    NotConverged = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TmurForm {
    Bloch = 0,
    Povm = 1,
}

/// Joint-measurability summary of an unbiased triplet.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct TmurReport {
    /// Diagonal vectors p_0..p_3, row-major.
    pub p: [f64; 12],
    pub ft_point: [f64; 3],
    pub lhs: f64,
    pub delta: f64,
    pub lower_bound: f64,
    pub min_distance: f64,
    pub jointly_measurable: bool,
    pub attainable: bool,
}

/// Opaque triplet handle.
pub struct TmurTriplet(Triplet);

/// Opaque solver result handle.
pub struct TmurSolution(SolveResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TmurStatus {
    match e {
        Error::InvalidInput(_) | Error::Io(_) => TmurStatus::InvalidInput,
        Error::Unsupported(_) => TmurStatus::Unsupported,
        Error::Precondition(_) | Error::InvalidSymmetry(_) => TmurStatus::Precondition,
        Error::DegenerateGeometry(_) => TmurStatus::DegenerateGeometry,
        Error::Numeric(_) => TmurStatus::Numeric,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<TmurStatus, (TmurStatus, String)>) -> TmurStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => {
            if s == TmurStatus::Ok {
                set_error("");
            }
            s
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TmurStatus::Panic
        }
    }
}

fn lift(e: Error) -> (TmurStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (TmurStatus, String) {
    (TmurStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_vecs<const N: usize>(p: *const f64) -> Result<[Vec3; N], (TmurStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    let s = std::slice::from_raw_parts(p, 3 * N);
    Ok(std::array::from_fn(|j| Vec3::new(s[3 * j], s[3 * j + 1], s[3 * j + 2])))
}

unsafe fn write_vecs(out: *mut f64, v: &[Vec3]) -> Result<(), (TmurStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    let s = std::slice::from_raw_parts_mut(out, 3 * v.len());
    for (j, x) in v.iter().enumerate() {
        s[3 * j..3 * j + 3].copy_from_slice(&x.to_array());
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tmur_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn tmur_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Unbiased triplet from 9 Bloch components (each |m_j| ≤ 1).
#[no_mangle]
pub unsafe extern "C" fn tmur_triplet_new(m: *const f64, out: *mut *mut TmurTriplet) -> TmurStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let v = read_vecs::<3>(m)?;
        let t = Triplet::unbiased(v).map_err(lift)?;
        put(out, TmurTriplet(t));
        Ok(TmurStatus::Ok)
    })
}

/// Family member: `name` is one of "m_o", "m_perp", "m_p", "m_y"; 0 ≤ γ ≤ 90.
#[no_mangle]
pub unsafe extern "C" fn tmur_triplet_family(
    name: *const c_char,
    gamma_deg: f64,
    out: *mut *mut TmurTriplet,
) -> TmurStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return Err(null());
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|e| (TmurStatus::InvalidInput, e.to_string()))?;
        let family: Family = name.parse().map_err(lift)?;
        let t = family_triplet(family, gamma_deg).map_err(lift)?;
        put(out, TmurTriplet(t));
        Ok(TmurStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tmur_triplet_bloch(t: *const TmurTriplet, out: *mut f64) -> TmurStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(null)?;
        write_vecs(out, &t.0.bloch())?;
        Ok(TmurStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tmur_triplet_free(t: *mut TmurTriplet) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tmur_analyze(t: *const TmurTriplet, out: *mut TmurReport) -> TmurStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let r = analyze(&t.0).map_err(lift)?;
        let mut p = [0.0; 12];
        for (k, v) in r.p.iter().enumerate() {
            p[3 * k..3 * k + 3].copy_from_slice(&v.to_array());
        }
        *out = TmurReport {
            p,
            ft_point: r.p_f.to_array(),
            lhs: r.lhs,
            delta: r.delta,
            lower_bound: r.lower_bound,
            min_distance: r.min_distance,
            jointly_measurable: r.jointly_measurable,
            attainable: r.attainable,
        };
        Ok(TmurStatus::Ok)
    })
}

/// Exact incompatibility. On `TMUR_STATUS_NOT_CONVERGED` the handle is still
/// written so the partial result can be inspected.
#[no_mangle]
pub unsafe extern "C" fn tmur_solve(
    t: *const TmurTriplet,
    form: TmurForm,
    tol: f64,
    out: *mut *mut TmurSolution,
) -> TmurStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let sol = match form {
            TmurForm::Bloch => solve_bloch_form(&t.0, tol),
            TmurForm::Povm => solve_povm_form(&t.0, tol),
        }
        .map_err(lift)?;
        let converged = sol.status == SolveStatus::Optimal;
        let status = sol.status;
        put(out, TmurSolution(sol));
        if converged {
            Ok(TmurStatus::Ok)
        } else {
            Err((TmurStatus::NotConverged, format!("solver stopped with status {status:?}")))
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tmur_solution_value(s: *const TmurSolution, out: *mut f64) -> TmurStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        *out.as_mut().ok_or_else(null)? = s.0.value;
        Ok(TmurStatus::Ok)
    })
}

/// Optimal approximating Bloch vectors, 9 values.
#[no_mangle]
pub unsafe extern "C" fn tmur_solution_approximators(s: *const TmurSolution, out: *mut f64) -> TmurStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        write_vecs(out, &s.0.approximators.bloch())?;
        Ok(TmurStatus::Ok)
    })
}

/// Biases of the approximators, 3 values.
#[no_mangle]
pub unsafe extern "C" fn tmur_solution_biases(s: *const TmurSolution, out: *mut f64) -> TmurStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&s.0.approximators.biases());
        Ok(TmurStatus::Ok)
    })
}

/// Bloch vector of the worst-case state, 3 values.
#[no_mangle]
pub unsafe extern "C" fn tmur_solution_worst_state(s: *const TmurSolution, out: *mut f64) -> TmurStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        write_vecs(out, &[s.0.worst_state.r])?;
        Ok(TmurStatus::Ok)
    })
}

/// Number of parent POVM outcomes.
#[no_mangle]
pub unsafe extern "C" fn tmur_solution_parent_len(s: *const TmurSolution, out: *mut usize) -> TmurStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        *out.as_mut().ok_or_else(null)? = s.0.parent.len();
        Ok(TmurStatus::Ok)
    })
}

/// Outcome `index` of the parent POVM as (a, b_x, b_y, b_z), effect (a + b·σ)/2,
/// plus the "+" probabilities of the three post-processed observables.
#[no_mangle]
pub unsafe extern "C" fn tmur_solution_parent_outcome(
    s: *const TmurSolution,
    index: usize,
    effect: *mut f64,
    readout: *mut f64,
) -> TmurStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        if effect.is_null() || readout.is_null() {
            return Err(null());
        }
        let (label, e) = s.0.parent.outcomes.get(index).ok_or_else(|| {
            (TmurStatus::InvalidInput, format!("outcome {index} out of range ({} outcomes)", s.0.parent.len()))
        })?;
        let r = s
            .0
            .post
            .table
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, r)| *r)
            .ok_or_else(|| (TmurStatus::Precondition, format!("no post-processing for {label}")))?;
        std::slice::from_raw_parts_mut(effect, 4).copy_from_slice(&[e.a, e.b.x, e.b.y, e.b.z]);
        std::slice::from_raw_parts_mut(readout, 3).copy_from_slice(&r);
        Ok(TmurStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tmur_solution_free(s: *mut TmurSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tmur_delta_orthogonal(gamma_deg: f64, out: *mut f64) -> TmurStatus {
    guard(|| {
        *out.as_mut().ok_or_else(null)? = delta_orthogonal(gamma_deg);
        Ok(TmurStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tmur_delta_perp(gamma_deg: f64, out: *mut f64) -> TmurStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        *out = delta_perp(gamma_deg).map_err(lift)?;
        Ok(TmurStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tmur_delta_y(gamma_deg: f64, out: *mut f64) -> TmurStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        *out = delta_y(gamma_deg).map_err(lift)?;
        Ok(TmurStatus::Ok)
    })
}
