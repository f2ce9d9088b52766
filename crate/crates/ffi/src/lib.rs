//! C ABI over the `dirac-vacuum` solver.
//!
//! Objects cross the boundary as opaque handles created by `dv_*_new` style
//! functions and released with the matching `dv_*_free`. Every fallible call
//! returns a [`DvStatus`]; on failure `dv_last_error_message` describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dirac_vacuum::{lattice, profiles, pv, renorm, scf, Error};

/// Status codes; the nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DvStatus {
    Ok = 0,
    Other = 1,
    InvalidArgument = 2,
    MaxIterExceeded = 3,
    Degenerate = 4,
    ChargeUnreachable = 5,
    LandauPoleViolation = 6,
    NonlinearRegime = 7,
    SaddleFailure = 8,
    DegenerateMasses = 9,
    NullPointer = 10,
    Panic = 11,
}

impl From<&Error> for DvStatus {
    fn from(e: &Error) -> Self {
        match e.exit_code() {
            2 => DvStatus::InvalidArgument,
            3 => DvStatus::MaxIterExceeded,
            4 => DvStatus::Degenerate,
            5 => DvStatus::ChargeUnreachable,
            6 => DvStatus::LandauPoleViolation,
            7 => DvStatus::NonlinearRegime,
            8 => DvStatus::SaddleFailure,
            9 => DvStatus::DegenerateMasses,
            _ => DvStatus::Other,
        }
    }
}

/// Momentum lattice handle.
pub struct DvLattice {
    inner: lattice::MomentumLattice,
}

/// Charge density handle (Fourier coefficients on the difference grid).
pub struct DvDensity {
    inner: lattice::ChargeDensity,
}

/// Converged SCF solution handle.
pub struct DvScfResult {
    inner: scf::ScfResult,
}

/// Solver parameters for [`dv_scf_solve`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DvScfConfig {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub kernel_eps: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), DvFailure>) -> DvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DvStatus::Ok
        }
        Ok(Err(DvFailure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            DvStatus::NullPointer
        }
        Ok(Err(DvFailure::Solver(e))) => {
            set_error(&e.to_string());
            DvStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DvStatus::Panic
        }
    }
}

enum DvFailure {
    Null(&'static str),
    Solver(Error),
}

impl From<Error> for DvFailure {
    fn from(e: Error) -> Self {
        DvFailure::Solver(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, DvFailure> {
    // SAFETY: the caller guarantees p is null or a live handle from this library
    unsafe { p.as_ref() }.ok_or(DvFailure::Null(what))
}

fn out_ptr<T>(p: *mut T, what: &'static str) -> Result<*mut T, DvFailure> {
    if p.is_null() {
        Err(DvFailure::Null(what))
    } else {
        Ok(p)
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds the lattice of modes (2 pi / L) n with |n_i| <= N and |k| <= cutoff.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn dv_lattice_new(box_length: f64, max_index: i32, cutoff: f64, out: *mut *mut DvLattice) -> DvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = lattice::build_lattice(box_length, max_index, cutoff)?;
        // SAFETY: checked non-null above; caller provides writable storage
        unsafe { *out = Box::into_raw(Box::new(DvLattice { inner })) };
        Ok(())
    })
}

/// # Safety
/// `lat` must be null or a handle from [`dv_lattice_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dv_lattice_free(lat: *mut DvLattice) {
    if !lat.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(lat) });
    }
}

/// Number of momentum modes, or 0 for a null handle.
///
/// # Safety
/// `lat` must be null or a live lattice handle.
#[no_mangle]
pub unsafe extern "C" fn dv_lattice_num_modes(lat: *const DvLattice) -> usize {
    // SAFETY: caller contract
    unsafe { lat.as_ref() }.map_or(0, |l| l.inner.num_modes())
}

unsafe fn emit_density(out: *mut *mut DvDensity, inner: lattice::ChargeDensity) {
    // SAFETY: caller checked out is non-null
    unsafe { *out = Box::into_raw(Box::new(DvDensity { inner })) };
}

/// Zero density on the lattice's difference grid.
///
/// # Safety
/// `lat` must be a live lattice handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_density_zeros(lat: *const DvLattice, out: *mut *mut DvDensity) -> DvStatus {
    guard(|| {
        let lat = unsafe { deref(lat, "lat") }?;
        let out = out_ptr(out, "out")?;
        unsafe { emit_density(out, lattice::FourierField::zeros_like(&lat.inner)) };
        Ok(())
    })
}

/// Gaussian profile nu_q = Z L^-3 exp(-sigma^2 |q|^2 / 2).
///
/// # Safety
/// `lat` must be a live lattice handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_density_gaussian(
    lat: *const DvLattice,
    charge: f64,
    width: f64,
    out: *mut *mut DvDensity,
) -> DvStatus {
    guard(|| {
        let lat = unsafe { deref(lat, "lat") }?;
        let out = out_ptr(out, "out")?;
        if !(width > 0.0) {
            return Err(Error::InvalidArgument(format!("width must be positive, got {width}")).into());
        }
        unsafe { emit_density(out, profiles::gaussian(lat.inner.params(), charge, width)) };
        Ok(())
    })
}

/// Parses the density JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_density_from_json(json: *const c_char, out: *mut *mut DvDensity) -> DvStatus {
    guard(|| {
        if json.is_null() {
            return Err(DvFailure::Null("json"));
        }
        let out = out_ptr(out, "out")?;
        // SAFETY: caller guarantees a NUL-terminated string
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| Error::InvalidArgument("density JSON is not UTF-8".into()))?;
        unsafe { emit_density(out, lattice::FourierField::from_json(text)?) };
        Ok(())
    })
}

/// Serializes a density; release the string with [`dv_string_free`].
///
/// # Safety
/// `d` must be a live density handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_density_to_json(d: *const DvDensity, out: *mut *mut c_char) -> DvStatus {
    guard(|| {
        let d = unsafe { deref(d, "density") }?;
        let out = out_ptr(out, "out")?;
        let s = CString::new(d.inner.to_json()).map_err(|_| Error::InvalidArgument("NUL in JSON".into()))?;
        unsafe { *out = s.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dv_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string came from CString::into_raw
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `d` must be null or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn dv_density_free(d: *mut DvDensity) {
    if !d.is_null() {
        drop(unsafe { Box::from_raw(d) });
    }
}

/// Box Coulomb form D(f, g).
///
/// # Safety
/// `f`, `g` must be live density handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_coulomb_inner(f: *const DvDensity, g: *const DvDensity, out: *mut f64) -> DvStatus {
    guard(|| {
        let f = unsafe { deref(f, "f") }?;
        let g = unsafe { deref(g, "g") }?;
        let out = out_ptr(out, "out")?;
        if f.inner.params() != g.inner.params() {
            return Err(Error::InvalidArgument("densities live on different lattices".into()).into());
        }
        unsafe { *out = lattice::coulomb_inner(&f.inner, &g.inner) };
        Ok(())
    })
}

/// Default solver parameters (mixing 0.3, tol 1e-8, 500 iterations).
#[no_mangle]
pub extern "C" fn dv_scf_config_default() -> DvScfConfig {
    let c = scf::ScfConfig::default();
    DvScfConfig {
        mixing: c.mixing,
        tol: c.tol,
        max_iter: c.max_iter,
        kernel_eps: c.kernel_eps,
    }
}

/// Unconstrained SCF minimization in the external density `nu`.
///
/// # Safety
/// `nu`, `lat` must be live handles, `cfg` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_scf_solve(
    nu: *const DvDensity,
    alpha: f64,
    cfg: *const DvScfConfig,
    lat: *const DvLattice,
    mass: f64,
    out: *mut *mut DvScfResult,
) -> DvStatus {
    guard(|| {
        let nu = unsafe { deref(nu, "nu") }?;
        let c = unsafe { deref(cfg, "cfg") }?;
        let lat = unsafe { deref(lat, "lat") }?;
        let out = out_ptr(out, "out")?;
        let cfg = scf::ScfConfig {
            mixing: c.mixing,
            tol: c.tol,
            max_iter: c.max_iter,
            kernel_eps: c.kernel_eps,
            ..scf::ScfConfig::default()
        };
        let inner = scf::scf_solve(&nu.inner, alpha, &cfg, &lat.inner, mass)?;
        unsafe { *out = Box::into_raw(Box::new(DvScfResult { inner })) };
        Ok(())
    })
}

/// BDF energy of the solution; NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dv_scf_result_energy(r: *const DvScfResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.inner.energy)
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dv_scf_result_iterations(r: *const DvScfResult) -> usize {
    unsafe { r.as_ref() }.map_or(0, |r| r.inner.iterations)
}

/// Coulomb norm of the last density step; NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dv_scf_result_residual(r: *const DvScfResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.inner.final_residual())
}

/// Copies the converged vacuum density into a new handle.
///
/// # Safety
/// `r` must be a live result handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_scf_result_density(r: *const DvScfResult, out: *mut *mut DvDensity) -> DvStatus {
    guard(|| {
        let r = unsafe { deref(r, "result") }?;
        let out = out_ptr(out, "out")?;
        unsafe { emit_density(out, r.inner.density.clone()) };
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn dv_scf_result_free(r: *mut DvScfResult) {
    if !r.is_null() {
        drop(unsafe { Box::from_raw(r) });
    }
}

/// Renormalization constant B(Lambda/m).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_b_constant(ratio: f64, out: *mut f64) -> DvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        unsafe { *out = renorm::b_constant(ratio)? };
        Ok(())
    })
}

/// alpha_ph = alpha / (1 + alpha B).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_renormalize_coupling(alpha_bare: f64, b: f64, out: *mut f64) -> DvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        unsafe { *out = renorm::renormalize_coupling(alpha_bare, b)? };
        Ok(())
    })
}

/// alpha = alpha_ph / (1 - alpha_ph B); fails at the Landau pole.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_bare_coupling(alpha_ph: f64, b: f64, out: *mut f64) -> DvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        unsafe { *out = renorm::bare_coupling(alpha_ph, b)? };
        Ok(())
    })
}

/// Exact and asymptotic Landau cutoffs.
///
/// # Safety
/// `exact` and `asymptotic` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_landau_cutoff(alpha_ph: f64, mass: f64, exact: *mut f64, asymptotic: *mut f64) -> DvStatus {
    guard(|| {
        let exact = out_ptr(exact, "exact")?;
        let asymptotic = out_ptr(asymptotic, "asymptotic")?;
        let c = renorm::landau_cutoff(alpha_ph, mass)?;
        unsafe {
            *exact = c.exact;
            *asymptotic = c.asymptotic;
        }
        Ok(())
    })
}

/// Pauli-Villars coefficients c1, c2 for masses (m, m1, m2).
///
/// # Safety
/// `c1` and `c2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_pv_coefficients(m: f64, m1: f64, m2: f64, c1: *mut f64, c2: *mut f64) -> DvStatus {
    guard(|| {
        let c1 = out_ptr(c1, "c1")?;
        let c2 = out_ptr(c2, "c2")?;
        let (a, b) = pv::pv_coefficients(m, m1, m2)?;
        unsafe {
            *c1 = a;
            *c2 = b;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn error_message_cleared_on_success() {
        let mut x = 0.0;
        assert_eq!(unsafe { dv_b_constant(-1.0, &mut x) }, DvStatus::InvalidArgument);
        let msg = unsafe { CStr::from_ptr(dv_last_error_message()) }.to_str().unwrap().to_owned();
        assert!(msg.contains("ratio"), "{msg}");
        assert_eq!(unsafe { dv_b_constant(10.0, &mut x) }, DvStatus::Ok);
        assert!(unsafe { CStr::from_ptr(dv_last_error_message()) }.to_bytes().is_empty());
    }

    #[test]
    fn null_out_pointer() {
        assert_eq!(unsafe { dv_b_constant(10.0, ptr::null_mut()) }, DvStatus::NullPointer);
    }
}
