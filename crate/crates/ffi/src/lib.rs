//! C ABI over the field operators and parameter validation of `mscbf`.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible function returns an
//! [`MscbfStatus`]; the message of the last failure on the calling thread is
//! available through [`mscbf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use mscbf::fields::{
    apply_convection, apply_damping, apply_g, apply_stokes, monotonicity_constant, norm,
    validate_assumptions, CouplingSpec, ModelParams, NormKind, StokesBasis, VelocityField,
};
use mscbf::Error;
use num_complex::Complex64;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MscbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The grid cannot dealias the requested product order.
    Dealias = 3,
    BasisMismatch = 4,
    /// The monotonicity shift needs `r > 3` and `beta > 0`.
    MonotonicityDomain = 5,
    /// The averaging gap `xi` is not positive.
    DissipativityGap = 6,
    Panic = 7,
    Other = 8,
}

/// Norm selector for [`mscbf_field_norm`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MscbfNorm {
    H = 0,
    V = 1,
    /// `L^p` norm; the exponent is passed separately.
    Lp = 2,
}

/// Opaque divergence-free Fourier basis.
pub struct MscbfBasis(Arc<StokesBasis>);

/// Opaque real velocity field over a basis.
pub struct MscbfField(VelocityField);

/// Physical parameters and coupling constants for [`mscbf_validate`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MscbfParams {
    pub mu: f64,
    pub beta: f64,
    pub r: f64,
    pub epsilon: f64,
    pub l_g: f64,
    pub l_sigma2: f64,
}

/// Dissipativity gaps; `admissible` is 1 when every gap is positive.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MscbfGaps {
    pub gamma: f64,
    pub kappa: f64,
    pub zeta_mix: f64,
    pub xi: f64,
    pub admissible: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MscbfStatus {
    match e {
        Error::InvalidArgument(_) | Error::InvalidCoupling(_) | Error::Config(_) => {
            MscbfStatus::InvalidArgument
        }
        Error::Dealias { .. } => MscbfStatus::Dealias,
        Error::BasisMismatch | Error::GridMismatch { .. } => MscbfStatus::BasisMismatch,
        Error::MonotonicityDomain { .. } => MscbfStatus::MonotonicityDomain,
        Error::DissipativityGap { .. } => MscbfStatus::DissipativityGap,
        _ => MscbfStatus::Other,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> MscbfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MscbfStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MscbfStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MscbfStatus::Panic
        }
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_field(out: *mut *mut MscbfField, f: VelocityField) -> Result<(), Fail> {
    put(out, Box::into_raw(Box::new(MscbfField(f))), "out")
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes) and returns the full message length. Returns 0
/// when no error was recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mscbf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Basis of all modes with `|k|_inf <= k_max` on a `grid x grid`
/// collocation grid that dealiases products of order `order` (at least 2).
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn mscbf_basis_new(
    k_max: u32,
    grid: u32,
    order: u32,
    out: *mut *mut MscbfBasis,
) -> MscbfStatus {
    guard(|| {
        let b = StokesBasis::with_order(k_max as usize, grid as usize, order as usize)?;
        put(out, Box::into_raw(Box::new(MscbfBasis(b))), "out")
    })
}

/// # Safety
/// `basis` must be null or a handle from [`mscbf_basis_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mscbf_basis_free(basis: *mut MscbfBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Number of modes; 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mscbf_basis_len(basis: *const MscbfBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.len())
}

/// Wavenumber and Stokes eigenvalue of mode `index`.
///
/// # Safety
/// `basis` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_basis_mode(
    basis: *const MscbfBasis,
    index: usize,
    k1: *mut i32,
    k2: *mut i32,
    lambda: *mut f64,
) -> MscbfStatus {
    guard(|| {
        let b = deref(basis, "basis")?;
        let m =
            b.0.modes().get(index).ok_or_else(|| {
                Error::InvalidArgument(format!("mode index {index} out of range"))
            })?;
        put(k1, m.k[0], "k1")?;
        put(k2, m.k[1], "k2")?;
        put(lambda, m.lambda, "lambda")
    })
}

/// Zero field over `basis`.
///
/// # Safety
/// `basis` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_zeros(
    basis: *const MscbfBasis,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| {
        let b = deref(basis, "basis")?;
        put_field(out, VelocityField::zeros(&b.0))
    })
}

/// Real unit-norm cosine mode along wavenumber `(k1, k2)`.
///
/// # Safety
/// `basis` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_unit_mode(
    basis: *const MscbfBasis,
    k1: i32,
    k2: i32,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| {
        let b = deref(basis, "basis")?;
        put_field(out, VelocityField::unit_mode(&b.0, [k1, k2])?)
    })
}

/// Field from `len` complex amplitudes given as separate real and imaginary
/// arrays in basis order. Amplitudes must satisfy `c(-k) = conj(c(k))`.
///
/// # Safety
/// `basis` must be a live handle, `re`/`im` must point to `len` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_from_coeffs(
    basis: *const MscbfBasis,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| {
        let b = deref(basis, "basis")?;
        if re.is_null() || im.is_null() {
            return Err(Fail::Null("coefficients"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let c = re
            .iter()
            .zip(im)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        put_field(out, VelocityField::from_coeffs(&b.0, c)?)
    })
}

/// Copies the amplitudes into `re`/`im`, which must hold `len` entries
/// (the basis length).
///
/// # Safety
/// `field` must be a live handle; `re`/`im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_coeffs(
    field: *const MscbfField,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> MscbfStatus {
    guard(|| {
        let f = deref(field, "field")?;
        if re.is_null() || im.is_null() {
            return Err(Fail::Null("coefficients"));
        }
        let c = f.0.coeffs();
        if len != c.len() {
            return Err(Error::InvalidArgument(format!(
                "buffer holds {len} entries, field has {}",
                c.len()
            ))
            .into());
        }
        for (i, z) in c.iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_free(field: *mut MscbfField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// `H`, `V` or `L^p` norm (`p` is used only for [`MscbfNorm::Lp`]).
///
/// # Safety
/// `field` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_norm(
    field: *const MscbfField,
    kind: MscbfNorm,
    p: f64,
    out: *mut f64,
) -> MscbfStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let k = match kind {
            MscbfNorm::H => NormKind::H,
            MscbfNorm::V => NormKind::V,
            MscbfNorm::Lp => NormKind::Lp(p),
        };
        put(out, norm(&f.0, k)?, "out")
    })
}

/// `L^2` inner product.
///
/// # Safety
/// `u`, `v` must be live handles over the same basis and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_field_inner(
    u: *const MscbfField,
    v: *const MscbfField,
    out: *mut f64,
) -> MscbfStatus {
    guard(|| {
        let (u, v) = (deref(u, "u")?, deref(v, "v")?);
        u.0.ensure_same_basis(&v.0)?;
        put(out, u.0.inner(&v.0), "out")
    })
}

/// Stokes operator `A u`.
///
/// # Safety
/// `u` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_apply_stokes(
    u: *const MscbfField,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| put_field(out, apply_stokes(&deref(u, "u")?.0)))
}

/// Convection `B(u, v)`.
///
/// # Safety
/// `u`, `v` must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_apply_convection(
    u: *const MscbfField,
    v: *const MscbfField,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| put_field(out, apply_convection(&deref(u, "u")?.0, &deref(v, "v")?.0)?))
}

/// Damping `C(u)` with exponent `r`.
///
/// # Safety
/// `u` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_apply_damping(
    u: *const MscbfField,
    r: f64,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| put_field(out, apply_damping(&deref(u, "u")?.0, r)?))
}

/// `G(u) = mu A u + B(u, u) + beta C(u)`.
///
/// # Safety
/// `u` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_apply_g(
    u: *const MscbfField,
    mu: f64,
    beta: f64,
    r: f64,
    out: *mut *mut MscbfField,
) -> MscbfStatus {
    guard(|| put_field(out, apply_g(&deref(u, "u")?.0, mu, beta, r)?))
}

/// Dissipativity gaps of the given constants. Returns
/// [`MscbfStatus::DissipativityGap`] (with `out` filled) when `xi <= 0`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mscbf_validate(
    params: *const MscbfParams,
    out: *mut MscbfGaps,
) -> MscbfStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let mp = ModelParams {
            mu: p.mu,
            beta: p.beta,
            r: p.r,
            epsilon: p.epsilon,
            l_g: p.l_g,
            l_sigma2: p.l_sigma2,
            ..ModelParams::default()
        };
        let rep = validate_assumptions(&mp, &CouplingSpec::zero());
        put(
            out,
            MscbfGaps {
                gamma: rep.gamma,
                kappa: rep.kappa,
                zeta_mix: rep.zeta_mix,
                xi: rep.xi,
                admissible: i32::from(rep.passed()),
            },
            "out",
        )?;
        let errs = mp.check();
        if !errs.is_empty() {
            return Err(Error::InvalidArgument(errs.join("; ")).into());
        }
        rep.require_admissible()?;
        Ok(())
    })
}

/// Shift `eta` that makes `G + eta I` monotone (`r > 3`, `beta > 0`).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mscbf_monotonicity_constant(
    mu: f64,
    beta: f64,
    r: f64,
    out: *mut f64,
) -> MscbfStatus {
    guard(|| {
        let p = ModelParams {
            mu,
            beta,
            r,
            ..ModelParams::default()
        };
        put(out, monotonicity_constant(&p)?, "out")
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mscbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
