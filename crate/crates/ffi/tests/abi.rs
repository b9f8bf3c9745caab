use std::ffi::CStr;
use std::ptr;

use mscbf_ffi::*;

const PI: f64 = std::f64::consts::PI;

fn basis(k: u32, grid: u32, order: u32) -> *mut MscbfBasis {
    let mut b = ptr::null_mut();
    assert_eq!(
        unsafe { mscbf_basis_new(k, grid, order, &mut b) },
        MscbfStatus::Ok
    );
    b
}

fn unit(b: *const MscbfBasis, k: [i32; 2]) -> *mut MscbfField {
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { mscbf_field_unit_mode(b, k[0], k[1], &mut f) },
        MscbfStatus::Ok
    );
    f
}

fn inner(u: *const MscbfField, v: *const MscbfField) -> f64 {
    let mut x = f64::NAN;
    assert_eq!(unsafe { mscbf_field_inner(u, v, &mut x) }, MscbfStatus::Ok);
    x
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { mscbf_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn basis_layout() {
    let b = basis(4, 24, 3);
    unsafe {
        assert_eq!(mscbf_basis_len(b), 80);
        assert_eq!(mscbf_basis_len(ptr::null()), 0);
        let (mut k1, mut k2, mut lam) = (0, 0, 0.0);
        for i in 0..80 {
            assert_eq!(
                mscbf_basis_mode(b, i, &mut k1, &mut k2, &mut lam),
                MscbfStatus::Ok
            );
            assert!(k1.abs() <= 4 && k2.abs() <= 4 && (k1, k2) != (0, 0));
            assert_eq!(lam, (k1 * k1 + k2 * k2) as f64);
        }
        assert_eq!(
            mscbf_basis_mode(b, 80, &mut k1, &mut k2, &mut lam),
            MscbfStatus::InvalidArgument
        );
        mscbf_basis_free(b);
    }
}

#[test]
fn dealias_rejected() {
    let mut b = ptr::null_mut();
    assert_eq!(
        unsafe { mscbf_basis_new(4, 12, 3, &mut b) },
        MscbfStatus::Dealias
    );
    assert!(b.is_null());
    assert!(last_error().contains("dealias"));
}

#[test]
fn operators_on_a_shear_mode() {
    let b = basis(4, 24, 3);
    let u = unit(b, [1, 0]);
    unsafe {
        let mut h = 0.0;
        assert_eq!(
            mscbf_field_norm(u, MscbfNorm::H, 0.0, &mut h),
            MscbfStatus::Ok
        );
        assert!((h - 1.0).abs() < 1e-12);

        let mut c = ptr::null_mut();
        assert_eq!(mscbf_apply_convection(u, u, &mut c), MscbfStatus::Ok);
        assert_eq!(
            mscbf_field_norm(c, MscbfNorm::H, 0.0, &mut h),
            MscbfStatus::Ok
        );
        assert!(
            h < 1e-12,
            "shear flow is a steady Euler solution, |B| = {h}"
        );

        // <C(u), u> = |u|_L4^4 = 3 / (8 pi^2) for a unit cosine shear.
        let mut d = ptr::null_mut();
        assert_eq!(mscbf_apply_damping(u, 3.0, &mut d), MscbfStatus::Ok);
        assert!((inner(d, u) - 3.0 / (8.0 * PI * PI)).abs() < 1e-12);
        let mut l4 = 0.0;
        assert_eq!(
            mscbf_field_norm(u, MscbfNorm::Lp, 4.0, &mut l4),
            MscbfStatus::Ok
        );
        assert!((l4.powi(4) - 3.0 / (8.0 * PI * PI)).abs() < 1e-12);

        let mut g = ptr::null_mut();
        assert_eq!(mscbf_apply_g(u, 2.0, 0.0, 3.0, &mut g), MscbfStatus::Ok);
        assert!((inner(g, u) - 2.0).abs() < 1e-12);

        for f in [u, c, d, g] {
            mscbf_field_free(f);
        }
        mscbf_basis_free(b);
    }
}

#[test]
fn stokes_scales_by_eigenvalue() {
    let b = basis(4, 24, 3);
    let u = unit(b, [2, 1]);
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(mscbf_apply_stokes(u, &mut a), MscbfStatus::Ok);
        assert!((inner(a, u) - 5.0).abs() < 1e-12);
        let mut v = 0.0;
        assert_eq!(
            mscbf_field_norm(u, MscbfNorm::V, 0.0, &mut v),
            MscbfStatus::Ok
        );
        assert!((v - 5f64.sqrt()).abs() < 1e-12);
        mscbf_field_free(a);
        mscbf_field_free(u);
        mscbf_basis_free(b);
    }
}

#[test]
fn coefficient_round_trip() {
    let b = basis(3, 16, 3);
    let u = unit(b, [1, 2]);
    unsafe {
        let n = mscbf_basis_len(b);
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(
            mscbf_field_coeffs(u, re.as_mut_ptr(), im.as_mut_ptr(), n),
            MscbfStatus::Ok
        );
        assert_eq!(
            mscbf_field_coeffs(u, re.as_mut_ptr(), im.as_mut_ptr(), n - 1),
            MscbfStatus::InvalidArgument
        );
        let mut v = ptr::null_mut();
        assert_eq!(
            mscbf_field_from_coeffs(b, re.as_ptr(), im.as_ptr(), n, &mut v),
            MscbfStatus::Ok
        );
        assert!((inner(u, v) - 1.0).abs() < 1e-12);

        im[0] += 1.0;
        let mut w = ptr::null_mut();
        assert_eq!(
            mscbf_field_from_coeffs(b, re.as_ptr(), im.as_ptr(), n, &mut w),
            MscbfStatus::InvalidArgument
        );
        mscbf_field_free(v);
        mscbf_field_free(u);
        mscbf_basis_free(b);
    }
}

#[test]
fn mismatched_bases() {
    let (b1, b2) = (basis(3, 16, 3), basis(4, 24, 3));
    let (u, v) = (unit(b1, [1, 0]), unit(b2, [1, 0]));
    let mut x = 0.0;
    unsafe {
        assert_eq!(mscbf_field_inner(u, v, &mut x), MscbfStatus::BasisMismatch);
        let mut c = ptr::null_mut();
        assert_eq!(
            mscbf_apply_convection(u, v, &mut c),
            MscbfStatus::BasisMismatch
        );
        mscbf_field_free(u);
        mscbf_field_free(v);
        mscbf_basis_free(b1);
        mscbf_basis_free(b2);
    }
}

#[test]
fn null_pointers() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(
            mscbf_field_norm(ptr::null(), MscbfNorm::H, 0.0, &mut x),
            MscbfStatus::NullPointer
        );
        assert!(last_error().contains("field"));
        assert_eq!(
            mscbf_monotonicity_constant(1.0, 1.0, 5.0, ptr::null_mut()),
            MscbfStatus::NullPointer
        );
        assert_eq!(
            mscbf_basis_new(4, 24, 3, ptr::null_mut()),
            MscbfStatus::NullPointer
        );
        mscbf_basis_free(ptr::null_mut());
        mscbf_field_free(ptr::null_mut());
    }
}

#[test]
fn validation_gaps() {
    let mut gaps = MscbfGaps::default();
    let ok = MscbfParams {
        mu: 1.0,
        beta: 0.0,
        r: 3.0,
        epsilon: 0.1,
        l_g: 0.1,
        l_sigma2: 0.2,
    };
    unsafe {
        assert_eq!(mscbf_validate(&ok, &mut gaps), MscbfStatus::Ok);
    }
    assert!((gaps.gamma - 0.8).abs() < 1e-12);
    assert!((gaps.kappa - 0.76).abs() < 1e-12);
    assert!((gaps.zeta_mix - 1.76).abs() < 1e-12);
    assert!((gaps.xi - 0.72).abs() < 1e-12);
    assert_eq!(gaps.admissible, 1);

    let bad = MscbfParams {
        l_g: 0.45,
        l_sigma2: 0.3,
        ..ok
    };
    unsafe {
        assert_eq!(
            mscbf_validate(&bad, &mut gaps),
            MscbfStatus::DissipativityGap
        );
    }
    assert!((gaps.xi + 0.08).abs() < 1e-12);
    assert_eq!(gaps.admissible, 0);
    assert!(last_error().contains("xi"));

    let neg = MscbfParams { mu: -1.0, ..ok };
    unsafe {
        assert_eq!(
            mscbf_validate(&neg, &mut gaps),
            MscbfStatus::InvalidArgument
        );
    }
}

#[test]
fn monotonicity_shift() {
    let mut eta = 0.0;
    unsafe {
        assert_eq!(
            mscbf_monotonicity_constant(1.0, 1.0, 5.0, &mut eta),
            MscbfStatus::Ok
        );
        assert!((eta - 0.125).abs() < 1e-15);
        assert_eq!(
            mscbf_monotonicity_constant(1.0, 1.0, 3.0, &mut eta),
            MscbfStatus::MonotonicityDomain
        );
        assert_eq!(
            mscbf_monotonicity_constant(1.0, 0.0, 4.0, &mut eta),
            MscbfStatus::MonotonicityDomain
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mscbf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mscbf.h")).unwrap();
    assert!(header.contains("#ifndef MSCBF_H"));
    assert!(header.contains("typedef struct MscbfBasis MscbfBasis;"));
    assert!(header.contains("MSCBF_STATUS_DISSIPATIVITY_GAP = 6"));
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}
