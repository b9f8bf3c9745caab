use num_complex::Complex64;

use super::basis::{damping_order, StokesBasis};
use super::field::{GridField, VelocityField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    H,
    V,
    Lp(f64),
}

/// Stokes operator: multiplies each mode by `lambda_k`.
pub fn apply_stokes(u: &VelocityField) -> VelocityField {
    let coeffs = u
        .coeffs()
        .iter()
        .zip(u.basis().modes())
        .map(|(c, m)| c * m.lambda)
        .collect();
    VelocityField::from_raw(u.basis(), coeffs)
}

/// Physical values of `u` on the collocation grid.
pub fn to_grid(u: &VelocityField) -> GridField {
    let b = u.basis();
    let packed = synthesize_field(b, u.coeffs());
    GridField::from_packed(b.grid_size(), &packed)
}

fn synthesize_field(b: &StokesBasis, c: &[Complex64]) -> Vec<Complex64> {
    let modes = b.modes();
    b.synthesize(|i| {
        let p = modes[i].polarization;
        [c[i] * p[0], c[i] * p[1]]
    })
}

/// Packed values of `d_dir u` on the grid.
fn synthesize_derivative(b: &StokesBasis, c: &[Complex64], dir: usize) -> Vec<Complex64> {
    let modes = b.modes();
    b.synthesize(|i| {
        let p = modes[i].polarization;
        let ik = Complex64::new(0.0, modes[i].k[dir] as f64);
        [c[i] * ik * p[0], c[i] * ik * p[1]]
    })
}

/// Orthogonal projection onto the retained divergence-free modes.
pub fn leray_project(basis: &std::sync::Arc<StokesBasis>, v: &GridField) -> Result<VelocityField> {
    let n = basis.grid_size();
    if v.size != n || v.u1.len() != n * n || v.u2.len() != n * n {
        return Err(Error::GridMismatch {
            expected: n,
            got: v.size,
        });
    }
    let coeffs = basis.analyze(v.packed());
    Ok(VelocityField::from_raw(basis, coeffs))
}

/// `B(u, v) = P_H((u . grad) v)`, evaluated pseudo-spectrally.
pub fn apply_convection(u: &VelocityField, v: &VelocityField) -> Result<VelocityField> {
    u.ensure_same_basis(v)?;
    let b = u.basis();
    let uu = synthesize_field(b, u.coeffs());
    let d1 = synthesize_derivative(b, v.coeffs(), 0);
    let d2 = synthesize_derivative(b, v.coeffs(), 1);
    let prod: Vec<Complex64> = uu
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(w, (a, c))| {
            // packed: a = d1 v1 + i d1 v2, c = d2 v1 + i d2 v2
            *a * w.re + *c * w.im
        })
        .collect();
    Ok(VelocityField::from_raw(b, b.analyze(prod)))
}

/// `C(u) = P_H(|u|^{r-1} u)` via collocation.
pub fn apply_damping(u: &VelocityField, r: f64) -> Result<VelocityField> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "damping exponent r = {r} < 1"
        )));
    }
    let b = u.basis();
    b.check_order(damping_order(r))?;
    if r == 1.0 {
        return Ok(u.clone());
    }
    Ok(VelocityField::from_raw(b, damping_coeffs(b, u.coeffs(), r)))
}

pub(crate) fn damping_coeffs(b: &StokesBasis, c: &[Complex64], r: f64) -> Vec<Complex64> {
    let mut g = synthesize_field(b, c);
    let e = r - 1.0;
    for z in &mut g {
        let m = z.norm_sqr();
        // |u|^{r-1} = (|u|^2)^{(r-1)/2}
        let w = if e == 2.0 { m } else { m.powf(0.5 * e) };
        *z *= w;
    }
    b.analyze(g)
}

/// `G(u) = mu A u + B(u, u) + beta C(u)`.
pub fn apply_g(u: &VelocityField, mu: f64, beta: f64, r: f64) -> Result<VelocityField> {
    let mut out = apply_stokes(u);
    out.scale(mu);
    out.axpy(1.0, &apply_convection(u, u)?);
    if beta != 0.0 {
        out.axpy(beta, &apply_damping(u, r)?);
    }
    Ok(out)
}

/// `int |u|^p dx` by collocation quadrature.
pub fn lp_integral(u: &VelocityField, p: f64) -> f64 {
    let b = u.basis();
    let g = synthesize_field(b, u.coeffs());
    let s: f64 = g.iter().map(|z| z.norm_sqr().powf(0.5 * p)).sum();
    s * b.cell_area()
}

pub fn norm(u: &VelocityField, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::H => Ok(u.h_norm()),
        NormKind::V => Ok(u.v_norm()),
        NormKind::Lp(p) if p >= 1.0 => Ok(lp_integral(u, p).powf(1.0 / p)),
        NormKind::Lp(p) => Err(Error::InvalidArgument(format!(
            "L^p norm needs p >= 1, got {p}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::basis::StokesBasis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn basis() -> Arc<StokesBasis> {
        StokesBasis::new(4, 24).unwrap()
    }

    fn assert_close(a: &VelocityField, b: &VelocityField, tol: f64) {
        let d = a.distance(b);
        assert!(d <= tol, "distance {d} > {tol}");
    }

    #[test]
    fn stokes_multiplies_by_eigenvalue() {
        let b = basis();
        let e10 = VelocityField::unit_mode(&b, [1, 0]).unwrap();
        assert_close(&apply_stokes(&e10), &e10, 0.0);
        let z = VelocityField::zeros(&b);
        assert_eq!(apply_stokes(&z), z);

        let e11 = VelocityField::unit_mode(&b, [1, 1]).unwrap();
        let e20 = VelocityField::unit_mode(&b, [2, 0]).unwrap();
        let mut expect = e11.scaled(2.0);
        expect.axpy(4.0, &e20);
        assert_close(&apply_stokes(&e11.add(&e20)), &expect, 1e-15);
    }

    #[test]
    fn stokes_quadratic_form_is_v_norm() {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = VelocityField::random_regular(&b, &mut rng, 2.0);
        assert!((apply_stokes(&u).inner(&u) - u.v_norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn grid_round_trip_is_identity() {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = VelocityField::random_regular(&b, &mut rng, 1.0);
        let back = leray_project(&b, &to_grid(&u)).unwrap();
        assert_close(&back, &u, 1e-13);
    }

    #[test]
    fn leray_annihilates_gradients() {
        let b = basis();
        // phi = sin(x1) cos(2 x2) + cos(3 x1 + x2)
        let g = GridField::from_fn(24, |x1, x2| {
            [
                x1.cos() * (2.0 * x2).cos() - 3.0 * (3.0 * x1 + x2).sin(),
                -2.0 * x1.sin() * (2.0 * x2).sin() - (3.0 * x1 + x2).sin(),
            ]
        });
        let p = leray_project(&b, &g).unwrap();
        assert!(p.h_norm() < 1e-13);
    }

    #[test]
    fn leray_recovers_mode_from_mode_plus_gradient() {
        let b = basis();
        let e10 = VelocityField::unit_mode(&b, [1, 0]).unwrap();
        let eg = to_grid(&e10);
        // e_(1,0) real form: (0, sqrt2 cos x1 / (2 pi)); add grad sin(x1) = (cos x1, 0)
        let g = GridField::from_fn(24, |x1, _| [x1.cos(), 0.0]);
        let v = GridField {
            size: 24,
            u1: eg.u1.iter().zip(&g.u1).map(|(a, c)| a + c).collect(),
            u2: eg.u2.clone(),
        };
        for (idx, val) in eg.u2.iter().enumerate() {
            let x1 = b.node(idx / 24);
            assert!((val - 2f64.sqrt() * x1.cos() / (2.0 * PI)).abs() < 1e-14);
        }
        assert_close(&leray_project(&b, &v).unwrap(), &e10, 1e-13);
    }

    #[test]
    fn leray_is_idempotent_and_self_adjoint() {
        let b = basis();
        let v = GridField::from_fn(24, |x1, x2| {
            [
                (x1 + 2.0 * x2).sin() + x2.cos(),
                (3.0 * x1).cos() * x2.sin(),
            ]
        });
        let w = GridField::from_fn(24, |x1, x2| {
            [(2.0 * x1).cos() * (x2).sin(), (x1 - x2).cos() + 0.3]
        });
        let pv = leray_project(&b, &v).unwrap();
        let ppv = leray_project(&b, &to_grid(&pv)).unwrap();
        assert_close(&ppv, &pv, 1e-13);

        // <P v, w> against <v, P w>, both as grid quadratures
        let pw = leray_project(&b, &w).unwrap();
        let quad = |a: &GridField, c: &GridField| -> f64 {
            a.u1.iter().zip(&c.u1).map(|(x, y)| x * y).sum::<f64>()
                + a.u2.iter().zip(&c.u2).map(|(x, y)| x * y).sum::<f64>()
        };
        let lhs = quad(&to_grid(&pv), &w) * b.cell_area();
        let rhs = quad(&v, &to_grid(&pw)) * b.cell_area();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        assert!((pv.inner(&pw) - lhs).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let b = basis();
        let g = GridField::from_fn(16, |_, _| [0.0, 0.0]);
        assert!(matches!(
            leray_project(&b, &g),
            Err(Error::GridMismatch {
                expected: 24,
                got: 16
            })
        ));
    }

    #[test]
    fn convection_of_two_single_modes_matches_hand_expansion() {
        // u = e_(1,0) = (0, sqrt2 cos x1/(2pi)), v = e_(0,1) = (-sqrt2 cos x2/(2pi), 0)
        // (u.grad) v = (cos x1 sin x2 / (2 pi^2), 0)
        //            = 1/(2pi^2) * 1/(4i) * (e^{i(x1+x2)} + e^{i(-x1+x2)} - e^{i(x1-x2)} - e^{-i(x1+x2)}) e1
        // <w, e_k> = p_k[0] * s_k * (-i) / (4 pi)
        let b = basis();
        let u = VelocityField::unit_mode(&b, [1, 0]).unwrap();
        let v = VelocityField::unit_mode(&b, [0, 1]).unwrap();
        let out = apply_convection(&u, &v).unwrap();

        let mut expect = VelocityField::zeros(&b);
        for (k, s) in [
            ([1, 1], 1.0),
            ([-1, 1], 1.0),
            ([1, -1], -1.0),
            ([-1, -1], -1.0),
        ] {
            let i = b.index_of(k).unwrap();
            let p0 = b.modes()[i].polarization[0];
            expect.coeffs_mut()[i] = Complex64::new(0.0, -p0 * s / (4.0 * PI));
        }
        assert_close(&out, &expect, 1e-15);
        // half the energy of (cos x1 sin x2 / (2 pi^2), 0) is divergence-free
        assert!((out.h_norm() - 1.0 / (2.0 * 2f64.sqrt() * PI)).abs() < 1e-15);
    }

    #[test]
    fn convection_vanishes_for_zero_transport() {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = VelocityField::random_regular(&b, &mut rng, 1.0);
        let out = apply_convection(&VelocityField::zeros(&b), &v).unwrap();
        assert_eq!(out.h_norm(), 0.0);
    }

    #[test]
    fn convection_is_skew_in_last_two_slots() {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u = VelocityField::random_regular(&b, &mut rng, 3.0);
            let v = VelocityField::random_regular(&b, &mut rng, 3.0);
            let w = VelocityField::random_regular(&b, &mut rng, 3.0);
            let scale = (1.0 + u.h_norm()) * (1.0 + v.v_norm()).powi(2);
            let cancel = apply_convection(&u, &v).unwrap().inner(&v);
            assert!(cancel.abs() <= 1e-10 * scale);
            let a = apply_convection(&u, &v).unwrap().inner(&w);
            let c = apply_convection(&u, &w).unwrap().inner(&v);
            assert!((a + c).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn convection_rejects_mixed_bases() {
        let b1 = basis();
        let b2 = StokesBasis::new(2, 12).unwrap();
        let u = VelocityField::zeros(&b1);
        let v = VelocityField::zeros(&b2);
        assert!(matches!(
            apply_convection(&u, &v),
            Err(Error::BasisMismatch)
        ));
    }

    #[test]
    fn damping_edge_cases() {
        let b = basis();
        let z = VelocityField::zeros(&b);
        assert_eq!(apply_damping(&z, 3.0).unwrap().h_norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = VelocityField::random_regular(&b, &mut rng, 1.0);
        assert_eq!(apply_damping(&u, 1.0).unwrap(), u);
        assert!(matches!(apply_damping(&u, 6.0), Err(Error::Dealias { .. })));
        assert!(apply_damping(&u, 0.5).is_err());
    }

    /// Dense quadrature at 4x resolution, independent of the FFT path.
    fn dense_lp(u: &VelocityField, p: f64, m: usize) -> f64 {
        let b = u.basis();
        let h = 2.0 * PI / m as f64;
        let mut s = 0.0;
        for a in 0..m {
            for c in 0..m {
                let (x1, x2) = (a as f64 * h, c as f64 * h);
                let mut v = [0.0f64; 2];
                for (coef, md) in u.coeffs().iter().zip(b.modes()) {
                    let ph = md.k[0] as f64 * x1 + md.k[1] as f64 * x2;
                    let e = Complex64::new(ph.cos(), ph.sin()) * coef / (2.0 * PI);
                    v[0] += e.re * md.polarization[0];
                    v[1] += e.re * md.polarization[1];
                }
                s += (v[0] * v[0] + v[1] * v[1]).powf(0.5 * p);
            }
        }
        s * h * h
    }

    #[test]
    fn cubic_damping_pairs_to_quartic_quadrature() {
        let b = basis();
        let u = VelocityField::unit_mode(&b, [1, 2]).unwrap().add(
            &VelocityField::unit_mode_sin(&b, [3, -1])
                .unwrap()
                .scaled(0.7),
        );
        let pair = apply_damping(&u, 3.0).unwrap().inner(&u);
        let oracle = dense_lp(&u, 4.0, 96);
        assert!(
            (pair - oracle).abs() < 1e-12 * oracle.max(1.0),
            "{pair} vs {oracle}"
        );
        assert!((lp_integral(&u, 4.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn l2_quadrature_matches_parseval() {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let u = VelocityField::random_regular(&b, &mut rng, 1.5);
            let h = norm(&u, NormKind::H).unwrap();
            let l2 = norm(&u, NormKind::Lp(2.0)).unwrap();
            assert!((h - l2).abs() < 1e-8);
        }
        assert!(norm(&VelocityField::zeros(&b), NormKind::Lp(0.5)).is_err());
    }

    #[test]
    fn damping_pairing_is_nonnegative() {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for r in [1.5, 2.0, 3.0, 4.0, 5.0] {
            let u = VelocityField::random_regular(&b, &mut rng, 2.0);
            assert!(apply_damping(&u, r).unwrap().inner(&u) >= 0.0);
        }
    }
}
