//! Built-in coupling families for the drift terms `f`, `g` and the noise
//! coefficients `sigma1`, `sigma2`.
//!
//! Every family is separable as
//!
//! ```text
//! f(x, y) = f_x x + f_y phi(y)
//! g(x, y) = g_x psi(x) - d y + g_y phi(y)
//! ```
//!
//! with `phi, psi` either the identity or the coefficient-wise `tanh`
//! (applied to real and imaginary parts separately). Noise coefficients are
//! diagonal multipliers in the real cosine/sine basis, composed with `Q^{1/2}`.

use num_complex::Complex64;

use super::field::VelocityField;
use crate::error::{Error, Result};

/// Per-mode real factors applied to the real and imaginary parts of a
/// Wiener increment. Partners `k`, `-k` share the same factors.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMultiplier {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl DiagonalMultiplier {
    pub fn constant(len: usize, c: f64) -> Self {
        DiagonalMultiplier {
            re: vec![c; len],
            im: vec![c; len],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Mode-wise product with an increment.
    pub fn apply(&self, dw: &[Complex64], out: &mut [Complex64]) {
        for (((o, w), a), b) in out.iter_mut().zip(dw).zip(&self.re).zip(&self.im) {
            *o = Complex64::new(a * w.re, b * w.im);
        }
    }

    /// `||sigma||^2_{L_Q} = sum_k q_k (m_re^2 + m_im^2) / 2`.
    pub fn hs_norm_sq(&self, q: &[f64]) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .zip(q)
            .map(|((a, b), q)| q * 0.5 * (a * a + b * b))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Component {
    F,
    G,
    Sigma1,
    Sigma2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CouplingValue {
    Field(VelocityField),
    Multiplier(DiagonalMultiplier),
}

/// `f = f_x x + f_y y`, `g = g_x x - d y`, constant noise. The frozen
/// equation is an Ornstein-Uhlenbeck process when `beta = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearCoupling {
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_damp: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Saturated drifts with `x`- and `y`-dependent multiplicative noise:
/// `sigma1(x) = s1_0 + s1_x tanh(x)`, `sigma2(x, y) = s2_0 + s2_x tanh(x) + s2_y tanh(y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TanhCoupling {
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_damp: f64,
    pub g_y: f64,
    pub s1_0: f64,
    pub s1_x: f64,
    pub s2_0: f64,
    pub s2_x: f64,
    pub s2_y: f64,
}

/// Saturated drifts with additive noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantSigmaCoupling {
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_damp: f64,
    pub g_y: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingFamily {
    Linear(LinearCoupling),
    Tanh(TanhCoupling),
    ConstantSigma(ConstantSigmaCoupling),
}

/// Lipschitz and growth constants certified for a coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingConstants {
    /// Common Lipschitz constant in `x` (and in `y` for `f`).
    pub c_lip: f64,
    /// Lipschitz constant in `y` of `g` after removing the dissipative part `-d y`.
    pub l_g: f64,
    /// The dissipative part `d`.
    pub g_damp: f64,
    pub l_sigma2: f64,
}

/// A validated coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSpec {
    family: CouplingFamily,
}

fn sat(z: Complex64) -> Complex64 {
    Complex64::new(z.re.tanh(), z.im.tanh())
}

impl CouplingSpec {
    pub fn new(family: CouplingFamily) -> Result<Self> {
        let (vals, damp): (Vec<f64>, f64) = match family {
            CouplingFamily::Linear(c) => (
                vec![c.f_x, c.f_y, c.g_x, c.g_damp, c.sigma1, c.sigma2],
                c.g_damp,
            ),
            CouplingFamily::Tanh(c) => (
                vec![
                    c.f_x, c.f_y, c.g_x, c.g_damp, c.g_y, c.s1_0, c.s1_x, c.s2_0, c.s2_x, c.s2_y,
                ],
                c.g_damp,
            ),
            CouplingFamily::ConstantSigma(c) => (
                vec![c.f_x, c.f_y, c.g_x, c.g_damp, c.g_y, c.sigma1, c.sigma2],
                c.g_damp,
            ),
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoupling("non-finite coefficient".into()));
        }
        if damp < 0.0 {
            return Err(Error::InvalidCoupling(format!(
                "dissipative coefficient d = {damp} must be >= 0"
            )));
        }
        Ok(CouplingSpec { family })
    }

    pub fn linear(c: LinearCoupling) -> Result<Self> {
        Self::new(CouplingFamily::Linear(c))
    }

    pub fn tanh(c: TanhCoupling) -> Result<Self> {
        Self::new(CouplingFamily::Tanh(c))
    }

    pub fn constant_sigma(c: ConstantSigmaCoupling) -> Result<Self> {
        Self::new(CouplingFamily::ConstantSigma(c))
    }

    /// Every coupling switched off: `f = g = 0`, no noise.
    pub fn zero() -> Self {
        CouplingSpec {
            family: CouplingFamily::Linear(LinearCoupling {
                f_x: 0.0,
                f_y: 0.0,
                g_x: 0.0,
                g_damp: 0.0,
                sigma1: 0.0,
                sigma2: 0.0,
            }),
        }
    }

    pub fn family(&self) -> &CouplingFamily {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            CouplingFamily::Linear(_) => "linear",
            CouplingFamily::Tanh(_) => "tanh",
            CouplingFamily::ConstantSigma(_) => "constant_sigma",
        }
    }

    pub fn as_linear(&self) -> Option<&LinearCoupling> {
        match &self.family {
            CouplingFamily::Linear(c) => Some(c),
            _ => None,
        }
    }

    /// `(f_x, f_y)`.
    pub fn f_coeffs(&self) -> (f64, f64) {
        match self.family {
            CouplingFamily::Linear(c) => (c.f_x, c.f_y),
            CouplingFamily::Tanh(c) => (c.f_x, c.f_y),
            CouplingFamily::ConstantSigma(c) => (c.f_x, c.f_y),
        }
    }

    pub fn f_depends_on_y(&self) -> bool {
        self.f_coeffs().1 != 0.0
    }

    /// The dissipative part `d` of `g = ... - d y`, integrated exactly by the steppers.
    pub fn g_damp(&self) -> f64 {
        match self.family {
            CouplingFamily::Linear(c) => c.g_damp,
            CouplingFamily::Tanh(c) => c.g_damp,
            CouplingFamily::ConstantSigma(c) => c.g_damp,
        }
    }

    fn saturating(&self) -> bool {
        !matches!(self.family, CouplingFamily::Linear(_))
    }

    /// `phi(y)` entering `f` and `g`.
    pub(crate) fn phi(&self, z: Complex64) -> Complex64 {
        if self.saturating() {
            sat(z)
        } else {
            z
        }
    }

    /// Certified constants; `q1_max`, `q2_max` are the largest covariance eigenvalues.
    pub fn constants(&self, q1_max: f64, q2_max: f64) -> CouplingConstants {
        let (s1, s2) = (q1_max.sqrt(), q2_max.sqrt());
        match self.family {
            CouplingFamily::Linear(c) => CouplingConstants {
                c_lip: c.f_x.abs().max(c.f_y.abs()).max(c.g_x.abs()),
                l_g: 0.0,
                g_damp: c.g_damp,
                l_sigma2: 0.0,
            },
            CouplingFamily::Tanh(c) => CouplingConstants {
                c_lip: [
                    c.f_x.abs(),
                    c.f_y.abs(),
                    c.g_x.abs(),
                    c.s1_x.abs() * s1,
                    c.s2_x.abs() * s2,
                ]
                .into_iter()
                .fold(0.0, f64::max),
                l_g: c.g_y.abs(),
                g_damp: c.g_damp,
                l_sigma2: c.s2_y.abs() * s2,
            },
            CouplingFamily::ConstantSigma(c) => CouplingConstants {
                c_lip: c.f_x.abs().max(c.f_y.abs()).max(c.g_x.abs()),
                l_g: c.g_y.abs(),
                g_damp: c.g_damp,
                l_sigma2: 0.0,
            },
        }
    }

    /// Bound on `|sigma2 multiplier|`, so `||sigma2||_{L_Q} <= bound * sqrt(Tr Q)`.
    pub fn sigma2_bound(&self) -> f64 {
        match self.family {
            CouplingFamily::Linear(c) => c.sigma2.abs(),
            CouplingFamily::Tanh(c) => c.s2_0.abs() + c.s2_x.abs() + c.s2_y.abs(),
            CouplingFamily::ConstantSigma(c) => c.sigma2.abs(),
        }
    }

    pub fn f(&self, x: &VelocityField, y: &VelocityField) -> Result<VelocityField> {
        x.ensure_same_basis(y)?;
        let (fx, fy) = self.f_coeffs();
        let coeffs = x
            .coeffs()
            .iter()
            .zip(y.coeffs())
            .map(|(a, b)| a * fx + self.phi(*b) * fy)
            .collect();
        Ok(VelocityField::from_raw(x.basis(), coeffs))
    }

    pub fn g(&self, x: &VelocityField, y: &VelocityField) -> Result<VelocityField> {
        x.ensure_same_basis(y)?;
        let mut out = VelocityField::zeros(x.basis());
        self.g_x_part(x.coeffs(), out.coeffs_mut());
        for (o, b) in out.coeffs_mut().iter_mut().zip(y.coeffs()) {
            *o += self.g_y_remainder(*b) - b * self.g_damp();
        }
        Ok(out)
    }

    /// `x`-dependent part of `g`.
    pub(crate) fn g_x_part(&self, x: &[Complex64], out: &mut [Complex64]) {
        match self.family {
            CouplingFamily::Linear(c) => {
                for (o, a) in out.iter_mut().zip(x) {
                    *o = a * c.g_x;
                }
            }
            CouplingFamily::Tanh(TanhCoupling { g_x, .. })
            | CouplingFamily::ConstantSigma(ConstantSigmaCoupling { g_x, .. }) => {
                for (o, a) in out.iter_mut().zip(x) {
                    *o = sat(*a) * g_x;
                }
            }
        }
    }

    /// `g_y phi(y)` for one coefficient (zero for the linear family).
    #[inline]
    pub(crate) fn g_y_remainder(&self, y: Complex64) -> Complex64 {
        match self.family {
            CouplingFamily::Linear(_) => Complex64::new(0.0, 0.0),
            CouplingFamily::Tanh(c) => sat(y) * c.g_y,
            CouplingFamily::ConstantSigma(c) => sat(y) * c.g_y,
        }
    }

    pub(crate) fn g_has_y_remainder(&self) -> bool {
        match self.family {
            CouplingFamily::Linear(_) => false,
            CouplingFamily::Tanh(c) => c.g_y != 0.0,
            CouplingFamily::ConstantSigma(c) => c.g_y != 0.0,
        }
    }

    pub fn sigma1(&self, x: &VelocityField) -> DiagonalMultiplier {
        let n = x.coeffs().len();
        match self.family {
            CouplingFamily::Linear(c) => DiagonalMultiplier::constant(n, c.sigma1),
            CouplingFamily::ConstantSigma(c) => DiagonalMultiplier::constant(n, c.sigma1),
            CouplingFamily::Tanh(c) => {
                let mut m = DiagonalMultiplier::constant(n, c.s1_0);
                add_saturated(&mut m, x, c.s1_x);
                m
            }
        }
    }

    pub fn sigma2(&self, x: &VelocityField, y: &VelocityField) -> Result<DiagonalMultiplier> {
        x.ensure_same_basis(y)?;
        let mut m = self.sigma2_x_part(x);
        self.sigma2_add_y(&mut m, y);
        Ok(m)
    }

    /// `x`-dependent part of `sigma2`, constant part included.
    pub(crate) fn sigma2_x_part(&self, x: &VelocityField) -> DiagonalMultiplier {
        let n = x.coeffs().len();
        match self.family {
            CouplingFamily::Linear(c) => DiagonalMultiplier::constant(n, c.sigma2),
            CouplingFamily::ConstantSigma(c) => DiagonalMultiplier::constant(n, c.sigma2),
            CouplingFamily::Tanh(c) => {
                let mut m = DiagonalMultiplier::constant(n, c.s2_0);
                add_saturated(&mut m, x, c.s2_x);
                m
            }
        }
    }

    pub(crate) fn sigma2_depends_on_y(&self) -> bool {
        matches!(self.family, CouplingFamily::Tanh(c) if c.s2_y != 0.0)
    }

    /// Adds the `y`-dependent part of `sigma2` onto `m`.
    pub(crate) fn sigma2_add_y(&self, m: &mut DiagonalMultiplier, y: &VelocityField) {
        if let CouplingFamily::Tanh(c) = self.family {
            add_saturated(m, y, c.s2_y);
        }
    }

    /// Writes `base + s2_y tanh(y)` into `out` using only representative coefficients.
    pub(crate) fn sigma2_with_y(
        &self,
        base: &DiagonalMultiplier,
        y: &[Complex64],
        reps: &[usize],
        partner: impl Fn(usize) -> usize,
        out: &mut DiagonalMultiplier,
    ) {
        let s2_y = match self.family {
            CouplingFamily::Tanh(c) => c.s2_y,
            _ => 0.0,
        };
        for &i in reps {
            let j = partner(i);
            let a = base.re[i] + s2_y * y[i].re.tanh();
            let b = base.im[i] + s2_y * y[i].im.tanh();
            out.re[i] = a;
            out.im[i] = b;
            out.re[j] = a;
            out.im[j] = b;
        }
    }

    pub fn eval(
        &self,
        which: Component,
        x: &VelocityField,
        y: &VelocityField,
    ) -> Result<CouplingValue> {
        Ok(match which {
            Component::F => CouplingValue::Field(self.f(x, y)?),
            Component::G => CouplingValue::Field(self.g(x, y)?),
            Component::Sigma1 => CouplingValue::Multiplier(self.sigma1(x)),
            Component::Sigma2 => CouplingValue::Multiplier(self.sigma2(x, y)?),
        })
    }
}

/// Adds `c * tanh(.)` of each representative's real/imaginary part to both partners.
fn add_saturated(m: &mut DiagonalMultiplier, x: &VelocityField, c: f64) {
    if c == 0.0 {
        return;
    }
    let b = x.basis();
    let xc = x.coeffs();
    for &i in b.representatives() {
        let j = b.partner(i);
        let a = c * xc[i].re.tanh();
        let s = c * xc[i].im.tanh();
        m.re[i] += a;
        m.im[i] += s;
        m.re[j] += a;
        m.im[j] += s;
    }
}

/// Evaluates one coupling component at `(x, y)`.
pub fn eval_coupling(
    spec: &CouplingSpec,
    which: Component,
    x: &VelocityField,
    y: &VelocityField,
) -> Result<CouplingValue> {
    spec.eval(which, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::basis::StokesBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tanh_spec() -> CouplingSpec {
        CouplingSpec::tanh(TanhCoupling {
            f_x: -0.5,
            f_y: 1.0,
            g_x: 1.0,
            g_damp: 1.0,
            g_y: 0.3,
            s1_0: 0.2,
            s1_x: 0.1,
            s2_0: 0.5,
            s2_x: 0.2,
            s2_y: 0.25,
        })
        .unwrap()
    }

    #[test]
    fn linear_f_at_zero_y() {
        let b = StokesBasis::new(2, 12).unwrap();
        let spec = CouplingSpec::linear(LinearCoupling {
            f_x: 2.5,
            f_y: -1.0,
            g_x: 1.0,
            g_damp: 1.0,
            sigma1: 0.1,
            sigma2: 0.2,
        })
        .unwrap();
        let e1 = VelocityField::unit_mode(&b, [1, 0]).unwrap();
        let f = spec.f(&e1, &VelocityField::zeros(&b)).unwrap();
        assert_eq!(f, e1.scaled(2.5));
    }

    #[test]
    fn tanh_sigma2_at_zero_is_constant_part() {
        let b = StokesBasis::new(2, 12).unwrap();
        let spec = tanh_spec();
        let z = VelocityField::zeros(&b);
        let m = spec.sigma2(&z, &z).unwrap();
        assert_eq!(m, DiagonalMultiplier::constant(b.len(), 0.5));
    }

    #[test]
    fn rejects_negative_damping_and_nan() {
        let mut c = LinearCoupling {
            f_x: 0.0,
            f_y: 1.0,
            g_x: 1.0,
            g_damp: -1.0,
            sigma1: 0.0,
            sigma2: 0.0,
        };
        assert!(CouplingSpec::linear(c).is_err());
        c.g_damp = 1.0;
        c.f_x = f64::NAN;
        assert!(CouplingSpec::linear(c).is_err());
    }

    /// Sampled difference quotients never exceed the certified constants.
    #[test]
    fn sampled_pairs_respect_certified_constants() {
        let b = StokesBasis::new(4, 24).unwrap();
        let q: Vec<f64> = b.modes().iter().map(|m| m.lambda.powi(-2)).collect();
        let qmax = q.iter().cloned().fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for spec in [
            tanh_spec(),
            CouplingSpec::linear(LinearCoupling {
                f_x: 0.7,
                f_y: -1.3,
                g_x: 0.9,
                g_damp: 2.0,
                sigma1: 0.3,
                sigma2: 0.4,
            })
            .unwrap(),
        ] {
            let k = spec.constants(qmax, qmax);
            for _ in 0..10_000 {
                let s1 = 10f64.powf(rng.random_range(-1.0..1.5));
                let s2 = 10f64.powf(rng.random_range(-2.0..0.0));
                let x1 = VelocityField::random_regular(&b, &mut rng, s1);
                let y1 = VelocityField::random_regular(&b, &mut rng, s1);
                let mut x2 = x1.clone();
                x2.axpy(1.0, &VelocityField::random_regular(&b, &mut rng, s2));
                let mut y2 = y1.clone();
                y2.axpy(1.0, &VelocityField::random_regular(&b, &mut rng, s2));
                let dx = x1.distance(&x2);
                let dy = y1.distance(&y2);

                let dg = spec
                    .g(&x1, &y1)
                    .unwrap()
                    .distance(&spec.g(&x2, &y2).unwrap());
                assert!(dg <= k.c_lip * dx + (k.l_g + k.g_damp) * dy + 1e-12);
                let df = spec
                    .f(&x1, &y1)
                    .unwrap()
                    .distance(&spec.f(&x2, &y2).unwrap());
                assert!(df <= k.c_lip * (dx + dy) + 1e-12);

                let m1 = spec.sigma2(&x1, &y1).unwrap();
                let m2 = spec.sigma2(&x2, &y2).unwrap();
                let diff = DiagonalMultiplier {
                    re: m1.re.iter().zip(&m2.re).map(|(a, b)| a - b).collect(),
                    im: m1.im.iter().zip(&m2.im).map(|(a, b)| a - b).collect(),
                };
                let ds = diff.hs_norm_sq(&q).sqrt();
                assert!(ds <= k.c_lip * dx + k.l_sigma2 * dy + 1e-12);
                let bound = spec.sigma2_bound() * q.iter().sum::<f64>().sqrt();
                assert!(m1.hs_norm_sq(&q).sqrt() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn multipliers_are_shared_by_partners() {
        let b = StokesBasis::new(3, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = VelocityField::random_regular(&b, &mut rng, 3.0);
        let y = VelocityField::random_regular(&b, &mut rng, 3.0);
        let m = tanh_spec().sigma2(&x, &y).unwrap();
        for i in 0..b.len() {
            assert_eq!(m.re[i], m.re[b.partner(i)]);
            assert_eq!(m.im[i], m.im[b.partner(i)]);
        }
        let f = tanh_spec().f(&x, &y).unwrap();
        assert_eq!(f.hermitian_defect(), 0.0);
    }
}
