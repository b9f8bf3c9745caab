use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::basis::StokesBasis;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real divergence-free velocity field stored as complex amplitudes over a
/// [`StokesBasis`]. Amplitudes satisfy `c(-k) = conj(c(k))`.
#[derive(Clone, Debug)]
pub struct VelocityField {
    basis: Arc<StokesBasis>,
    coeffs: Vec<Complex64>,
}

impl PartialEq for VelocityField {
    fn eq(&self, other: &Self) -> bool {
        self.basis.same_as(&other.basis) && self.coeffs == other.coeffs
    }
}

impl VelocityField {
    pub fn zeros(basis: &Arc<StokesBasis>) -> Self {
        VelocityField {
            basis: Arc::clone(basis),
            coeffs: vec![ZERO; basis.len()],
        }
    }

    /// Wraps raw amplitudes, rejecting wrong lengths and non-real fields.
    pub fn from_coeffs(basis: &Arc<StokesBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        let field = VelocityField {
            basis: Arc::clone(basis),
            coeffs,
        };
        let scale = field.h_norm().max(1.0);
        if field.hermitian_defect() > 1e-12 * scale {
            return Err(Error::InvalidArgument(
                "coefficients violate c(-k) = conj(c(k))".into(),
            ));
        }
        Ok(field)
    }

    pub(crate) fn from_raw(basis: &Arc<StokesBasis>, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), basis.len());
        VelocityField {
            basis: Arc::clone(basis),
            coeffs,
        }
    }

    /// Real unit-norm field `(e_k + e_{-k}) / sqrt(2)`; `A` acts on it as `lambda_k`.
    pub fn unit_mode(basis: &Arc<StokesBasis>, k: [i32; 2]) -> Result<Self> {
        Self::unit_mode_phase(basis, k, Complex64::new(FRAC_1_SQRT_2, 0.0))
    }

    /// Real unit-norm field `i (e_k - e_{-k}) / sqrt(2)`, the quadrature partner of
    /// [`VelocityField::unit_mode`].
    pub fn unit_mode_sin(basis: &Arc<StokesBasis>, k: [i32; 2]) -> Result<Self> {
        Self::unit_mode_phase(basis, k, Complex64::new(0.0, FRAC_1_SQRT_2))
    }

    fn unit_mode_phase(basis: &Arc<StokesBasis>, k: [i32; 2], amp: Complex64) -> Result<Self> {
        let i = basis
            .index_of(k)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k:?} not in basis")))?;
        let j = basis.partner(i);
        let mut f = Self::zeros(basis);
        f.coeffs[i] = amp;
        f.coeffs[j] = amp.conj();
        Ok(f)
    }

    /// Gaussian field with amplitudes proportional to `scale / lambda_k`.
    pub fn random_regular<R: Rng + ?Sized>(
        basis: &Arc<StokesBasis>,
        rng: &mut R,
        scale: f64,
    ) -> Self {
        let mut f = Self::zeros(basis);
        for &i in basis.representatives() {
            let lam = basis.modes()[i].lambda;
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let c = Complex64::new(a, b) * (scale * FRAC_1_SQRT_2 / lam);
            f.coeffs[i] = c;
            f.coeffs[basis.partner(i)] = c.conj();
        }
        f
    }

    pub fn basis(&self) -> &Arc<StokesBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn ensure_same_basis(&self, other: &VelocityField) -> Result<()> {
        if self.basis.same_as(&other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// `max_k |c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.basis.partner(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Copies each representative's conjugate onto its partner.
    pub fn symmetrize(&mut self) {
        for &i in self.basis.representatives() {
            let j = self.basis.partner(i);
            self.coeffs[j] = self.coeffs[i].conj();
        }
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    pub fn v_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.modes())
            .map(|(c, m)| m.lambda * c.norm_sqr())
            .sum()
    }

    pub fn v_norm(&self) -> f64 {
        self.v_norm_sq().sqrt()
    }

    /// `L^2` inner product; real for real fields.
    pub fn inner(&self, other: &VelocityField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn distance(&self, other: &VelocityField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &VelocityField) {
        for (c, d) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += d * a;
        }
    }

    pub fn sub(&self, other: &VelocityField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &VelocityField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Real vector field sampled on the `M x M` collocation grid, row-major in
/// `(x1, x2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub size: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl GridField {
    pub fn from_fn<F>(size: usize, f: F) -> Self
    where
        F: Fn(f64, f64) -> [f64; 2],
    {
        let h = 2.0 * std::f64::consts::PI / size as f64;
        let mut u1 = Vec::with_capacity(size * size);
        let mut u2 = Vec::with_capacity(size * size);
        for a in 0..size {
            for b in 0..size {
                let [v1, v2] = f(a as f64 * h, b as f64 * h);
                u1.push(v1);
                u2.push(v2);
            }
        }
        GridField { size, u1, u2 }
    }

    pub(crate) fn from_packed(size: usize, packed: &[Complex64]) -> Self {
        GridField {
            size,
            u1: packed.iter().map(|z| z.re).collect(),
            u2: packed.iter().map(|z| z.im).collect(),
        }
    }

    pub(crate) fn packed(&self) -> Vec<Complex64> {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }
}
