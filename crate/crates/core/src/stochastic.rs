//! Trace-class Q-Wiener increments from counter-based noise streams.
//!
//! A stream is keyed by `(master_seed, channel)`, selects an independent
//! ChaCha sub-stream per realization, and positions the keystream at a block
//! determined by its step counter. Any increment is therefore a pure function
//! of `(seed, realization, channel, counter)` and can be replayed in any order.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fields::{DiagonalMultiplier, StokesBasis, VelocityField};

/// Independent noise sources.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    /// Slow noise `W^{Q1}`.
    Q1,
    /// Fast noise `W^{Q2}`.
    Q2,
    /// Noise of the frozen equation, independent of both.
    Q2Bar,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Q1, Channel::Q2, Channel::Q2Bar];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Q1 => "Q1",
            Channel::Q2 => "Q2",
            Channel::Q2Bar => "Q2bar",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Channel::Q1 => 0x5131,
            Channel::Q2 => 0x5132,
            Channel::Q2Bar => 0x0051_3262,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Distinct 64-bit outputs for distinct inputs (a bijective finalizer).
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for an auxiliary purpose (e.g. random initial data).
pub fn derive_seed(master: u64, purpose: u64) -> u64 {
    splitmix64(master ^ splitmix64(purpose.wrapping_add(0x6a09_e667_f3bc_c909)))
}

/// How the covariance eigenvalues were produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayLaw {
    /// `q_k = scale * lambda_k^{-exponent}`.
    PowerLaw {
        scale: f64,
        exponent: f64,
    },
    Custom,
}

/// Diagonal trace-class covariance `Q e_k = q_k e_k`.
#[derive(Clone, Debug)]
pub struct CovarianceSpec {
    basis: Arc<StokesBasis>,
    q: Vec<f64>,
    law: DecayLaw,
    trace: f64,
}

impl CovarianceSpec {
    pub fn power_law(basis: &Arc<StokesBasis>, scale: f64, exponent: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite() && exponent.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "covariance scale {scale} / exponent {exponent} invalid"
            )));
        }
        let q = basis
            .modes()
            .iter()
            .map(|m| scale * m.lambda.powf(-exponent))
            .collect();
        let mut c = Self::from_eigenvalues(basis, q)?;
        c.law = DecayLaw::PowerLaw { scale, exponent };
        Ok(c)
    }

    /// Default covariance `q_k = lambda_k^{-2}`.
    pub fn default_for(basis: &Arc<StokesBasis>) -> Self {
        Self::power_law(basis, 1.0, 2.0).expect("default covariance is valid")
    }

    /// Eigenvalues per mode; partners must carry equal values.
    pub fn from_eigenvalues(basis: &Arc<StokesBasis>, q: Vec<f64>) -> Result<Self> {
        if q.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} covariance eigenvalues, got {}",
                basis.len(),
                q.len()
            )));
        }
        if q.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(
                "covariance eigenvalues must be finite and >= 0".into(),
            ));
        }
        if (0..q.len()).any(|i| q[i] != q[basis.partner(i)]) {
            return Err(Error::InvalidArgument(
                "covariance eigenvalues must agree on k and -k".into(),
            ));
        }
        let trace = q.iter().sum();
        Ok(CovarianceSpec {
            basis: Arc::clone(basis),
            q,
            law: DecayLaw::Custom,
            trace,
        })
    }

    pub fn basis(&self) -> &Arc<StokesBasis> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.q
    }

    pub fn law(&self) -> DecayLaw {
        self.law
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.q.iter().cloned().fold(0.0, f64::max)
    }

    /// Same eigenvalues multiplied by `s >= 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let q = self.q.iter().map(|v| v * s).collect();
        CovarianceSpec {
            basis: Arc::clone(&self.basis),
            q,
            law: match self.law {
                DecayLaw::PowerLaw { scale, exponent } => DecayLaw::PowerLaw {
                    scale: scale * s,
                    exponent,
                },
                DecayLaw::Custom => DecayLaw::Custom,
            },
            trace: self.trace * s,
        }
    }
}

/// Replayable Gaussian stream for one `(seed, realization, channel)`.
#[derive(Clone)]
pub struct NoiseStream {
    master_seed: u64,
    realization_id: u64,
    channel: Channel,
    counter: u64,
    rng: ChaCha8Rng,
}

impl fmt::Debug for NoiseStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseStream")
            .field("master_seed", &self.master_seed)
            .field("realization_id", &self.realization_id)
            .field("channel", &self.channel)
            .field("counter", &self.counter)
            .finish()
    }
}

impl PartialEq for NoiseStream {
    fn eq(&self, o: &Self) -> bool {
        self.master_seed == o.master_seed
            && self.realization_id == o.realization_id
            && self.channel == o.channel
            && self.counter == o.counter
    }
}

impl NoiseStream {
    pub fn new(master_seed: u64, realization_id: u64, channel: Channel) -> Self {
        let key = splitmix64(master_seed ^ splitmix64(channel.tag()));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(realization_id);
        NoiseStream {
            master_seed,
            realization_id,
            channel,
            counter: 0,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn realization_id(&self) -> u64 {
        self.realization_id
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Repositions the stream at step `counter`.
    pub fn seek(&mut self, counter: u64) {
        self.counter = counter;
    }

    pub(crate) fn require(&self, expected: Channel) -> Result<()> {
        if self.channel == expected {
            Ok(())
        } else {
            Err(Error::WrongChannel {
                expected,
                got: self.channel,
            })
        }
    }

    /// Each counter value owns a disjoint window of `2^32` keystream words.
    fn position(&mut self) {
        self.rng.set_word_pos((self.counter as u128) << 32);
    }

    /// Writes the increment for the current counter into `out` and advances
    /// the counter. `out` must have one entry per basis mode.
    pub(crate) fn fill_increment(&mut self, cov: &CovarianceSpec, dt: f64, out: &mut [Complex64]) {
        let b = &cov.basis;
        if dt == 0.0 {
            out.fill(Complex64::new(0.0, 0.0));
        } else {
            self.position();
            for &i in b.representatives() {
                let s = (0.5 * dt * cov.q[i]).sqrt();
                let a: f64 = self.rng.sample(StandardNormal);
                let c: f64 = self.rng.sample(StandardNormal);
                let z = Complex64::new(a * s, c * s);
                out[i] = z;
                out[b.partner(i)] = z.conj();
            }
        }
        self.counter += 1;
    }
}

/// Draws `Delta W` over a step of length `dt >= 0`: every mode is a centred
/// Gaussian with `E|dW_k|^2 = dt q_k`, Hermitian-symmetric across `k, -k`.
/// Advances the counter by exactly one.
pub fn sample_increment(
    stream: &mut NoiseStream,
    cov: &CovarianceSpec,
    dt: f64,
) -> Result<VelocityField> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} must be >= 0"
        )));
    }
    let mut out = VelocityField::zeros(&cov.basis);
    stream.fill_increment(cov, dt, out.coeffs_mut());
    Ok(out)
}

/// Mode-wise product `sigma dW`.
pub fn apply_diffusion(m: &DiagonalMultiplier, dw: &VelocityField) -> Result<VelocityField> {
    if m.len() != dw.coeffs().len() {
        return Err(Error::BasisMismatch);
    }
    let mut out = VelocityField::zeros(dw.basis());
    m.apply(dw.coeffs(), out.coeffs_mut());
    Ok(out)
}

/// `||sigma||^2_{L_Q}`, the Hilbert-Schmidt norm of `sigma Q^{1/2}`.
pub fn hs_norm_sq(m: &DiagonalMultiplier, cov: &CovarianceSpec) -> Result<f64> {
    if m.len() != cov.q.len() {
        return Err(Error::BasisMismatch);
    }
    Ok(m.hs_norm_sq(&cov.q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Arc<StokesBasis>, CovarianceSpec) {
        let b = StokesBasis::new(4, 24).unwrap();
        let c = CovarianceSpec::default_for(&b);
        (b, c)
    }

    #[test]
    fn zero_step_gives_zero_and_advances() {
        let (b, c) = setup();
        let mut s = NoiseStream::new(1, 0, Channel::Q1);
        let w = sample_increment(&mut s, &c, 0.0).unwrap();
        assert_eq!(w, VelocityField::zeros(&b));
        assert_eq!(s.counter(), 1);
        assert!(sample_increment(&mut s, &c, -1.0).is_err());
    }

    #[test]
    fn replay_is_bitwise() {
        let (_, c) = setup();
        let mut a = NoiseStream::new(9, 3, Channel::Q2);
        let first: Vec<VelocityField> = (0..5)
            .map(|_| sample_increment(&mut a, &c, 0.01).unwrap())
            .collect();
        let mut b = NoiseStream::new(9, 3, Channel::Q2);
        b.seek(3);
        assert_eq!(sample_increment(&mut b, &c, 0.01).unwrap(), first[3]);
        b.seek(0);
        assert_eq!(sample_increment(&mut b, &c, 0.01).unwrap(), first[0]);
        let mut other = NoiseStream::new(9, 4, Channel::Q2);
        assert_ne!(sample_increment(&mut other, &c, 0.01).unwrap(), first[0]);
    }

    #[test]
    fn mean_energy_matches_trace() {
        let (_, c) = setup();
        let dt = 0.01;
        let n = 100_000;
        let mut s = NoiseStream::new(42, 0, Channel::Q1);
        let mut buf = vec![Complex64::new(0.0, 0.0); c.eigenvalues().len()];
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            s.fill_increment(&c, dt, &mut buf);
            let e: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
            sum += e;
            sum2 += e * e;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - dt * c.trace()).abs() < 3.0 * se,
            "{mean} vs {}",
            dt * c.trace()
        );
    }

    #[test]
    fn constant_multiplier_hs_norm() {
        let (b, c) = setup();
        let m = DiagonalMultiplier::constant(b.len(), 0.3);
        assert!((hs_norm_sq(&m, &c).unwrap() - 0.09 * c.trace()).abs() < 1e-15);
        let mut s = NoiseStream::new(1, 1, Channel::Q1);
        let w = sample_increment(&mut s, &c, 0.5).unwrap();
        let one = DiagonalMultiplier::constant(b.len(), 1.0);
        assert_eq!(apply_diffusion(&one, &w).unwrap(), w);
        let zero = DiagonalMultiplier::constant(b.len(), 0.0);
        assert_eq!(
            apply_diffusion(&zero, &w).unwrap(),
            VelocityField::zeros(&b)
        );
    }
}
