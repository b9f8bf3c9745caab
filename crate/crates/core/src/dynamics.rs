//! Exponential tamed integrators for the coupled slow-fast system, the frozen
//! fast equation, the block-anchored auxiliary process and the averaged
//! equation.
//!
//! Linear parts (`mu A`, plus the dissipative part `d` of `g` for the fast
//! variable) are integrated exactly mode by mode, including the stochastic
//! convolution. Superlinear terms (`B + beta C` for the slow variable,
//! `beta C / epsilon` for the fast one) are tamed; Lipschitz couplings are
//! explicit. The fast variable is sub-cycled `ceil(dt / dt_fast)` times per
//! macro step with the slow variable frozen at the macro-step start, and the
//! slow equation sees `f` averaged over those micro-steps.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::snapshot::TrajectoryWriter;
use crate::fields::{
    apply_convection, damping_coeffs, damping_order, CouplingSpec, DiagonalMultiplier, ModelParams,
    StokesBasis, VelocityField,
};
use crate::stochastic::{Channel, CovarianceSpec, NoiseStream};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default blow-up threshold on `|.|_H`.
pub const DEFAULT_BLOWUP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub x: VelocityField,
    pub y: VelocityField,
    pub t: f64,
}

impl CoupledState {
    pub fn new(x: VelocityField, y: VelocityField) -> Result<Self> {
        x.ensure_same_basis(&y)?;
        Ok(CoupledState { x, y, t: 0.0 })
    }

    pub fn zeros(basis: &Arc<StokesBasis>) -> Self {
        CoupledState {
            x: VelocityField::zeros(basis),
            y: VelocityField::zeros(basis),
            t: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Exact linear propagator and stochastic convolution, tamed explicit nonlinearity.
    ExponentialTamed,
    /// Linearly implicit Euler with tamed explicit nonlinearity.
    SemiImplicitLinear,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExponentialTamed => "exponential_tamed",
            Scheme::SemiImplicitLinear => "semi_implicit_linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exponential_tamed" => Some(Scheme::ExponentialTamed),
            "semi_implicit_linear" => Some(Scheme::SemiImplicitLinear),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Macro step.
    pub dt: f64,
    /// Micro step of the fast variable.
    pub dt_fast: f64,
    pub scheme: Scheme,
    /// Taming strength `tau` in `h N / (1 + tau h |N|_H)`; zero disables taming.
    pub taming: f64,
    pub blowup: f64,
    /// Include `B` in the slow drift (switch off for linear diagnostics).
    pub convection: bool,
}

impl IntegratorConfig {
    pub fn new(dt: f64, dt_fast: f64) -> Self {
        IntegratorConfig {
            dt,
            dt_fast,
            scheme: Scheme::ExponentialTamed,
            taming: 1.0,
            blowup: DEFAULT_BLOWUP,
            convection: true,
        }
    }

    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.dt_fast > 0.0 && self.dt_fast.is_finite()) {
            errs.push(format!("dt_fast = {} must be positive", self.dt_fast));
        }
        if !(self.taming >= 0.0 && self.taming.is_finite()) {
            errs.push(format!("taming = {} must be >= 0", self.taming));
        }
        if self.blowup.is_nan() || self.blowup <= 0.0 {
            errs.push(format!(
                "blow-up threshold {} must be positive",
                self.blowup
            ));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.check();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(errs.join("; ")))
        }
    }

    /// Micro-steps per macro step.
    pub fn n_sub(&self) -> usize {
        ((self.dt / self.dt_fast) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}

/// Per-mode update `u <- decay u + phi drift + noise sigma dW` for
/// `du = (-L u + drift) dt + sigma dW`.
#[derive(Clone, Debug)]
struct Propagator {
    decay: Vec<f64>,
    phi: Vec<f64>,
    noise: Vec<f64>,
}

impl Propagator {
    /// `rates[k] = L_k >= 0`, step `h`, extra noise factor `noise_scale`.
    fn new(rates: impl Iterator<Item = f64>, h: f64, noise_scale: f64, scheme: Scheme) -> Self {
        let (mut decay, mut phi, mut noise) = (Vec::new(), Vec::new(), Vec::new());
        for l in rates {
            let (e, p, s) = match scheme {
                Scheme::ExponentialTamed => {
                    let z = l * h;
                    if z < 1e-12 {
                        (1.0 - z, h, 1.0)
                    } else {
                        let e = (-z).exp();
                        // 1 - e^{-z} without cancellation
                        let one_m = -(-z).exp_m1();
                        let one_m2 = -(-2.0 * z).exp_m1();
                        (e, one_m / l, (one_m2 / (2.0 * z)).sqrt())
                    }
                }
                Scheme::SemiImplicitLinear => {
                    let d = 1.0 / (1.0 + l * h);
                    (d, h * d, d)
                }
            };
            decay.push(e);
            phi.push(p);
            noise.push(s * noise_scale);
        }
        Propagator { decay, phi, noise }
    }

    fn h_decay(&self) -> &[f64] {
        &self.decay
    }

    /// `u <- decay u + phi drift + noise (m dW)`.
    #[inline]
    fn apply(
        &self,
        u: &mut [Complex64],
        drift: &[Complex64],
        m: &DiagonalMultiplier,
        dw: &[Complex64],
    ) {
        for k in 0..u.len() {
            let w = Complex64::new(m.re[k] * dw[k].re, m.im[k] * dw[k].im);
            u[k] = u[k] * self.decay[k] + drift[k] * self.phi[k] + w * self.noise[k];
        }
    }
}

fn norm_h(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn tame(v: &mut [Complex64], h: f64, tau: f64) {
    if tau == 0.0 {
        return;
    }
    let s = 1.0 / (1.0 + tau * h * norm_h(v));
    for z in v {
        *z *= s;
    }
}

fn guard(which: &'static str, t: f64, c: &[Complex64], threshold: f64) -> Result<()> {
    let n = norm_h(c);
    if n <= threshold {
        Ok(())
    } else {
        Err(Error::BlowUp {
            which,
            t,
            norm: n,
            threshold,
        })
    }
}

/// Fast-variable data that depends only on the frozen slow argument.
#[derive(Clone, Debug)]
pub(crate) struct FrozenCoupling {
    /// `x`-dependent part of `g`.
    gx: Vec<Complex64>,
    /// `sigma2` without its `y`-dependent part.
    s2x: DiagonalMultiplier,
}

impl FrozenCoupling {
    pub(crate) fn new(spec: &CouplingSpec, x: &VelocityField) -> Self {
        let mut gx = vec![ZERO; x.coeffs().len()];
        spec.g_x_part(x.coeffs(), &mut gx);
        FrozenCoupling {
            gx,
            s2x: spec.sigma2_x_part(x),
        }
    }
}

/// Shared micro-step kernel for every fast-type equation
/// `dy = (1/eps)[-(mu A + d) y - beta C(y) + g_x(x) + g_y phi(y)] dt + eps^{-1/2} sigma2 dW`.
#[derive(Clone, Debug)]
pub(crate) struct FastKernel {
    basis: Arc<StokesBasis>,
    spec: CouplingSpec,
    beta: f64,
    r: f64,
    inv_eps: f64,
    h: f64,
    taming: f64,
    prop: Propagator,
    drift: Vec<Complex64>,
    mult: DiagonalMultiplier,
}

impl FastKernel {
    pub(crate) fn new(
        basis: &Arc<StokesBasis>,
        params: &ModelParams,
        spec: &CouplingSpec,
        eps: f64,
        h: f64,
        scheme: Scheme,
        taming: f64,
    ) -> Self {
        let d = spec.g_damp();
        let rates = basis
            .modes()
            .iter()
            .map(|m| (params.mu * m.lambda + d) / eps);
        let n = basis.len();
        FastKernel {
            basis: Arc::clone(basis),
            spec: *spec,
            beta: params.beta,
            r: params.r,
            inv_eps: 1.0 / eps,
            h,
            taming,
            prop: Propagator::new(rates, h, eps.sqrt().recip(), scheme),
            drift: vec![ZERO; n],
            mult: DiagonalMultiplier::constant(n, 0.0),
        }
    }

    /// One micro-step of `y` with increment `dw` (variance `h q`).
    pub(crate) fn step(&mut self, y: &mut [Complex64], fc: &FrozenCoupling, dw: &[Complex64]) {
        let inv = self.inv_eps;
        if self.beta != 0.0 {
            let mut c = damping_coeffs(&self.basis, y, self.r);
            for z in c.iter_mut() {
                *z *= self.beta * inv;
            }
            tame(&mut c, self.h, self.taming);
            for ((o, g), c) in self.drift.iter_mut().zip(&fc.gx).zip(&c) {
                *o = g * inv - c;
            }
        } else {
            for (o, g) in self.drift.iter_mut().zip(&fc.gx) {
                *o = g * inv;
            }
        }
        if self.spec.g_has_y_remainder() {
            for (o, yk) in self.drift.iter_mut().zip(y.iter()) {
                *o += self.spec.g_y_remainder(*yk) * inv;
            }
        }
        let mult = if self.spec.sigma2_depends_on_y() {
            let b = &self.basis;
            self.spec.sigma2_with_y(
                &fc.s2x,
                y,
                b.representatives(),
                |i| b.partner(i),
                &mut self.mult,
            );
            &self.mult
        } else {
            &fc.s2x
        };
        self.prop.apply(y, &self.drift, mult, dw);
    }
}

/// Auxiliary fast process anchored at a block-start slow state.
#[derive(Clone, Debug)]
pub struct Auxiliary {
    pub yhat: VelocityField,
    anchor: VelocityField,
    frozen: FrozenCoupling,
    /// `int phi(yhat) ds` over the last macro step.
    pub(crate) phi_integral: Vec<Complex64>,
    /// `int |y - yhat|^2 ds` over the last macro step.
    pub(crate) gap_integral: f64,
}

impl Auxiliary {
    pub fn new(spec: &CouplingSpec, yhat: VelocityField, anchor: VelocityField) -> Self {
        let n = yhat.coeffs().len();
        Auxiliary {
            frozen: FrozenCoupling::new(spec, &anchor),
            yhat,
            anchor,
            phi_integral: vec![ZERO; n],
            gap_integral: 0.0,
        }
    }

    pub fn anchor(&self) -> &VelocityField {
        &self.anchor
    }

    pub fn set_anchor(&mut self, spec: &CouplingSpec, x: &VelocityField) {
        self.frozen = FrozenCoupling::new(spec, x);
        self.anchor = x.clone();
    }
}

/// Integrator for the coupled system and its slow/auxiliary relatives,
/// with every per-mode factor precomputed.
#[derive(Clone, Debug)]
pub struct Stepper {
    basis: Arc<StokesBasis>,
    params: ModelParams,
    spec: CouplingSpec,
    cov1: CovarianceSpec,
    cov2: CovarianceSpec,
    cfg: IntegratorConfig,
    slow: Propagator,
    fast: FastKernel,
    n_sub: usize,
    h: f64,
    dw1: Vec<Complex64>,
    dw2: Vec<Complex64>,
    phi_acc: Vec<Complex64>,
}

impl Stepper {
    pub fn new(
        params: &ModelParams,
        spec: &CouplingSpec,
        cov1: &CovarianceSpec,
        cov2: &CovarianceSpec,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let perrs = params.check();
        if !perrs.is_empty() {
            return Err(Error::InvalidArgument(perrs.join("; ")));
        }
        let basis = Arc::clone(cov1.basis());
        if !basis.same_as(cov2.basis()) {
            return Err(Error::BasisMismatch);
        }
        if params.beta != 0.0 {
            basis.check_order(damping_order(params.r))?;
        }
        let n_sub = cfg.n_sub();
        let h = cfg.dt / n_sub as f64;
        let slow = Propagator::new(
            basis.modes().iter().map(|m| params.mu * m.lambda),
            cfg.dt,
            1.0,
            cfg.scheme,
        );
        let fast = FastKernel::new(
            &basis,
            params,
            spec,
            params.epsilon,
            h,
            cfg.scheme,
            cfg.taming,
        );
        let n = basis.len();
        Ok(Stepper {
            basis,
            params: *params,
            spec: *spec,
            cov1: cov1.clone(),
            cov2: cov2.clone(),
            cfg: *cfg,
            slow,
            fast,
            n_sub,
            h,
            dw1: vec![ZERO; n],
            dw2: vec![ZERO; n],
            phi_acc: vec![ZERO; n],
        })
    }

    pub fn basis(&self) -> &Arc<StokesBasis> {
        &self.basis
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn micro_step(&self) -> f64 {
        self.h
    }

    /// Tamed `B(x) + beta C(x)`.
    fn slow_nonlinearity(&self, x: &VelocityField) -> Result<Vec<Complex64>> {
        let mut n = if self.cfg.convection {
            apply_convection(x, x)?.into_coeffs()
        } else {
            vec![ZERO; self.basis.len()]
        };
        if self.params.beta != 0.0 {
            let c = damping_coeffs(&self.basis, x.coeffs(), self.params.r);
            for (a, b) in n.iter_mut().zip(&c) {
                *a += b * self.params.beta;
            }
        }
        tame(&mut n, self.cfg.dt, self.cfg.taming);
        Ok(n)
    }

    /// `x <- x + slow step` with extra forcing `forcing` (the `f` or `f-bar` term)
    /// and the increment already in `self.dw1`.
    fn slow_update(&mut self, x: &mut VelocityField, forcing: &[Complex64]) -> Result<()> {
        let mut drift = self.slow_nonlinearity(x)?;
        for (d, f) in drift.iter_mut().zip(forcing) {
            *d = f - *d;
        }
        let m = self.spec.sigma1(x);
        self.slow.apply(x.coeffs_mut(), &drift, &m, &self.dw1);
        Ok(())
    }

    /// Advances `(X, Y)` by one macro step.
    pub fn step_coupled(
        &mut self,
        state: &mut CoupledState,
        s1: &mut NoiseStream,
        s2: &mut NoiseStream,
    ) -> Result<()> {
        self.step_coupled_with_aux(state, &mut [], s1, s2)
    }

    /// Advances `(X, Y)` and every auxiliary process on the same `Q2` increments.
    pub fn step_coupled_with_aux(
        &mut self,
        state: &mut CoupledState,
        aux: &mut [Auxiliary],
        s1: &mut NoiseStream,
        s2: &mut NoiseStream,
    ) -> Result<()> {
        s1.require(Channel::Q1)?;
        s2.require(Channel::Q2)?;
        state.x.ensure_same_basis(&state.y)?;
        let fy = self.spec.f_coeffs().1;
        let fc = FrozenCoupling::new(&self.spec, &state.x);
        self.phi_acc.fill(ZERO);
        for a in aux.iter_mut() {
            a.phi_integral.fill(ZERO);
            a.gap_integral = 0.0;
        }
        let h = self.h;
        for _ in 0..self.n_sub {
            if fy != 0.0 {
                for (acc, yk) in self.phi_acc.iter_mut().zip(state.y.coeffs()) {
                    *acc += self.spec.phi(*yk);
                }
            }
            s2.fill_increment(&self.cov2, h, &mut self.dw2);
            for a in aux.iter_mut() {
                a.gap_integral += h * state.y.distance(&a.yhat).powi(2);
                for (acc, yk) in a.phi_integral.iter_mut().zip(a.yhat.coeffs()) {
                    *acc += self.spec.phi(*yk) * h;
                }
                self.fast.step(a.yhat.coeffs_mut(), &a.frozen, &self.dw2);
            }
            self.fast.step(state.y.coeffs_mut(), &fc, &self.dw2);
        }
        let (fx, _) = self.spec.f_coeffs();
        let inv = 1.0 / self.n_sub as f64;
        let forcing: Vec<Complex64> = if fy != 0.0 {
            state
                .x
                .coeffs()
                .iter()
                .zip(&self.phi_acc)
                .map(|(x, p)| x * fx + p * (fy * inv))
                .collect()
        } else {
            state.x.coeffs().iter().map(|x| x * fx).collect()
        };
        s1.fill_increment(&self.cov1, self.cfg.dt, &mut self.dw1);
        let mut x = state.x.clone();
        self.slow_update(&mut x, &forcing)?;
        state.x = x;
        state.t += self.cfg.dt;
        let thr = self.cfg.blowup;
        guard("slow variable", state.t, state.x.coeffs(), thr)?;
        guard("fast variable", state.t, state.y.coeffs(), thr)?;
        for a in aux.iter() {
            guard("auxiliary variable", state.t, a.yhat.coeffs(), thr)?;
        }
        Ok(())
    }

    /// Advances the auxiliary process alone by one macro step, with the slow
    /// argument frozen at `x_anchor`; consumes the `Q2` stream exactly like
    /// [`Stepper::step_coupled`].
    pub fn step_auxiliary(
        &mut self,
        yhat: &mut VelocityField,
        x_anchor: &VelocityField,
        s2: &mut NoiseStream,
    ) -> Result<()> {
        s2.require(Channel::Q2)?;
        yhat.ensure_same_basis(x_anchor)?;
        let fc = FrozenCoupling::new(&self.spec, x_anchor);
        for _ in 0..self.n_sub {
            s2.fill_increment(&self.cov2, self.h, &mut self.dw2);
            self.fast.step(yhat.coeffs_mut(), &fc, &self.dw2);
        }
        guard(
            "auxiliary variable",
            f64::NAN,
            yhat.coeffs(),
            self.cfg.blowup,
        )
    }

    /// Advances the averaged equation by one macro step with drift value `fbar`,
    /// consuming the `Q1` stream exactly like [`Stepper::step_coupled`].
    pub fn step_averaged(
        &mut self,
        xbar: &mut VelocityField,
        fbar: &VelocityField,
        s1: &mut NoiseStream,
    ) -> Result<()> {
        s1.require(Channel::Q1)?;
        xbar.ensure_same_basis(fbar)?;
        s1.fill_increment(&self.cov1, self.cfg.dt, &mut self.dw1);
        self.slow_update(xbar, fbar.coeffs())?;
        guard(
            "averaged variable",
            f64::NAN,
            xbar.coeffs(),
            self.cfg.blowup,
        )
    }

    /// Runs `steps` coupled macro steps, offering each state (including the
    /// initial one) to `writer` when given.
    pub fn simulate<W: Write>(
        &mut self,
        state: &mut CoupledState,
        steps: usize,
        s1: &mut NoiseStream,
        s2: &mut NoiseStream,
        mut writer: Option<&mut TrajectoryWriter<W>>,
    ) -> Result<()> {
        if let Some(w) = writer.as_deref_mut() {
            w.offer(state.t, &state.x)?;
        }
        for _ in 0..steps {
            self.step_coupled(state, s1, s2)?;
            if let Some(w) = writer.as_deref_mut() {
                w.offer(state.t, &state.x)?;
            }
        }
        Ok(())
    }
}

/// Unit-speed frozen equation
/// `dY = -[mu A Y + beta C(Y) - g(x, Y)] dt + sigma2(x, Y) dW-bar`
/// for a fixed slow argument `x` and step `dt`.
#[derive(Clone, Debug)]
pub struct FrozenStepper {
    kernel: FastKernel,
    frozen: FrozenCoupling,
    cov: CovarianceSpec,
    dt: f64,
    blowup: f64,
    dw: Vec<Complex64>,
}

impl FrozenStepper {
    pub fn new(
        params: &ModelParams,
        spec: &CouplingSpec,
        cov2: &CovarianceSpec,
        x: &VelocityField,
        dt: f64,
    ) -> Result<Self> {
        Self::with_scheme(
            params,
            spec,
            cov2,
            x,
            dt,
            Scheme::ExponentialTamed,
            1.0,
            DEFAULT_BLOWUP,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_scheme(
        params: &ModelParams,
        spec: &CouplingSpec,
        cov2: &CovarianceSpec,
        x: &VelocityField,
        dt: f64,
        scheme: Scheme,
        taming: f64,
        blowup: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt = {dt} must be positive"
            )));
        }
        let basis = cov2.basis();
        if !basis.same_as(x.basis()) {
            return Err(Error::BasisMismatch);
        }
        if params.beta != 0.0 {
            basis.check_order(damping_order(params.r))?;
        }
        Ok(FrozenStepper {
            kernel: FastKernel::new(basis, params, spec, 1.0, dt, scheme, taming),
            frozen: FrozenCoupling::new(spec, x),
            cov: cov2.clone(),
            dt,
            blowup,
            dw: vec![ZERO; basis.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Per-mode one-step linear decay factors.
    pub fn decay_factors(&self) -> &[f64] {
        self.kernel.prop.h_decay()
    }

    pub fn step(&mut self, y: &mut VelocityField, s: &mut NoiseStream) -> Result<()> {
        s.require(Channel::Q2Bar)?;
        s.fill_increment(&self.cov, self.dt, &mut self.dw);
        self.kernel.step(y.coeffs_mut(), &self.frozen, &self.dw);
        guard("frozen variable", f64::NAN, y.coeffs(), self.blowup)
    }

    /// Advances two copies on the same increment (synchronous coupling).
    pub fn step_pair(
        &mut self,
        y1: &mut VelocityField,
        y2: &mut VelocityField,
        s: &mut NoiseStream,
    ) -> Result<()> {
        s.require(Channel::Q2Bar)?;
        s.fill_increment(&self.cov, self.dt, &mut self.dw);
        self.kernel.step(y1.coeffs_mut(), &self.frozen, &self.dw);
        self.kernel.step(y2.coeffs_mut(), &self.frozen, &self.dw);
        guard("frozen variable", f64::NAN, y1.coeffs(), self.blowup)?;
        guard("frozen variable", f64::NAN, y2.coeffs(), self.blowup)
    }
}

/// One coupled macro step.
#[allow(clippy::too_many_arguments)]
pub fn step_coupled(
    state: &CoupledState,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov1: &CovarianceSpec,
    cov2: &CovarianceSpec,
    s1: &mut NoiseStream,
    s2: &mut NoiseStream,
    cfg: &IntegratorConfig,
) -> Result<CoupledState> {
    let mut st = state.clone();
    Stepper::new(params, spec, cov1, cov2, cfg)?.step_coupled(&mut st, s1, s2)?;
    Ok(st)
}

/// One step of the frozen equation on channel `Q2bar`.
pub fn step_frozen(
    y: &VelocityField,
    x_frozen: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    s: &mut NoiseStream,
    dt: f64,
) -> Result<VelocityField> {
    let mut out = y.clone();
    FrozenStepper::new(params, spec, cov2, x_frozen, dt)?.step(&mut out, s)?;
    Ok(out)
}

/// One macro step of the auxiliary process anchored at `x_anchor`.
#[allow(clippy::too_many_arguments)]
pub fn step_auxiliary(
    yhat: &VelocityField,
    x_anchor: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    s2: &mut NoiseStream,
    cfg: &IntegratorConfig,
) -> Result<VelocityField> {
    let mut out = yhat.clone();
    let cov1 = cov2.scaled(0.0);
    Stepper::new(params, spec, &cov1, cov2, cfg)?.step_auxiliary(&mut out, x_anchor, s2)?;
    Ok(out)
}

/// One macro step of the averaged equation with drift value `fbar_value`.
#[allow(clippy::too_many_arguments)]
pub fn step_averaged(
    xbar: &VelocityField,
    fbar_value: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov1: &CovarianceSpec,
    s1: &mut NoiseStream,
    cfg: &IntegratorConfig,
) -> Result<VelocityField> {
    let mut out = xbar.clone();
    let cov2 = cov1.scaled(0.0);
    Stepper::new(params, spec, cov1, &cov2, cfg)?.step_averaged(&mut out, fbar_value, s1)?;
    Ok(out)
}

/// Everything that defines one slow-fast system and its discretization.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: ModelParams,
    pub spec: CouplingSpec,
    pub cov1: CovarianceSpec,
    pub cov2: CovarianceSpec,
    pub integrator: IntegratorConfig,
}

impl Model {
    pub fn basis(&self) -> &Arc<StokesBasis> {
        self.cov1.basis()
    }

    pub fn stepper(&self) -> Result<Stepper> {
        Stepper::new(
            &self.params,
            &self.spec,
            &self.cov1,
            &self.cov2,
            &self.integrator,
        )
    }

    /// Same model at a different time-scale ratio, keeping `dt_fast / epsilon` fixed.
    pub fn with_epsilon(&self, eps: f64) -> Self {
        let mut m = self.clone();
        let ratio = self.integrator.dt_fast / self.params.epsilon;
        m.params.epsilon = eps;
        m.integrator.dt_fast = ratio * eps;
        m
    }

    pub fn steps_for(&self, horizon: f64) -> usize {
        (horizon / self.integrator.dt).round() as usize
    }
}
