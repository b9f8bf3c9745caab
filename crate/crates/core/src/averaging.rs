//! Ergodic estimators for the frozen fast equation and the multiscale drivers.
//!
//! The invariant measure of the frozen equation is never represented; only
//! time averages against it are computed, over independent replicas started
//! from zero and run past a burn-in.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{Auxiliary, CoupledState, FrozenStepper, Model};
use crate::error::{Error, Result};
use crate::fields::{validate_assumptions, CouplingSpec, ModelParams, VelocityField};
use crate::stats;
use crate::stochastic::{derive_seed, splitmix64, Channel, CovarianceSpec, NoiseStream};

const BATCHES: usize = 8;

/// Time-averaging window for the frozen equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgodicConfig {
    pub burn_in: f64,
    pub horizon: f64,
    pub n_rep: usize,
    pub dt: f64,
}

impl ErgodicConfig {
    /// Burn-in of five mixing times `5 / zeta_mix`.
    pub fn for_params(params: &ModelParams) -> Self {
        let z = params.zeta_mix();
        ErgodicConfig {
            burn_in: if z > 0.0 { 5.0 / z } else { 5.0 },
            horizon: 10.0,
            n_rep: 16,
            dt: 0.01,
        }
    }

    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            errs.push(format!("burn_in = {} must be >= 0", self.burn_in));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            errs.push(format!("horizon = {} must be positive", self.horizon));
        }
        if self.n_rep == 0 {
            errs.push("n_rep must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt = {} must be positive", self.dt));
        }
        errs
    }

    fn validate(&self) -> Result<()> {
        let e = self.check();
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(e.join("; ")))
        }
    }

    fn burn_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }

    /// Averaging steps, rounded up to a multiple of the batch count.
    fn horizon_steps(&self) -> usize {
        let n = ((self.horizon / self.dt).round() as usize).max(BATCHES);
        n.div_ceil(BATCHES) * BATCHES
    }
}

/// Replica-averaged time average of a vector observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicAverage {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// First- and second-half window means differ by more than 5 standard errors.
    pub nonstationary: bool,
    pub burn_in_used: f64,
    pub horizon_used: f64,
    /// Independent units behind the standard error (replicas, or batches of a single replica).
    pub units: usize,
}

/// Time average of `obs(y)` along the frozen equation at `x`, one replica per
/// `Q2bar` sub-stream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn ergodic_average<F>(
    x: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    cfg: &ErgodicConfig,
    seed: u64,
    dim: usize,
    obs: F,
) -> Result<ErgodicAverage>
where
    F: Fn(&VelocityField, &mut [f64]) + Sync,
{
    cfg.validate()?;
    let n_burn = cfg.burn_steps();
    let n_hor = cfg.horizon_steps();
    let per_batch = n_hor / BATCHES;
    let batches: Vec<Vec<Vec<f64>>> = (0..cfg.n_rep as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<Vec<f64>>> {
            let mut stepper = FrozenStepper::new(params, spec, cov2, x, cfg.dt)?;
            let mut s = NoiseStream::new(seed, rep, Channel::Q2Bar);
            let mut y = VelocityField::zeros(x.basis());
            for _ in 0..n_burn {
                stepper.step(&mut y, &mut s)?;
            }
            let mut out = vec![vec![0.0; dim]; BATCHES];
            let mut tmp = vec![0.0; dim];
            for batch in out.iter_mut() {
                for _ in 0..per_batch {
                    stepper.step(&mut y, &mut s)?;
                    obs(&y, &mut tmp);
                    for (a, v) in batch.iter_mut().zip(&tmp) {
                        *a += v;
                    }
                }
                for a in batch.iter_mut() {
                    *a /= per_batch as f64;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let half = BATCHES / 2;
    let avg = |b: &[Vec<f64>], j: usize| b.iter().map(|v| v[j]).sum::<f64>() / b.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut se = vec![0.0; dim];
    let mut nonstationary = false;
    let units;
    if cfg.n_rep >= 2 {
        units = cfg.n_rep;
        for j in 0..dim {
            let reps: Vec<f64> = batches.iter().map(|b| avg(b, j)).collect();
            let diffs: Vec<f64> = batches
                .iter()
                .map(|b| avg(&b[..half], j) - avg(&b[half..], j))
                .collect();
            mean[j] = stats::mean(&reps);
            se[j] = stats::stderr(&reps);
            nonstationary |= drifted(stats::mean(&diffs), stats::stderr(&diffs), mean[j]);
        }
    } else {
        units = BATCHES;
        let b = &batches[0];
        for j in 0..dim {
            let vals: Vec<f64> = b.iter().map(|v| v[j]).collect();
            mean[j] = stats::mean(&vals);
            se[j] = stats::stderr(&vals);
            let d = stats::mean(&vals[..half]) - stats::mean(&vals[half..]);
            let sd = (stats::variance(&vals[..half]) / half as f64
                + stats::variance(&vals[half..]) / half as f64)
                .sqrt();
            nonstationary |= drifted(d, sd, mean[j]);
        }
    }
    Ok(ErgodicAverage {
        mean,
        stderr: se,
        nonstationary,
        burn_in_used: n_burn as f64 * cfg.dt,
        horizon_used: n_hor as f64 * cfg.dt,
        units,
    })
}

fn drifted(diff: f64, se: f64, scale: f64) -> bool {
    diff.abs() > 5.0 * se + 1e-12 * scale.abs().max(1e-300)
}

/// Estimate of the averaged drift at one slow state.
#[derive(Clone, Debug, PartialEq)]
pub struct FbarEstimate {
    pub value: VelocityField,
    /// Standard error per mode, `sqrt(se_re^2 + se_im^2)`.
    pub stderr: Vec<f64>,
    /// Standard errors of the real and imaginary parts per mode.
    pub stderr_parts: Vec<[f64; 2]>,
    pub burn_in_used: f64,
    pub horizon_used: f64,
    pub nonstationary: bool,
    /// The drift does not depend on the fast variable, so the value is exact.
    pub exact: bool,
}

impl FbarEstimate {
    /// `H`-norm of the per-mode standard errors.
    pub fn stderr_norm(&self) -> f64 {
        self.stderr.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Estimates `f-bar(x) = int f(x, y) nu^x(dy)` by ergodic averaging of the
/// frozen equation on channel `Q2bar`.
pub fn estimate_fbar(
    x: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    cfg: &ErgodicConfig,
    seed: u64,
) -> Result<FbarEstimate> {
    validate_assumptions(params, spec).require_admissible()?;
    let (fx, fy) = spec.f_coeffs();
    let n = x.coeffs().len();
    if fy == 0.0 {
        return Ok(FbarEstimate {
            value: x.scaled(fx),
            stderr: vec![0.0; n],
            stderr_parts: vec![[0.0; 2]; n],
            burn_in_used: 0.0,
            horizon_used: 0.0,
            nonstationary: false,
            exact: true,
        });
    }
    let reps = x.basis().representatives().to_vec();
    let avg = ergodic_average(
        x,
        params,
        spec,
        cov2,
        cfg,
        seed,
        2 * reps.len(),
        |y, out| {
            let c = y.coeffs();
            for (j, &i) in reps.iter().enumerate() {
                let p = spec.phi(c[i]);
                out[2 * j] = p.re;
                out[2 * j + 1] = p.im;
            }
        },
    )?;
    let mut coeffs: Vec<Complex64> = x.coeffs().iter().map(|c| c * fx).collect();
    let mut se = vec![0.0; n];
    let mut parts = vec![[0.0; 2]; n];
    let b = x.basis();
    for (j, &i) in reps.iter().enumerate() {
        let m = Complex64::new(avg.mean[2 * j], avg.mean[2 * j + 1]) * fy;
        coeffs[i] += m;
        let p = [
            avg.stderr[2 * j] * fy.abs(),
            avg.stderr[2 * j + 1] * fy.abs(),
        ];
        let k = b.partner(i);
        coeffs[k] = coeffs[i].conj();
        for idx in [i, k] {
            parts[idx] = p;
            se[idx] = p[0].hypot(p[1]);
        }
    }
    Ok(FbarEstimate {
        value: VelocityField::from_coeffs(b, coeffs)?,
        stderr: se,
        stderr_parts: parts,
        burn_in_used: avg.burn_in_used,
        horizon_used: avg.horizon_used,
        nonstationary: avg.nonstationary,
        exact: false,
    })
}

fn linear_oracle_checks<'a>(
    params: &ModelParams,
    spec: &'a CouplingSpec,
) -> Result<&'a crate::fields::LinearCoupling> {
    let c = spec.as_linear().ok_or_else(|| {
        Error::InvalidCoupling(format!(
            "closed-form oracle needs the linear family, got {}",
            spec.family_name()
        ))
    })?;
    if params.beta != 0.0 {
        return Err(Error::InvalidArgument(
            "closed-form oracle needs beta = 0 in the fast equation".into(),
        ));
    }
    Ok(c)
}

/// Stationary mean `g_x x_k / (mu lambda_k + d)` of the linear frozen equation.
fn ou_mean(
    x: &VelocityField,
    params: &ModelParams,
    c: &crate::fields::LinearCoupling,
) -> Vec<Complex64> {
    x.coeffs()
        .iter()
        .zip(x.basis().modes())
        .map(|(xk, m)| xk * (c.g_x / (params.mu * m.lambda + c.g_damp)))
        .collect()
}

/// Exact averaged drift for the linear family with `beta = 0`:
/// `f_x x_k + f_y g_x x_k / (mu lambda_k + d)`.
pub fn fbar_oracle_linear(
    x: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
) -> Result<VelocityField> {
    let c = linear_oracle_checks(params, spec)?;
    let m = ou_mean(x, params, c);
    let coeffs = x
        .coeffs()
        .iter()
        .zip(&m)
        .map(|(xk, mk)| xk * c.f_x + mk * c.f_y)
        .collect();
    VelocityField::from_coeffs(x.basis(), coeffs)
}

/// Exact stationary second moment `int |y|^2 nu^x(dy)` for the linear family
/// with `beta = 0`: `sum_k q_k sigma2^2 / (2 (mu lambda_k + d)) + |mean|^2`.
pub fn invariant_moment_linear(
    x: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
) -> Result<f64> {
    let c = linear_oracle_checks(params, spec)?;
    let var: f64 = cov2
        .eigenvalues()
        .iter()
        .zip(x.basis().modes())
        .map(|(q, m)| q * c.sigma2 * c.sigma2 / (2.0 * (params.mu * m.lambda + c.g_damp)))
        .sum();
    let mean: f64 = ou_mean(x, params, c).iter().map(|z| z.norm_sqr()).sum();
    Ok(var + mean)
}

/// Scalar ergodic estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub nonstationary: bool,
}

/// Ergodic estimate of `int |y|_H^2 nu^x(dy)`.
pub fn invariant_moment(
    x: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    cfg: &ErgodicConfig,
    seed: u64,
) -> Result<MomentEstimate> {
    validate_assumptions(params, spec).require_admissible()?;
    let a = ergodic_average(x, params, spec, cov2, cfg, seed, 1, |y, out| {
        out[0] = y.h_norm_sq();
    })?;
    Ok(MomentEstimate {
        mean: a.mean[0],
        stderr: a.stderr[0],
        nonstationary: a.nonstationary,
    })
}

/// Sampling plan for the synchronous-coupling decay experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayConfig {
    pub horizon: f64,
    pub n_rep: usize,
    pub dt: f64,
    /// Number of sampled times after `t = 0`.
    pub samples: usize,
    pub resamples: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            horizon: 2.0,
            n_rep: 64,
            dt: 0.01,
            samples: 40,
            resamples: stats::BOOTSTRAP_RESAMPLES,
        }
    }
}

/// Log-linear fit of the paired gap `E|Y^{x,y1}_t - Y^{x,y2}_t|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayRate {
    /// `-d/dt log E|gap|^2`.
    pub rate: f64,
    /// 95% percentile bootstrap interval of the rate over replicas.
    pub ci: (f64, f64),
    pub r_squared: f64,
    pub residual: f64,
    pub times: Vec<f64>,
    pub mean_gap: Vec<f64>,
}

/// Fits the exponential decay rate of two frozen-equation copies driven by
/// the same `Q2bar` noise from `y1` and `y2`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_decay_rate(
    x: &VelocityField,
    y1: &VelocityField,
    y2: &VelocityField,
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    cfg: &DecayConfig,
    seed: u64,
) -> Result<DecayRate> {
    y1.ensure_same_basis(y2)?;
    if y1.distance(y2) == 0.0 {
        return Err(Error::FitRejected(
            "identical initial data: the gap vanishes and has no rate".into(),
        ));
    }
    if cfg.n_rep == 0 || cfg.samples < 2 {
        return Err(Error::InvalidArgument(
            "decay fit needs n_rep >= 1 and at least 2 samples".into(),
        ));
    }
    let steps = ((cfg.horizon / cfg.dt).round() as usize).max(cfg.samples);
    let stride = steps / cfg.samples;
    let times: Vec<f64> = (0..=cfg.samples)
        .map(|j| (j * stride) as f64 * cfg.dt)
        .collect();
    let curves: Vec<Vec<f64>> = (0..cfg.n_rep as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut st = FrozenStepper::new(params, spec, cov2, x, cfg.dt)?;
            let mut s = NoiseStream::new(seed, rep, Channel::Q2Bar);
            let (mut a, mut b) = (y1.clone(), y2.clone());
            let mut out = vec![a.distance(&b).powi(2)];
            for _ in 0..cfg.samples {
                for _ in 0..stride {
                    st.step_pair(&mut a, &mut b, &mut s)?;
                }
                out.push(a.distance(&b).powi(2));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let fit_curves =
        |idx: &mut dyn Iterator<Item = usize>| -> (Vec<f64>, Option<stats::LinearFit>) {
            let mut mean = vec![0.0; times.len()];
            let mut n = 0usize;
            for i in idx {
                for (m, v) in mean.iter_mut().zip(&curves[i]) {
                    *m += v;
                }
                n += 1;
            }
            for m in mean.iter_mut() {
                *m /= n as f64;
            }
            let (t, l): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(&mean)
                .filter(|(_, g)| g.is_finite() && **g > 1e-250)
                .map(|(t, g)| (*t, g.ln()))
                .unzip();
            let fit = if t.len() >= 3 {
                stats::linear_fit(&t, &l)
            } else {
                None
            };
            (mean, fit)
        };

    let (mean_gap, fit) = fit_curves(&mut (0..cfg.n_rep));
    let fit = fit.ok_or_else(|| Error::FitRejected("fewer than 3 usable samples".into()))?;
    if fit.r_squared < 0.9 {
        return Err(Error::FitRejected(format!(
            "R^2 = {:.3} below 0.9",
            fit.r_squared
        )));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xB007));
    let mut rates: Vec<f64> = (0..cfg.resamples)
        .filter_map(|_| {
            let picks: Vec<usize> = (0..cfg.n_rep)
                .map(|_| rng.random_range(0..cfg.n_rep))
                .collect();
            fit_curves(&mut picks.into_iter()).1.map(|f| -f.slope)
        })
        .collect();
    rates.sort_by(f64::total_cmp);
    let ci = if rates.is_empty() {
        (-fit.slope, -fit.slope)
    } else {
        (
            stats::quantile_sorted(&rates, 0.025),
            stats::quantile_sorted(&rates, 0.975),
        )
    };
    Ok(DecayRate {
        rate: -fit.slope,
        ci,
        r_squared: fit.r_squared,
        residual: fit.residual,
        times,
        mean_gap,
    })
}

/// When a cached averaged-drift estimate may be reused.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CachePolicy {
    /// Reuse while `|x - x_cached|_H <= c |x|_H`.
    Relative(f64),
    /// Reuse while `|x - x_cached|_H <= tol`.
    Absolute(f64),
}

impl Default for CachePolicy {
    fn default() -> Self {
        CachePolicy::Relative(1e-2)
    }
}

impl CachePolicy {
    fn reusable(&self, x: &VelocityField, cached: &VelocityField) -> bool {
        let d = x.distance(cached);
        match *self {
            CachePolicy::Relative(c) => d <= c * x.h_norm(),
            CachePolicy::Absolute(t) => d <= t,
        }
    }
}

/// Abort threshold `stderr > fraction * |f-bar|_H + floor` for estimated drifts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StderrBudget {
    pub fraction: f64,
    pub floor: f64,
}

impl Default for StderrBudget {
    fn default() -> Self {
        StderrBudget {
            fraction: 0.5,
            floor: 1e-2,
        }
    }
}

/// Where averaged-drift values come from.
#[derive(Clone, Debug, PartialEq)]
pub enum FbarSource {
    /// `f` does not depend on `y`: `f-bar(x) = f(x, .)` exactly.
    Exact,
    /// Closed form for the linear family with `beta = 0`.
    Oracle,
    /// Ergodic estimate on demand, cached per [`CachePolicy`].
    Estimated {
        ergodic: ErgodicConfig,
        cache: CachePolicy,
        budget: StderrBudget,
        seed: u64,
    },
}

impl FbarSource {
    pub fn name(&self) -> &'static str {
        match self {
            FbarSource::Exact => "exact",
            FbarSource::Oracle => "oracle",
            FbarSource::Estimated { .. } => "estimated",
        }
    }
}

/// One averaged-drift evaluation, for cost profiling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FbarLogEntry {
    pub t: f64,
    pub call_index: usize,
    pub stderr: f64,
    pub horizon: f64,
}

/// Evaluates `f-bar` along a path with caching, call accounting and the
/// standard-error budget.
pub struct FbarEvaluator<'a> {
    params: &'a ModelParams,
    spec: &'a CouplingSpec,
    cov2: &'a CovarianceSpec,
    source: FbarSource,
    realization: u64,
    cached: Option<(VelocityField, VelocityField)>,
    requests: usize,
    log: Vec<FbarLogEntry>,
    max_stderr: f64,
}

impl<'a> FbarEvaluator<'a> {
    pub fn new(model: &'a Model, source: FbarSource, realization: u64) -> Result<Self> {
        match &source {
            FbarSource::Exact if model.spec.f_depends_on_y() => {
                return Err(Error::InvalidArgument(
                    "exact averaged drift requires f independent of y".into(),
                ))
            }
            FbarSource::Oracle => {
                linear_oracle_checks(&model.params, &model.spec)?;
            }
            FbarSource::Estimated { ergodic, .. } => {
                ergodic.validate()?;
                validate_assumptions(&model.params, &model.spec).require_admissible()?;
            }
            FbarSource::Exact => {}
        }
        Ok(FbarEvaluator {
            params: &model.params,
            spec: &model.spec,
            cov2: &model.cov2,
            source,
            realization,
            cached: None,
            requests: 0,
            log: Vec::new(),
            max_stderr: 0.0,
        })
    }

    pub fn eval(&mut self, x: &VelocityField, t: f64) -> Result<VelocityField> {
        self.requests += 1;
        match &self.source {
            FbarSource::Exact => Ok(x.scaled(self.spec.f_coeffs().0)),
            FbarSource::Oracle => fbar_oracle_linear(x, self.params, self.spec),
            FbarSource::Estimated {
                ergodic,
                cache,
                budget,
                seed,
            } => {
                if let Some((cx, v)) = &self.cached {
                    if cache.reusable(x, cx) {
                        return Ok(v.clone());
                    }
                }
                let call = self.log.len();
                let s = derive_seed(seed ^ splitmix64(self.realization), call as u64);
                let est = estimate_fbar(x, self.params, self.spec, self.cov2, ergodic, s)?;
                let se = est.stderr_norm();
                self.log.push(FbarLogEntry {
                    t,
                    call_index: call,
                    stderr: se,
                    horizon: est.horizon_used,
                });
                self.max_stderr = self.max_stderr.max(se);
                let drift = est.value.h_norm();
                if se > budget.fraction * drift + budget.floor {
                    return Err(Error::FbarBudget {
                        stderr: se,
                        drift,
                        fraction: budget.fraction,
                    });
                }
                self.cached = Some((x.clone(), est.value.clone()));
                Ok(est.value)
            }
        }
    }

    /// Requests served, including cache hits.
    pub fn requests(&self) -> usize {
        self.requests
    }

    /// Fresh ergodic estimates performed.
    pub fn estimates(&self) -> usize {
        self.log.len()
    }

    pub fn log(&self) -> &[FbarLogEntry] {
        &self.log
    }

    pub fn max_stderr(&self) -> f64 {
        self.max_stderr
    }
}

/// Averaged slow path on the `Q1` stream `(seed, realization)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedPath {
    pub times: Vec<f64>,
    /// States at every macro step, initial state included.
    pub path: Vec<VelocityField>,
    pub requests: usize,
    pub estimates: usize,
    pub max_stderr: f64,
    pub log: Vec<FbarLogEntry>,
}

/// Integrates the averaged equation to `horizon` on the same `Q1` increments
/// as a coupled run with identical `(seed, realization)` and macro step.
pub fn run_averaged(
    model: &Model,
    x0: &VelocityField,
    horizon: f64,
    source: &FbarSource,
    seed: u64,
    realization: u64,
) -> Result<AveragedPath> {
    let mut stepper = model.stepper()?;
    let mut eval = FbarEvaluator::new(model, source.clone(), realization)?;
    let mut s1 = NoiseStream::new(seed, realization, Channel::Q1);
    let steps = model.steps_for(horizon);
    let dt = model.integrator.dt;
    let mut x = x0.clone();
    let mut path = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    path.push(x.clone());
    times.push(0.0);
    for n in 0..steps {
        let t = n as f64 * dt;
        let f = eval.eval(&x, t)?;
        stepper.step_averaged(&mut x, &f, &mut s1)?;
        path.push(x.clone());
        times.push((n + 1) as f64 * dt);
    }
    Ok(AveragedPath {
        times,
        path,
        requests: eval.requests(),
        estimates: eval.estimates(),
        max_stderr: eval.max_stderr(),
        log: eval.log,
    })
}

/// Heterogeneous multiscale integration: `f-bar` is re-estimated from
/// frozen-equation bursts whenever the cache policy rejects the stored value.
#[allow(clippy::too_many_arguments)]
pub fn run_hmm_averaged(
    model: &Model,
    x0: &VelocityField,
    horizon: f64,
    ergodic: &ErgodicConfig,
    cache: CachePolicy,
    budget: StderrBudget,
    seed: u64,
    realization: u64,
) -> Result<AveragedPath> {
    let source = FbarSource::Estimated {
        ergodic: *ergodic,
        cache,
        budget,
        seed: derive_seed(seed, 0xF8A2),
    };
    run_averaged(model, x0, horizon, &source, seed, realization)
}

/// Per-block-length diagnostics of a block-anchored run.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagnostics {
    pub delta: f64,
    pub steps_per_block: usize,
    /// `(t(delta), X_{t(delta)})` at every block start.
    pub anchors: Vec<(f64, VelocityField)>,
    /// `|Y_t - Yhat_t|^2` at every macro step, initial time included.
    pub gap_series: Vec<f64>,
    /// `int_0^T |Y_t - Yhat_t|^2 dt`.
    pub gap_integral: f64,
    /// `int_0^T |X_t - X_{t(delta)}|^2 dt`.
    pub increment_integral: f64,
    /// `max_k |int_0^{k delta} (f(X_{s(delta)}, Yhat_s) - f-bar(X_{s(delta)})) ds|^2`
    /// over block ends; `None` without an averaged-drift source.
    pub block_functional_sup_sq: Option<f64>,
}

/// Coupled path with block-anchored auxiliary processes.
#[derive(Clone, Debug, PartialEq)]
pub struct KhasminskiiRun {
    pub times: Vec<f64>,
    pub x_norm_sq: Vec<f64>,
    pub y_norm_sq: Vec<f64>,
    /// `int_0^T |X_t|_V^2 dt`.
    pub v_energy: f64,
    pub blocks: Vec<BlockDiagnostics>,
    /// `max_n |X_n - reference_n|^2` when a reference path was supplied.
    pub reference_sup_sq: Option<f64>,
    pub path: Option<Vec<VelocityField>>,
    pub final_state: CoupledState,
}

/// Options of [`run_khasminskii`].
#[derive(Clone, Debug, Default)]
pub struct KhasminskiiOptions<'a> {
    /// Block lengths; each gets its own auxiliary process on shared `Q2` noise.
    pub deltas: Vec<f64>,
    /// Source of `f-bar` at block anchors for the block functional.
    pub fbar: Option<FbarSource>,
    /// Path to compare the slow variable against, one state per macro step.
    pub reference: Option<&'a [VelocityField]>,
    pub record_path: bool,
}

/// Simulates the coupled system on the streams `(seed, realization)` together
/// with one block-anchored auxiliary fast process per block length, all on the
/// same `Q2` increments. Block lengths are rounded to whole macro steps.
pub fn run_khasminskii(
    model: &Model,
    x0: &VelocityField,
    y0: &VelocityField,
    horizon: f64,
    opts: &KhasminskiiOptions<'_>,
    seed: u64,
    realization: u64,
) -> Result<KhasminskiiRun> {
    let mut stepper = model.stepper()?;
    let dt = model.integrator.dt;
    let steps = model.steps_for(horizon);
    if let Some(r) = opts.reference {
        if r.len() < steps + 1 {
            return Err(Error::InvalidArgument(format!(
                "reference path has {} states, need {}",
                r.len(),
                steps + 1
            )));
        }
    }
    let spb: Vec<usize> = opts
        .deltas
        .iter()
        .map(|d| {
            if d.is_finite() && *d > 0.0 {
                Ok(((d / dt).round() as usize).max(1))
            } else {
                Err(Error::InvalidArgument(format!(
                    "block length {d} must be positive"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let mut state = CoupledState::new(x0.clone(), y0.clone())?;
    let mut aux: Vec<Auxiliary> = opts
        .deltas
        .iter()
        .map(|_| Auxiliary::new(&model.spec, y0.clone(), x0.clone()))
        .collect();
    let mut evaluator = match &opts.fbar {
        Some(src) => Some(FbarEvaluator::new(model, src.clone(), realization)?),
        None => None,
    };
    let mut blocks: Vec<BlockDiagnostics> = spb
        .iter()
        .map(|s| BlockDiagnostics {
            delta: *s as f64 * dt,
            steps_per_block: *s,
            anchors: Vec::new(),
            gap_series: vec![0.0],
            gap_integral: 0.0,
            increment_integral: 0.0,
            block_functional_sup_sq: evaluator.as_ref().map(|_| 0.0),
        })
        .collect();
    let n = x0.coeffs().len();
    let mut functional: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; blocks.len()];
    let mut fbar_anchor: Vec<Option<VelocityField>> = vec![None; blocks.len()];
    let (fx, fy) = model.spec.f_coeffs();

    let mut s1 = NoiseStream::new(seed, realization, Channel::Q1);
    let mut s2 = NoiseStream::new(seed, realization, Channel::Q2);
    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut path = opts.record_path.then(|| Vec::with_capacity(steps + 1));
    let mut v_energy = 0.0;
    let mut ref_sup: Option<f64> = opts.reference.map(|_| 0.0);

    for step in 0..=steps {
        let t = step as f64 * dt;
        times.push(t);
        xs.push(state.x.h_norm_sq());
        ys.push(state.y.h_norm_sq());
        if let (Some(r), Some(sup)) = (opts.reference, ref_sup.as_mut()) {
            *sup = sup.max(state.x.distance(&r[step]).powi(2));
        }
        if let Some(p) = path.as_mut() {
            p.push(state.x.clone());
        }
        if step == steps {
            break;
        }
        for (j, b) in blocks.iter_mut().enumerate() {
            if step % b.steps_per_block == 0 {
                aux[j].set_anchor(&model.spec, &state.x);
                b.anchors.push((t, state.x.clone()));
                if let Some(ev) = evaluator.as_mut() {
                    fbar_anchor[j] = Some(ev.eval(&state.x, t)?);
                }
            }
            b.increment_integral += dt * state.x.distance(aux[j].anchor()).powi(2);
        }
        v_energy += dt * state.x.v_norm_sq();
        stepper.step_coupled_with_aux(&mut state, &mut aux, &mut s1, &mut s2)?;
        for (j, b) in blocks.iter_mut().enumerate() {
            b.gap_integral += aux[j].gap_integral;
            b.gap_series.push(state.y.distance(&aux[j].yhat).powi(2));
            if let Some(fb) = &fbar_anchor[j] {
                let anchor = aux[j].anchor().coeffs();
                for (k, acc) in functional[j].iter_mut().enumerate() {
                    *acc += (anchor[k] * fx - fb.coeffs()[k]) * dt + aux[j].phi_integral[k] * fy;
                }
                let end = (step + 1) % b.steps_per_block == 0 || step + 1 == steps;
                if end {
                    let v: f64 = functional[j].iter().map(|z| z.norm_sqr()).sum();
                    if let Some(s) = b.block_functional_sup_sq.as_mut() {
                        *s = s.max(v);
                    }
                }
            }
        }
    }
    Ok(KhasminskiiRun {
        times,
        x_norm_sq: xs,
        y_norm_sq: ys,
        v_energy,
        blocks,
        reference_sup_sq: ref_sup,
        path,
        final_state: state,
    })
}
