use super::{csv_line, fmt_f, par_map, Check, Report};
use crate::averaging::{
    estimate_decay_rate, estimate_fbar, fbar_oracle_linear, invariant_moment,
    invariant_moment_linear, DecayConfig, ErgodicConfig,
};
use crate::error::{Error, Result};
use crate::fields::{validate_assumptions, CouplingSpec, ModelParams, VelocityField};
use crate::stochastic::{derive_seed, CovarianceSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct MixingRow {
    pub x_norm: f64,
    pub rate: f64,
    pub ci: (f64, f64),
    pub r_squared: f64,
    /// `int |y|^2 nu^x(dy)`.
    pub moment: f64,
    pub moment_stderr: f64,
    pub nonstationary: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingReport {
    pub zeta_mix: f64,
    pub xi: f64,
    /// In the order of the supplied slow states.
    pub rows: Vec<MixingRow>,
}

/// Synchronous-coupling decay rates and invariant second moments of the
/// frozen equation at each slow state in `x_list`.
#[allow(clippy::too_many_arguments)]
pub fn exp_mixing(
    params: &ModelParams,
    spec: &CouplingSpec,
    cov2: &CovarianceSpec,
    x_list: &[VelocityField],
    y_pair: (&VelocityField, &VelocityField),
    decay: &DecayConfig,
    ergodic: &ErgodicConfig,
    seed: u64,
    workers: usize,
) -> Result<MixingReport> {
    let rep = validate_assumptions(params, spec);
    rep.require_admissible()?;
    if x_list.is_empty() {
        return Err(Error::InvalidArgument("no slow states to probe".into()));
    }
    let rows = par_map(workers, x_list.len(), |i| {
        let x = &x_list[i as usize];
        let d = estimate_decay_rate(
            x,
            y_pair.0,
            y_pair.1,
            params,
            spec,
            cov2,
            decay,
            derive_seed(seed, 2 * i),
        )?;
        let m = invariant_moment(x, params, spec, cov2, ergodic, derive_seed(seed, 2 * i + 1))?;
        Ok(MixingRow {
            x_norm: x.h_norm(),
            rate: d.rate,
            ci: d.ci,
            r_squared: d.r_squared,
            moment: m.mean,
            moment_stderr: m.stderr,
            nonstationary: m.nonstationary,
        })
    })?;
    Ok(MixingReport {
        zeta_mix: rep.zeta_mix,
        xi: rep.xi,
        rows,
    })
}

impl Report for MixingReport {
    fn csv(&self) -> String {
        let mut out = String::from(
            "x_norm,rate,ci_lo,ci_hi,r_squared,zeta_mix,moment,moment_stderr,moment_normalized,nonstationary\n",
        );
        for r in &self.rows {
            csv_line(
                &mut out,
                &[
                    fmt_f(r.x_norm),
                    fmt_f(r.rate),
                    fmt_f(r.ci.0),
                    fmt_f(r.ci.1),
                    fmt_f(r.r_squared),
                    fmt_f(self.zeta_mix),
                    fmt_f(r.moment),
                    fmt_f(r.moment_stderr),
                    fmt_f(r.moment / (1.0 + r.x_norm * r.x_norm)),
                    r.nonstationary.to_string(),
                ],
            );
        }
        out
    }

    fn checks(&self) -> Vec<Check> {
        let worst = self
            .rows
            .iter()
            .map(|r| r.rate - (self.zeta_mix - (r.ci.1 - r.ci.0)))
            .fold(f64::INFINITY, f64::min);
        let listing = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "|x|={:.3}: {:.4} [{:.4}, {:.4}]",
                    r.x_norm, r.rate, r.ci.0, r.ci.1
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        let mut checks = vec![Check::new(
            "rate_bound",
            worst >= 0.0,
            format!("zeta_mix = {:.4}; {listing}", self.zeta_mix),
        )];
        let overlap = self.rows.iter().all(|a| {
            self.rows
                .iter()
                .all(|b| a.ci.0 <= b.ci.1 && b.ci.0 <= a.ci.1)
        });
        checks.push(Check::new(
            "rate_x_consistency",
            overlap,
            "bootstrap intervals of the rate overlap across slow states".into(),
        ));
        let lo = self
            .rows
            .iter()
            .min_by(|a, b| a.x_norm.total_cmp(&b.x_norm))
            .unwrap();
        let hi = self
            .rows
            .iter()
            .max_by(|a, b| a.x_norm.total_cmp(&b.x_norm))
            .unwrap();
        checks.push(Check::new(
            "moment_order",
            lo.moment <= hi.moment + 3.0 * (lo.moment_stderr + hi.moment_stderr),
            format!(
                "moment at |x|={:.3}: {:.4e}, at |x|={:.3}: {:.4e}",
                lo.x_norm, lo.moment, hi.x_norm, hi.moment
            ),
        ));
        let ns = self.rows.iter().filter(|r| r.nonstationary).count();
        checks.push(Check::new(
            "stationary",
            ns == 0,
            format!("{ns} nonstationary windows"),
        ));
        checks
    }
}

/// Inputs of the closed-form Ornstein-Uhlenbeck checks (linear family, `beta = 0`).
#[derive(Clone, Debug)]
pub struct OuOracleConfig {
    pub params: ModelParams,
    pub spec: CouplingSpec,
    pub cov2: CovarianceSpec,
    pub x: VelocityField,
    pub ergodic: ErgodicConfig,
    pub repetitions: usize,
    pub decay: DecayConfig,
    /// Initial separation of the synchronous pair, typically on the slowest mode.
    pub gap: VelocityField,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuOracleReport {
    pub repetitions: usize,
    /// Real and imaginary parts of every representative mode, over all repetitions.
    pub coordinates: usize,
    pub covered: usize,
    /// Repetitions in which every coordinate is within 3 standard errors.
    pub reps_fully_covered: usize,
    pub moment: f64,
    pub moment_stderr: f64,
    pub moment_exact: f64,
    pub rate: f64,
    pub rate_ci: (f64, f64),
    pub rate_exact: f64,
}

impl OuOracleReport {
    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.coordinates.max(1) as f64
    }

    pub fn rate_error(&self) -> f64 {
        (self.rate - self.rate_exact).abs() / self.rate_exact
    }
}

/// Compares the averaged-drift estimator, the invariant second moment and
/// the slowest-mode coupling rate with their closed forms.
pub fn exp_ou_oracle(cfg: &OuOracleConfig) -> Result<OuOracleReport> {
    let lin = *cfg.spec.as_linear().ok_or_else(|| {
        Error::InvalidCoupling(format!(
            "oracle checks need the linear family, got {}",
            cfg.spec.family_name()
        ))
    })?;
    let oracle = fbar_oracle_linear(&cfg.x, &cfg.params, &cfg.spec)?;
    let basis = cfg.x.basis().clone();
    let reps = basis.representatives().to_vec();
    let cover = par_map(cfg.workers, cfg.repetitions, |rep| {
        let est = estimate_fbar(
            &cfg.x,
            &cfg.params,
            &cfg.spec,
            &cfg.cov2,
            &cfg.ergodic,
            derive_seed(cfg.seed, rep),
        )?;
        let (mut n, mut hit) = (0usize, 0usize);
        for &i in &reps {
            let d = est.value.coeffs()[i] - oracle.coeffs()[i];
            for (e, se) in [d.re, d.im].into_iter().zip(est.stderr_parts[i]) {
                if se > 0.0 {
                    n += 1;
                    hit += usize::from(e.abs() <= 3.0 * se);
                }
            }
        }
        Ok((n, hit))
    })?;
    let moment = invariant_moment(
        &cfg.x,
        &cfg.params,
        &cfg.spec,
        &cfg.cov2,
        &cfg.ergodic,
        derive_seed(cfg.seed, 0xA0_0000),
    )?;
    let zero = VelocityField::zeros(&basis);
    let decay = estimate_decay_rate(
        &cfg.x,
        &zero,
        &cfg.gap,
        &cfg.params,
        &cfg.spec,
        &cfg.cov2,
        &cfg.decay,
        derive_seed(cfg.seed, 0xA0_0001),
    )?;
    Ok(OuOracleReport {
        repetitions: cfg.repetitions,
        coordinates: cover.iter().map(|c| c.0).sum(),
        covered: cover.iter().map(|c| c.1).sum(),
        reps_fully_covered: cover.iter().filter(|c| c.0 == c.1).count(),
        moment: moment.mean,
        moment_stderr: moment.stderr,
        moment_exact: invariant_moment_linear(&cfg.x, &cfg.params, &cfg.spec, &cfg.cov2)?,
        rate: decay.rate,
        rate_ci: decay.ci,
        rate_exact: 2.0 * (cfg.params.mu * basis.lambda_1() + lin.g_damp),
    })
}

impl Report for OuOracleReport {
    fn csv(&self) -> String {
        let mut out = String::from("quantity,estimate,stderr_or_ci_lo,ci_hi,exact\n");
        csv_line(
            &mut out,
            &[
                "fbar_coverage".into(),
                fmt_f(self.coverage()),
                self.covered.to_string(),
                self.coordinates.to_string(),
                "0.99".into(),
            ],
        );
        csv_line(
            &mut out,
            &[
                "second_moment".into(),
                fmt_f(self.moment),
                fmt_f(self.moment_stderr),
                String::new(),
                fmt_f(self.moment_exact),
            ],
        );
        csv_line(
            &mut out,
            &[
                "decay_rate".into(),
                fmt_f(self.rate),
                fmt_f(self.rate_ci.0),
                fmt_f(self.rate_ci.1),
                fmt_f(self.rate_exact),
            ],
        );
        out
    }

    fn checks(&self) -> Vec<Check> {
        vec![
            Check::new(
                "fbar_coverage",
                self.coverage() >= 0.99,
                format!(
                    "{}/{} coordinates within 3 stderr ({:.4}); {}/{} repetitions fully covered",
                    self.covered,
                    self.coordinates,
                    self.coverage(),
                    self.reps_fully_covered,
                    self.repetitions
                ),
            ),
            Check::new(
                "second_moment",
                (self.moment - self.moment_exact).abs() <= 3.0 * self.moment_stderr,
                format!(
                    "{:.6} +- {:.2e} vs exact {:.6}",
                    self.moment, self.moment_stderr, self.moment_exact
                ),
            ),
            Check::new(
                "decay_rate",
                self.rate_error() <= 0.1,
                format!(
                    "{:.4} vs exact {:.4} (relative error {:.4})",
                    self.rate,
                    self.rate_exact,
                    self.rate_error()
                ),
            ),
        ]
    }
}
