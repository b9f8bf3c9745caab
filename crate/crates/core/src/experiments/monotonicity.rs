use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{csv_line, fmt_f, Check, Report};
use crate::error::{Error, Result};
use crate::fields::{
    apply_convection, apply_damping, apply_g, damping_order, lp_integral, monotonicity_constant,
    ModelParams, StokesBasis, VelocityField,
};
use crate::stochastic::derive_seed;

/// Tolerance on the scaled skew-symmetry defect of the convection form.
pub const SKEW_TOL: f64 = 1e-10;
/// Tolerance on monotonicity margins.
pub const MARGIN_TOL: f64 = 1e-8;

/// Which monotonicity statement applies to `G = mu A + B + beta C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GMonotonicity {
    /// `G + eta I` is monotone (`r > 3`, `beta > 0`).
    Shifted {
        eta: f64,
    },
    /// `G` itself is monotone (`r = 3`, `2 beta mu >= 1`).
    Global,
    NotApplicable,
}

impl GMonotonicity {
    pub fn for_params(params: &ModelParams) -> Self {
        if let Ok(eta) = monotonicity_constant(params) {
            GMonotonicity::Shifted { eta }
        } else if params.r == 3.0 && 2.0 * params.beta * params.mu >= 1.0 {
            GMonotonicity::Global
        } else {
            GMonotonicity::NotApplicable
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GMonotonicity::Shifted { .. } => "shifted",
            GMonotonicity::Global => "global",
            GMonotonicity::NotApplicable => "none",
        }
    }

    fn eta(&self) -> Option<f64> {
        match self {
            GMonotonicity::Shifted { eta } => Some(*eta),
            GMonotonicity::Global => Some(0.0),
            GMonotonicity::NotApplicable => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityRow {
    pub r: f64,
    pub n_samples: usize,
    /// `max |<B(u,v),v>| / ((1 + |u|_H)(1 + |v|_V)^2)`.
    pub skew_worst: f64,
    /// `min <C(u)-C(v),u-v> - 2^{-(r-1)} |u-v|_{L^{r+1}}^{r+1}`.
    pub damping_margin: f64,
    pub g_kind: GMonotonicity,
    /// `min <G(u)-G(v),u-v> + eta |u-v|_H^2`, when a statement applies.
    pub g_margin: Option<f64>,
    /// Largest absolute margin over the diagonal pairs `u = v`.
    pub equal_pair_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub mu: f64,
    pub beta: f64,
    pub rows: Vec<MonotonicityRow>,
}

fn sample<R: Rng>(basis: &Arc<StokesBasis>, rng: &mut R, log_scale: (f64, f64)) -> VelocityField {
    let s = 10f64.powf(rng.random_range(log_scale.0..=log_scale.1));
    VelocityField::random_regular(basis, rng, s)
}

fn margins(
    u: &VelocityField,
    v: &VelocityField,
    params: &ModelParams,
    kind: GMonotonicity,
) -> Result<[f64; 3]> {
    let r = params.r;
    let w = u.sub(v);
    let b = apply_convection(u, v)?;
    let skew = b.inner(v).abs() / ((1.0 + u.h_norm()) * (1.0 + v.v_norm()).powi(2));
    let dc = apply_damping(u, r)?.sub(&apply_damping(v, r)?);
    let damping = dc.inner(&w) - 2f64.powf(-(r - 1.0)) * lp_integral(&w, r + 1.0);
    let g = match kind.eta() {
        Some(eta) => {
            let dg =
                apply_g(u, params.mu, params.beta, r)?.sub(&apply_g(v, params.mu, params.beta, r)?);
            dg.inner(&w) + eta * w.h_norm_sq()
        }
        None => f64::NAN,
    };
    Ok([skew, damping, g])
}

/// Evaluates the convection skew-symmetry, the damping monotonicity bound
/// and the applicable monotonicity of `G` on `n_samples` random pairs per
/// exponent. Amplitudes are log-uniform over `10^log_scale`.
pub fn exp_monotonicity(
    basis: &Arc<StokesBasis>,
    mu: f64,
    beta: f64,
    r_list: &[f64],
    n_samples: usize,
    log_scale: (f64, f64),
    seed: u64,
) -> Result<MonotonicityReport> {
    if n_samples == 0 || r_list.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one sample and one exponent".into(),
        ));
    }
    if log_scale.0.is_nan() || log_scale.1.is_nan() || log_scale.0 > log_scale.1 {
        return Err(Error::InvalidArgument("empty amplitude range".into()));
    }
    let mut rows = Vec::with_capacity(r_list.len());
    for (i, &r) in r_list.iter().enumerate() {
        basis.check_order(damping_order(r))?;
        let params = ModelParams {
            mu,
            beta,
            r,
            ..ModelParams::default()
        };
        let kind = GMonotonicity::for_params(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let mut row = MonotonicityRow {
            r,
            n_samples,
            skew_worst: 0.0,
            damping_margin: f64::INFINITY,
            g_kind: kind,
            g_margin: kind.eta().map(|_| f64::INFINITY),
            equal_pair_max: 0.0,
        };
        for _ in 0..n_samples {
            let u = sample(basis, &mut rng, log_scale);
            let v = sample(basis, &mut rng, log_scale);
            let [skew, damping, g] = margins(&u, &v, &params, kind)?;
            row.skew_worst = row.skew_worst.max(skew);
            row.damping_margin = row.damping_margin.min(damping);
            if let Some(m) = row.g_margin.as_mut() {
                *m = m.min(g);
            }
            let [_, d0, g0] = margins(&u, &u, &params, kind)?;
            let g0 = if g0.is_nan() { 0.0 } else { g0.abs() };
            row.equal_pair_max = row.equal_pair_max.max(d0.abs()).max(g0);
        }
        rows.push(row);
    }
    Ok(MonotonicityReport { mu, beta, rows })
}

impl Report for MonotonicityReport {
    fn csv(&self) -> String {
        let mut out = String::from(
            "r,n_samples,skew_worst,damping_margin,g_kind,eta,g_margin,equal_pair_max\n",
        );
        for r in &self.rows {
            csv_line(
                &mut out,
                &[
                    fmt_f(r.r),
                    r.n_samples.to_string(),
                    fmt_f(r.skew_worst),
                    fmt_f(r.damping_margin),
                    r.g_kind.name().to_string(),
                    r.g_kind.eta().map_or(String::new(), fmt_f),
                    r.g_margin.map_or(String::new(), fmt_f),
                    fmt_f(r.equal_pair_max),
                ],
            );
        }
        out
    }

    fn checks(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        for row in &self.rows {
            let r = row.r;
            checks.push(Check::new(
                &format!("skew_r{r}"),
                row.skew_worst <= SKEW_TOL,
                format!("worst scaled |<B(u,v),v>| = {:.3e}", row.skew_worst),
            ));
            checks.push(Check::new(
                &format!("damping_r{r}"),
                row.damping_margin >= -MARGIN_TOL,
                format!("worst damping margin = {:.3e}", row.damping_margin),
            ));
            match (row.g_kind, row.g_margin) {
                (GMonotonicity::NotApplicable, _) | (_, None) => checks.push(Check::skip(
                    &format!("g_monotone_r{r}"),
                    format!(
                        "no monotonicity statement for r={r}, mu={}, beta={}",
                        self.mu, self.beta
                    ),
                )),
                (kind, Some(m)) => checks.push(Check::new(
                    &format!("g_monotone_r{r}"),
                    m >= -MARGIN_TOL,
                    format!(
                        "{} monotonicity, eta = {}, worst margin = {m:.3e}",
                        kind.name(),
                        kind.eta().unwrap_or(0.0)
                    ),
                )),
            }
            checks.push(Check::new(
                &format!("diagonal_r{r}"),
                row.equal_pair_max == 0.0,
                format!("largest margin at u = v: {:.3e}", row.equal_pair_max),
            ));
        }
        checks
    }
}
