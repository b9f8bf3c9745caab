use super::{
    cell_seed, csv_line, flag, fmt_f, par_map, powered, strictly_decreasing, Check, Estimate,
    Outcome, Report, Study,
};
use crate::averaging::{run_khasminskii, KhasminskiiOptions};
use crate::error::{Error, Result};
use crate::stats;

/// Which block statistic a ladder measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingKind {
    /// `E int_0^T |X_t - X_{t(delta)}|^2 dt`.
    TimeHolder,
    /// `E int_0^T |Y_t - Yhat_t|^2 dt`.
    AuxGap,
}

impl ScalingKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalingKind::TimeHolder => "time_holder",
            ScalingKind::AuxGap => "aux_gap",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    /// Block length `delta` (as realized on the macro grid).
    pub control: f64,
    pub estimate: Estimate,
    /// `estimate / delta^(1/2)`.
    pub ratio: f64,
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub kind: ScalingKind,
    /// Sorted by `control` descending.
    pub rows: Vec<ScalingRow>,
    /// Log-log regression of the statistic on `delta`; `None` with fewer
    /// than 3 rungs or a vanishing statistic.
    pub fit: Option<stats::LinearFit>,
    /// `max ratio / min ratio` over the ladder.
    pub ratio_spread: f64,
}

impl ScalingReport {
    fn build(kind: ScalingKind, deltas: &[f64], values: &[Outcome<Vec<f64>>], seed: u64) -> Self {
        let rows: Vec<ScalingRow> = deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let (xs, flagged) = powered(values, i, 1.0);
                let estimate =
                    Estimate::from_samples(&xs, cell_seed(seed, ((kind as u64) << 16) | i as u64));
                ScalingRow {
                    control: d,
                    ratio: estimate.mean / d.sqrt(),
                    estimate,
                    flagged,
                }
            })
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            rows.iter().map(|r| (r.control, r.estimate.mean)).unzip();
        let fit = if rows.len() >= 3 {
            stats::log_log_fit(&xs, &ys)
        } else {
            None
        };
        let rmax = rows
            .iter()
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        let rmin = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        ScalingReport {
            kind,
            rows,
            fit,
            ratio_spread: rmax / rmin,
        }
    }

    pub fn flagged(&self) -> usize {
        self.rows.iter().map(|r| r.flagged).max().unwrap_or(0)
    }

    fn vanishes(&self) -> bool {
        self.rows.iter().all(|r| r.estimate.ci_hi <= 1e-24)
    }
}

/// Runs the block-anchored diagnostics once and returns the time-increment
/// and auxiliary-gap ladders measured on the same paths.
pub fn exp_khasminskii_ladder(
    study: &Study,
    deltas: &[f64],
) -> Result<(ScalingReport, ScalingReport)> {
    if deltas.len() < 3 {
        return Err(Error::InvalidArgument(
            "the delta ladder needs at least 3 values".into(),
        ));
    }
    let dt = study.model.integrator.dt;
    let mut ds: Vec<f64> = deltas.to_vec();
    ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if ds
        .iter()
        .any(|d| d.is_nan() || *d <= 0.0 || *d < dt * (1.0 - 1e-9))
    {
        return Err(Error::InvalidArgument(format!(
            "block lengths must be at least dt = {dt}"
        )));
    }
    let opts = KhasminskiiOptions {
        deltas: ds.clone(),
        ..Default::default()
    };
    let runs = par_map(study.workers, study.n_rep, |r| {
        flag(run_khasminskii(
            &study.model,
            &study.x0,
            &study.y0,
            study.horizon,
            &opts,
            study.seed,
            r,
        ))
    })?;
    let pick = |f: fn(&crate::averaging::BlockDiagnostics) -> f64| -> Vec<Outcome<Vec<f64>>> {
        runs.iter()
            .map(|o| match o {
                Outcome::Done(run) => Outcome::Done(run.blocks.iter().map(f).collect()),
                Outcome::Flagged(m) => Outcome::Flagged(m.clone()),
            })
            .collect()
    };
    let realized: Vec<f64> = ds
        .iter()
        .map(|d| ((d / dt).round().max(1.0)) * dt)
        .collect();
    let holder = ScalingReport::build(
        ScalingKind::TimeHolder,
        &realized,
        &pick(|b| b.increment_integral),
        study.seed,
    );
    let gap = ScalingReport::build(
        ScalingKind::AuxGap,
        &realized,
        &pick(|b| b.gap_integral),
        study.seed,
    );
    Ok((holder, gap))
}

/// `E int_0^T |X_t - X_{t(delta)}|^2 dt` across a block-length ladder.
pub fn exp_time_holder(study: &Study, deltas: &[f64]) -> Result<ScalingReport> {
    exp_khasminskii_ladder(study, deltas).map(|(h, _)| h)
}

/// `E int_0^T |Y_t - Yhat_t|^2 dt` across a block-length ladder, all
/// auxiliary processes on the coupled run's `Q2` increments.
pub fn exp_aux_gap(study: &Study, deltas: &[f64]) -> Result<ScalingReport> {
    exp_khasminskii_ladder(study, deltas).map(|(_, g)| g)
}

impl Report for ScalingReport {
    fn csv(&self) -> String {
        let mut out = String::from("delta,n_eff,flagged,estimate,stderr,ci_lo,ci_hi,ratio\n");
        for r in &self.rows {
            csv_line(
                &mut out,
                &[
                    fmt_f(r.control),
                    r.estimate.n.to_string(),
                    r.flagged.to_string(),
                    fmt_f(r.estimate.mean),
                    fmt_f(r.estimate.stderr),
                    fmt_f(r.estimate.ci_lo),
                    fmt_f(r.estimate.ci_hi),
                    fmt_f(r.ratio),
                ],
            );
        }
        out
    }

    fn checks(&self) -> Vec<Check> {
        let flagged = self.flagged();
        let mut checks = vec![Check::new(
            "no_flagged",
            flagged == 0,
            format!("{flagged} flagged paths"),
        )];
        if self.vanishes() {
            checks.push(Check::skip(
                self.kind.name(),
                "statistic vanishes identically".into(),
            ));
            return checks;
        }
        let slope = self.fit.map(|f| f.slope);
        match self.kind {
            ScalingKind::TimeHolder => {
                checks.push(Check::new(
                    "ratio_spread",
                    self.ratio_spread <= 2.0,
                    format!("max/min of statistic/delta^0.5 = {:.4}", self.ratio_spread),
                ));
                checks.push(Check::new(
                    "slope",
                    slope.is_some_and(|s| s >= 0.45),
                    format!(
                        "log-log slope {}",
                        slope.map_or("undefined".into(), |s| format!("{s:.4}"))
                    ),
                ));
            }
            ScalingKind::AuxGap => {
                let est: Vec<Estimate> = self.rows.iter().map(|r| r.estimate).collect();
                let listing = self
                    .rows
                    .iter()
                    .map(|r| {
                        format!(
                            "delta={}: {:.4e} [{:.4e}, {:.4e}]",
                            r.control, r.estimate.mean, r.estimate.ci_lo, r.estimate.ci_hi
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                checks.push(Check::new("decreasing", strictly_decreasing(&est), listing));
                let first = self.rows[0].ratio;
                let worst = self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
                checks.push(Check::new(
                    "ratio_bounded",
                    worst <= 2.0 * first,
                    format!("max statistic/delta^0.5 = {worst:.4e}, at largest delta {first:.4e}"),
                ));
            }
        }
        checks
    }
}
