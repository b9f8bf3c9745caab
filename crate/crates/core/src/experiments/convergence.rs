use std::fmt::Write as _;

use super::{
    cell_seed, csv_line, flag, fmt_f, par_map, powered, strictly_decreasing, Check, Estimate,
    Outcome, Report, Study,
};
use crate::averaging::{
    run_averaged, run_khasminskii, FbarLogEntry, FbarSource, KhasminskiiOptions,
};
use crate::error::{Error, Result};
use crate::stats;

/// Largest fraction of flagged paths a row may carry and still be used.
pub const MAX_FLAGGED_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// Block length `epsilon^(2/3)` of the auxiliary diagnostics.
    pub delta: f64,
    pub p: u32,
    pub n_rep: usize,
    /// `E sup_t |X^eps_t - Xbar_t|^(2p)` over unflagged paths.
    pub estimate: Estimate,
    pub flagged: usize,
    pub usable: bool,
    /// Fraction of paths with `int_0^T |X^eps|_V^2 dt > R`.
    pub energy_exceed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    /// Sorted by `epsilon` descending, then by `p`.
    pub rows: Vec<ConvergenceRow>,
    pub fbar_source: &'static str,
    pub energy_threshold: f64,
    /// Realizations whose averaged path blew up (flagged in every row).
    pub averaged_flagged: usize,
    pub fbar_requests: usize,
    pub fbar_estimates: usize,
    pub fbar_max_stderr: f64,
    /// `(realization, entry)` for every fresh averaged-drift estimate.
    pub fbar_log: Vec<(u64, FbarLogEntry)>,
}

struct PerPath {
    sup_sq: Vec<f64>,
    v_energy: Vec<f64>,
    requests: usize,
    max_stderr: f64,
    log: Vec<FbarLogEntry>,
}

/// Pairs coupled runs at every `epsilon` with one averaged path per
/// realization on the same `Q1` increments and tabulates
/// `E sup_t |X^eps - Xbar|^(2p)`.
pub fn exp_convergence(
    study: &Study,
    eps_ladder: &[f64],
    p_list: &[u32],
    fbar: &FbarSource,
    energy_threshold: f64,
) -> Result<ConvergenceTable> {
    if eps_ladder.len() < 3 {
        return Err(Error::InvalidArgument(
            "the epsilon ladder needs at least 3 values".into(),
        ));
    }
    if p_list.is_empty() || p_list.contains(&0) {
        return Err(Error::InvalidArgument(
            "moment orders must be positive".into(),
        ));
    }
    let mut eps: Vec<f64> = eps_ladder.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let models: Vec<_> = eps.iter().map(|&e| study.model.with_epsilon(e)).collect();
    for m in &models {
        let errs = m.params.check();
        if !errs.is_empty() {
            return Err(Error::InvalidArgument(errs.join("; ")));
        }
    }

    let outcomes = par_map(study.workers, study.n_rep, |r| {
        let avg = match flag(run_averaged(
            &study.model,
            &study.x0,
            study.horizon,
            fbar,
            study.seed,
            r,
        ))? {
            Outcome::Done(a) => a,
            Outcome::Flagged(m) => return Ok(Outcome::Flagged(m)),
        };
        let mut sup_sq = Vec::with_capacity(models.len());
        let mut v_energy = Vec::with_capacity(models.len());
        for (m, &e) in models.iter().zip(&eps) {
            let opts = KhasminskiiOptions {
                deltas: vec![e.powf(2.0 / 3.0)],
                reference: Some(&avg.path),
                ..Default::default()
            };
            match flag(run_khasminskii(
                m,
                &study.x0,
                &study.y0,
                study.horizon,
                &opts,
                study.seed,
                r,
            ))? {
                Outcome::Done(run) => {
                    sup_sq.push(run.reference_sup_sq.unwrap_or(f64::NAN));
                    v_energy.push(run.v_energy);
                }
                Outcome::Flagged(_) => {
                    sup_sq.push(f64::NAN);
                    v_energy.push(f64::NAN);
                }
            }
        }
        Ok(Outcome::Done(PerPath {
            sup_sq,
            v_energy,
            requests: avg.requests,
            max_stderr: avg.max_stderr,
            log: avg.log,
        }))
    })?;

    let sups: Vec<Outcome<Vec<f64>>> = outcomes
        .iter()
        .map(|o| match o {
            Outcome::Done(p) => Outcome::Done(p.sup_sq.clone()),
            Outcome::Flagged(m) => Outcome::Flagged(m.clone()),
        })
        .collect();
    let mut rows = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let exceed: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.value())
            .filter(|p| p.v_energy[i].is_finite())
            .map(|p| {
                if p.v_energy[i] > energy_threshold {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for &p in p_list {
            let (xs, flagged) = powered(&sups, i, p as f64);
            let cell = (i as u64) << 16 | p as u64;
            rows.push(ConvergenceRow {
                epsilon: e,
                delta: e.powf(2.0 / 3.0),
                p,
                n_rep: study.n_rep,
                estimate: Estimate::from_samples(&xs, cell_seed(study.seed, cell)),
                flagged,
                usable: (flagged as f64) <= MAX_FLAGGED_FRACTION * study.n_rep as f64
                    && !xs.is_empty(),
                energy_exceed: stats::mean(&exceed),
            });
        }
    }

    let mut table = ConvergenceTable {
        rows,
        fbar_source: fbar.name(),
        energy_threshold,
        averaged_flagged: 0,
        fbar_requests: 0,
        fbar_estimates: 0,
        fbar_max_stderr: 0.0,
        fbar_log: Vec::new(),
    };
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Outcome::Done(p) => {
                table.fbar_requests += p.requests;
                table.fbar_estimates += p.log.len();
                table.fbar_max_stderr = table.fbar_max_stderr.max(p.max_stderr);
                table
                    .fbar_log
                    .extend(p.log.into_iter().map(|e| (r as u64, e)));
            }
            Outcome::Flagged(_) => table.averaged_flagged += 1,
        }
    }
    Ok(table)
}

impl ConvergenceTable {
    pub fn p_values(&self) -> Vec<u32> {
        let mut ps: Vec<u32> = self.rows.iter().map(|r| r.p).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    /// Rows of one moment order, `epsilon` descending.
    pub fn column(&self, p: u32) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.p == p).collect()
    }

    /// Log-log regression of the estimate against `epsilon` for order `p`.
    pub fn slope(&self, p: u32) -> Option<stats::LinearFit> {
        let col = self.column(p);
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            col.iter().map(|r| (r.epsilon, r.estimate.mean)).unzip();
        stats::log_log_fit(&xs, &ys)
    }

    /// `t, call_index, stderr, horizon` per fresh averaged-drift estimate.
    pub fn fbar_log_csv(&self) -> String {
        let mut out = String::from("realization,t,call_index,stderr,horizon\n");
        for (r, e) in &self.fbar_log {
            let _ = writeln!(
                out,
                "{r},{},{},{},{}",
                fmt_f(e.t),
                e.call_index,
                fmt_f(e.stderr),
                fmt_f(e.horizon)
            );
        }
        out
    }
}

impl Report for ConvergenceTable {
    fn csv(&self) -> String {
        let mut out = String::from(
            "epsilon,delta,p,n_rep,n_eff,flagged,usable,estimate,stderr,ci_lo,ci_hi,energy_exceed\n",
        );
        for r in &self.rows {
            csv_line(
                &mut out,
                &[
                    fmt_f(r.epsilon),
                    fmt_f(r.delta),
                    r.p.to_string(),
                    r.n_rep.to_string(),
                    r.estimate.n.to_string(),
                    r.flagged.to_string(),
                    r.usable.to_string(),
                    fmt_f(r.estimate.mean),
                    fmt_f(r.estimate.stderr),
                    fmt_f(r.estimate.ci_lo),
                    fmt_f(r.estimate.ci_hi),
                    fmt_f(r.energy_exceed),
                ],
            );
        }
        out
    }

    fn checks(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        let bad: Vec<String> = self
            .rows
            .iter()
            .filter(|r| !r.usable)
            .map(|r| format!("eps={} p={} ({} flagged)", r.epsilon, r.p, r.flagged))
            .collect();
        checks.push(Check::new(
            "rows_usable",
            bad.is_empty(),
            if bad.is_empty() {
                format!(
                    "{} rows, averaged paths flagged: {}",
                    self.rows.len(),
                    self.averaged_flagged
                )
            } else {
                format!("unusable rows: {}", bad.join("; "))
            },
        ));
        for p in self.p_values() {
            let col = self.column(p);
            let est: Vec<Estimate> = col.iter().map(|r| r.estimate).collect();
            let listing = col
                .iter()
                .map(|r| {
                    format!(
                        "eps={}: {:.4e} [{:.4e}, {:.4e}]",
                        r.epsilon, r.estimate.mean, r.estimate.ci_lo, r.estimate.ci_hi
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            if est.iter().all(|e| e.ci_hi <= 1e-24) {
                checks.push(Check::skip(
                    &format!("decreasing_p{p}"),
                    "gap vanishes identically (slow drift independent of the fast variable)".into(),
                ));
                continue;
            }
            checks.push(Check::new(
                &format!("decreasing_p{p}"),
                col.iter().all(|r| r.usable) && strictly_decreasing(&est),
                listing,
            ));
            let fit = self.slope(p);
            checks.push(Check::new(
                &format!("slope_p{p}"),
                fit.is_some_and(|f| f.slope > 0.0),
                match fit {
                    Some(f) => format!("log-log slope {:.4} (R^2 {:.3})", f.slope, f.r_squared),
                    None => "slope undefined (nonpositive estimate)".into(),
                },
            ));
        }
        checks
    }
}
