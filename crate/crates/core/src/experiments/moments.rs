use super::{cell_seed, csv_line, flag, fmt_f, par_map, Check, Estimate, Outcome, Report, Study};
use crate::averaging::{run_khasminskii, KhasminskiiOptions};
use crate::error::{Error, Result};
use crate::stats;

/// Slack added to the squared scale factor in the affine-growth check.
pub const GROWTH_SLACK: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentRow {
    pub epsilon: f64,
    pub p: u32,
    /// Multiplier applied to both initial conditions.
    pub scale: f64,
    /// `E sup_t |X_t|^(2p)`.
    pub sup_x: Estimate,
    /// `sup_t E |Y_t|^(2p)`.
    pub sup_y: f64,
    /// Standard error of the maximizing time slice.
    pub sup_y_stderr: f64,
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    /// Allowed max/min ratio across the `epsilon` ladder.
    pub factor: f64,
}

struct Sample {
    sup_x_sq: f64,
    y_sq: Vec<f64>,
}

/// Moment bounds of the coupled system across an `epsilon` ladder and a
/// ladder of initial-data scales.
pub fn exp_moment_bounds(
    study: &Study,
    eps_ladder: &[f64],
    p_list: &[u32],
    scales: &[f64],
    factor: f64,
) -> Result<MomentReport> {
    if eps_ladder.is_empty() || p_list.is_empty() || scales.is_empty() {
        return Err(Error::InvalidArgument(
            "empty epsilon, moment or scale ladder".into(),
        ));
    }
    if p_list.contains(&0) {
        return Err(Error::InvalidArgument(
            "moment orders must be positive".into(),
        ));
    }
    let mut eps = eps_ladder.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut models = Vec::new();
    for &e in &eps {
        let m = study.model.with_epsilon(e);
        let errs = m.params.check();
        if !errs.is_empty() {
            return Err(Error::InvalidArgument(errs.join("; ")));
        }
        models.push(m);
    }
    let combos: Vec<(f64, usize)> = scales
        .iter()
        .flat_map(|&s| (0..eps.len()).map(move |i| (s, i)))
        .collect();
    let opts = KhasminskiiOptions::default();
    let runs = par_map(study.workers, study.n_rep, |r| {
        let mut out = Vec::with_capacity(combos.len());
        for &(s, i) in &combos {
            let x0 = study.x0.scaled(s);
            let y0 = study.y0.scaled(s);
            out.push(
                match flag(run_khasminskii(
                    &models[i],
                    &x0,
                    &y0,
                    study.horizon,
                    &opts,
                    study.seed,
                    r,
                ))? {
                    Outcome::Done(run) => Outcome::Done(Sample {
                        sup_x_sq: run.x_norm_sq.iter().cloned().fold(0.0, f64::max),
                        y_sq: run.y_norm_sq,
                    }),
                    Outcome::Flagged(m) => Outcome::Flagged(m),
                },
            );
        }
        Ok(out)
    })?;

    let mut rows = Vec::new();
    for (c, &(s, i)) in combos.iter().enumerate() {
        let done: Vec<&Sample> = runs.iter().filter_map(|r| r[c].value()).collect();
        let flagged = runs.len() - done.len();
        for &p in p_list {
            let pf = p as f64;
            let xs: Vec<f64> = done.iter().map(|d| d.sup_x_sq.powf(pf)).collect();
            let n_t = done.first().map_or(0, |d| d.y_sq.len());
            let (mut sup_y, mut sup_y_stderr) = (0.0, 0.0);
            for t in 0..n_t {
                let col: Vec<f64> = done.iter().map(|d| d.y_sq[t].powf(pf)).collect();
                let m = stats::mean(&col);
                if m > sup_y {
                    sup_y = m;
                    sup_y_stderr = stats::stderr(&col);
                }
            }
            rows.push(MomentRow {
                epsilon: eps[i],
                p,
                scale: s,
                sup_x: Estimate::from_samples(
                    &xs,
                    cell_seed(study.seed, ((c as u64) << 16) | p as u64),
                ),
                sup_y,
                sup_y_stderr,
                flagged,
            });
        }
    }
    Ok(MomentReport { rows, factor })
}

fn spread(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

impl MomentReport {
    fn scales(&self) -> Vec<f64> {
        let mut s: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !s.contains(&r.scale) {
                s.push(r.scale);
            }
        }
        s
    }

    fn ps(&self) -> Vec<u32> {
        let mut ps: Vec<u32> = self.rows.iter().map(|r| r.p).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    fn select(&self, scale: f64, p: u32) -> Vec<&MomentRow> {
        self.rows
            .iter()
            .filter(|r| r.scale == scale && r.p == p)
            .collect()
    }

    /// `max / min` of `(E sup |X|^(2p), sup E |Y|^(2p))` over the `epsilon` ladder at `scale`.
    pub fn uniformity(&self, scale: f64, p: u32) -> (f64, f64) {
        let sel = self.select(scale, p);
        let xs: Vec<f64> = sel.iter().map(|r| r.sup_x.mean).collect();
        let ys: Vec<f64> = sel.iter().map(|r| r.sup_y).collect();
        (spread(&xs), spread(&ys))
    }
}

impl Report for MomentReport {
    fn csv(&self) -> String {
        let mut out = String::from(
            "epsilon,p,scale,n_eff,flagged,sup_x,sup_x_stderr,sup_x_ci_lo,sup_x_ci_hi,sup_y,sup_y_stderr\n",
        );
        for r in &self.rows {
            csv_line(
                &mut out,
                &[
                    fmt_f(r.epsilon),
                    r.p.to_string(),
                    fmt_f(r.scale),
                    r.sup_x.n.to_string(),
                    r.flagged.to_string(),
                    fmt_f(r.sup_x.mean),
                    fmt_f(r.sup_x.stderr),
                    fmt_f(r.sup_x.ci_lo),
                    fmt_f(r.sup_x.ci_hi),
                    fmt_f(r.sup_y),
                    fmt_f(r.sup_y_stderr),
                ],
            );
        }
        out
    }

    fn checks(&self) -> Vec<Check> {
        let flagged: usize = self.rows.iter().map(|r| r.flagged).max().unwrap_or(0);
        let mut checks = vec![Check::new(
            "no_flagged",
            flagged == 0,
            format!("{flagged} flagged paths"),
        )];
        let scales = self.scales();
        let base = scales[0];
        for p in self.ps() {
            let sel = self.select(base, p);
            if sel.iter().all(|r| r.sup_x.mean == 0.0 && r.sup_y == 0.0) {
                checks.push(Check::skip(
                    &format!("uniform_p{p}"),
                    "all moments vanish".into(),
                ));
                continue;
            }
            let (sx, sy) = self.uniformity(base, p);
            checks.push(Check::new(
                &format!("uniform_x_p{p}"),
                sx <= self.factor,
                format!(
                    "max/min of E sup|X|^{} over epsilon = {sx:.4} (limit {})",
                    2 * p,
                    self.factor
                ),
            ));
            checks.push(Check::new(
                &format!("uniform_y_p{p}"),
                sy <= self.factor,
                format!(
                    "max/min of sup E|Y|^{} over epsilon = {sy:.4} (limit {})",
                    2 * p,
                    self.factor
                ),
            ));
        }
        for &s in scales.iter().skip(1) {
            let limit = (s / base).powi(2) + GROWTH_SLACK;
            let lo = self.select(base, 1);
            let hi = self.select(s, 1);
            if lo.is_empty() {
                break;
            }
            let worst = lo
                .iter()
                .zip(&hi)
                .flat_map(|(a, b)| [b.sup_x.mean / a.sup_x.mean, b.sup_y / a.sup_y])
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max);
            checks.push(Check::new(
                &format!("affine_growth_x{s}"),
                worst <= limit,
                format!("worst p=1 growth ratio {worst:.4} (limit {limit})"),
            ));
        }
        checks
    }
}
