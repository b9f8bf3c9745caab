//! Monte Carlo studies that turn the operator inequalities, moment bounds,
//! mixing rates and the averaging principle into pass/fail statistics.
//!
//! Every study is a pure function of its inputs and seed: realizations are
//! indexed, mapped in parallel on a dedicated pool, collected in index order
//! and reduced sequentially, so the worker count never changes a result.

mod convergence;
mod mixing;
mod moments;
mod monotonicity;
mod scaling;
mod simulate;

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::stats;
use crate::stochastic::derive_seed;

pub use convergence::{exp_convergence, ConvergenceRow, ConvergenceTable, MAX_FLAGGED_FRACTION};
pub use mixing::{
    exp_mixing, exp_ou_oracle, MixingReport, MixingRow, OuOracleConfig, OuOracleReport,
};
pub use moments::{exp_moment_bounds, MomentReport, MomentRow, GROWTH_SLACK};
pub use monotonicity::{
    exp_monotonicity, GMonotonicity, MonotonicityReport, MonotonicityRow, MARGIN_TOL, SKEW_TOL,
};
pub use scaling::{
    exp_aux_gap, exp_khasminskii_ladder, exp_time_holder, ScalingKind, ScalingReport, ScalingRow,
};
pub use simulate::{exp_simulate, SimulationReport};

/// Outcome of one named check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, ok: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    pub fn skip(name: &str, detail: String) -> Self {
        Check {
            name: name.to_string(),
            status: Status::Skip,
            detail,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.status, self.name, self.detail)
    }
}

/// Common interface of experiment results.
pub trait Report {
    /// CSV with a header line and a fixed column schema.
    fn csv(&self) -> String;
    fn checks(&self) -> Vec<Check>;
}

/// Mean of Monte Carlo samples with standard error and bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Samples behind the estimate (flagged paths excluded).
    pub n: usize,
}

impl Estimate {
    /// 95% percentile bootstrap with [`stats::BOOTSTRAP_RESAMPLES`] resamples.
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        let (lo, hi) = stats::bootstrap_ci(xs, stats::BOOTSTRAP_RESAMPLES, 0.95, seed);
        let mean = stats::mean(xs);
        Estimate {
            mean,
            stderr: stats::stderr(xs),
            // the percentile interval of a constant sample collapses to the mean
            ci_lo: lo.min(mean),
            ci_hi: hi.max(mean),
            n: xs.len(),
        }
    }

    /// Whole interval strictly below `other`'s.
    pub fn below(&self, other: &Estimate) -> bool {
        self.ci_hi < other.ci_lo
    }
}

/// Inputs shared by the path-based studies.
#[derive(Clone, Debug)]
pub struct Study {
    pub model: Model,
    pub x0: VelocityField,
    pub y0: VelocityField,
    pub horizon: f64,
    pub n_rep: usize,
    pub seed: u64,
    /// Worker threads; `0` selects the available parallelism.
    pub workers: usize,
}

/// Per-realization outcome: a value or a blow-up flag.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome<T> {
    Done(T),
    Flagged(String),
}

impl<T> Outcome<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Outcome::Done(v) => Some(v),
            Outcome::Flagged(_) => None,
        }
    }
}

/// Turns blow-ups into flags and propagates every other error.
pub(crate) fn flag<T>(r: Result<T>) -> Result<Outcome<T>> {
    match r {
        Ok(v) => Ok(Outcome::Done(v)),
        Err(e @ Error::BlowUp { .. }) => Ok(Outcome::Flagged(e.to_string())),
        Err(e) => Err(e),
    }
}

pub fn resolve_workers(workers: usize) -> usize {
    if workers == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        workers
    }
}

/// Ordered parallel map of `f` over `0..n` on a pool of `workers` threads.
pub fn par_map<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

/// Seed for the bootstrap of result cell `cell`.
pub(crate) fn cell_seed(seed: u64, cell: u64) -> u64 {
    derive_seed(seed, 0xC1_0000 + cell)
}

/// Formats a float for CSV: shortest round-trip digits, scientific
/// notation outside `[1e-4, 1e6)`.
pub(crate) fn fmt_f(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub(crate) fn csv_line(out: &mut String, cols: &[String]) {
    let _ = writeln!(out, "{}", cols.join(","));
}

/// Values `samples^p` of the unflagged realizations in `column`.
pub(crate) fn powered(values: &[Outcome<Vec<f64>>], column: usize, p: f64) -> (Vec<f64>, usize) {
    let mut out = Vec::new();
    let mut flagged = 0;
    for v in values {
        match v {
            Outcome::Done(row) if row[column].is_finite() => out.push(row[column].powf(p)),
            _ => flagged += 1,
        }
    }
    (out, flagged)
}

/// Strict decrease with separated bootstrap intervals along a ladder.
pub(crate) fn strictly_decreasing(est: &[Estimate]) -> bool {
    est.windows(2).all(|w| w[1].below(&w[0]))
}
