//! `mscbf <config> [--out DIR] [--seed N] [--workers N]`
//!
//! Runs one experiment and writes `results.csv`, `manifest.txt` and
//! `summary.txt` (plus `fbar_log.csv` or `trajectory.bin` where relevant)
//! into the output directory. Everything is computed before the first file
//! is written, so a failed run leaves no partial outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::config::{Experiment, FbarKind, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    exp_aux_gap, exp_convergence, exp_mixing, exp_moment_bounds, exp_monotonicity, exp_ou_oracle,
    exp_simulate, exp_time_holder, Check, OuOracleConfig, Report, Status, Study,
};
use crate::fields::VelocityField;
use crate::stochastic::Channel;

#[derive(Debug, Parser)]
#[command(
    name = "mscbf",
    version,
    about = "Slow-fast stochastic convective Brinkman-Forchheimer experiments"
)]
pub struct Args {
    /// Run configuration (`key = value` lines).
    pub config: PathBuf,
    /// Output directory (overrides `run.out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `run.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (overrides `run.workers`; 0 = available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

/// In-memory products of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

fn study(cfg: &RunConfig) -> Result<Study> {
    let r = cfg.resolve()?;
    Ok(Study {
        model: r.model,
        x0: r.x0,
        y0: r.y0,
        horizon: cfg.run.horizon,
        n_rep: cfg.run.n_rep,
        seed: cfg.run.seed,
        workers: cfg.run.workers,
    })
}

fn channels(cfg: &RunConfig) -> (usize, Vec<&'static str>) {
    let paths = |extra: bool| {
        let mut c = vec![Channel::Q1.name(), Channel::Q2.name()];
        if extra {
            c.push(Channel::Q2Bar.name());
        }
        c
    };
    match cfg.experiment {
        Experiment::Monotonicity => (cfg.ladder.r.len(), vec!["sampler"]),
        Experiment::OuOracle => (cfg.study.repetitions, vec![Channel::Q2Bar.name()]),
        Experiment::Mixing => (cfg.ladder.x_amplitudes.len(), vec![Channel::Q2Bar.name()]),
        Experiment::Convergence => (cfg.run.n_rep, paths(cfg.fbar.source == FbarKind::Estimated)),
        _ => (cfg.run.n_rep, paths(false)),
    }
}

/// Configuration dump followed by one seed line per realization.
pub fn manifest(cfg: &RunConfig) -> String {
    let mut out = cfg.to_text();
    let (n, ch) = channels(cfg);
    let _ = writeln!(out, "seed.master = {}", cfg.run.seed);
    let _ = writeln!(out, "seed.realizations = {n}");
    for id in 0..n {
        let _ = writeln!(
            out,
            "seed.realization.{id} = channels={} master_seed={}",
            ch.join("+"),
            cfg.run.seed
        );
    }
    out
}

fn summary(cfg: &RunConfig, checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        let _ = writeln!(
            out,
            "{} {}.{}: {}",
            c.status,
            cfg.experiment.name(),
            c.name,
            c.detail
        );
    }
    out
}

/// Runs the configured experiment without touching the file system.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let report: Box<dyn Report> = match cfg.experiment {
        Experiment::Monotonicity => {
            let r = cfg.resolve()?;
            Box::new(exp_monotonicity(
                &r.basis,
                cfg.model.mu,
                cfg.model.beta,
                &cfg.ladder.r,
                cfg.study.samples,
                (cfg.study.log_scale_min, cfg.study.log_scale_max),
                cfg.run.seed,
            )?)
        }
        Experiment::OuOracle => {
            let r = cfg.resolve()?;
            Box::new(exp_ou_oracle(&OuOracleConfig {
                params: r.model.params,
                spec: r.model.spec,
                cov2: r.model.cov2,
                x: r.x0,
                ergodic: r.ergodic,
                repetitions: cfg.study.repetitions,
                decay: r.decay,
                gap: VelocityField::unit_mode(&r.basis, [1, 0])?,
                seed: cfg.run.seed,
                workers: cfg.run.workers,
            })?)
        }
        Experiment::Mixing => {
            let r = cfg.resolve()?;
            let dir = if r.x0.h_norm() > 0.0 {
                r.x0.scaled(1.0 / r.x0.h_norm())
            } else {
                VelocityField::unit_mode(&r.basis, [1, 0])?
            };
            let xs: Vec<VelocityField> = cfg
                .ladder
                .x_amplitudes
                .iter()
                .map(|a| dir.scaled(*a))
                .collect();
            let y2 = if r.y0.h_norm() > 0.0 {
                r.y0.clone()
            } else {
                VelocityField::unit_mode(&r.basis, [1, 0])?
            };
            Box::new(exp_mixing(
                &r.model.params,
                &r.model.spec,
                &r.model.cov2,
                &xs,
                (&VelocityField::zeros(&r.basis), &y2),
                &r.decay,
                &r.ergodic,
                cfg.run.seed,
                cfg.run.workers,
            )?)
        }
        Experiment::MomentBounds => Box::new(exp_moment_bounds(
            &study(cfg)?,
            &cfg.ladder.epsilon,
            &cfg.ladder.p,
            &cfg.ladder.scales,
            cfg.study.moment_factor,
        )?),
        Experiment::TimeHolder => Box::new(exp_time_holder(&study(cfg)?, &cfg.ladder.delta)?),
        Experiment::AuxGap => Box::new(exp_aux_gap(&study(cfg)?, &cfg.ladder.delta)?),
        Experiment::Convergence => {
            let t = exp_convergence(
                &study(cfg)?,
                &cfg.ladder.epsilon,
                &cfg.ladder.p,
                &cfg.fbar_source(cfg.run.seed)?,
                cfg.study.energy_threshold,
            )?;
            if cfg.fbar.source == FbarKind::Estimated {
                files.push(("fbar_log.csv".into(), t.fbar_log_csv().into_bytes()));
            }
            Box::new(t)
        }
        Experiment::Simulate => {
            let s = exp_simulate(&study(cfg)?, cfg.study.trajectory_stride)?;
            files.push(("trajectory.bin".into(), s.trajectory.clone()));
            Box::new(s)
        }
    };
    let checks = report.checks();
    files.insert(0, ("results.csv".into(), report.csv().into_bytes()));
    files.insert(1, ("manifest.txt".into(), manifest(cfg).into_bytes()));
    files.insert(
        2,
        ("summary.txt".into(), summary(cfg, &checks).into_bytes()),
    );
    Ok(RunOutput { files, checks })
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

/// Parses the configuration, applies command-line overrides and validates again.
pub fn load(args: &Args) -> Result<RunConfig> {
    let mut cfg = RunConfig::parse_file(&args.config)?;
    if let Some(o) = &args.out {
        cfg.run.out = o.to_string_lossy().into_owned();
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.run.workers = w;
    }
    let errs = cfg.check();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}

/// Full command: returns the process exit code.
pub fn main_with(args: &Args) -> i32 {
    let result = load(args).and_then(|cfg| {
        let out = run(&cfg)?;
        write_outputs(&out, Path::new(&cfg.run.out))?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            for c in &out.checks {
                if c.status == Status::Fail {
                    eprintln!("{c}");
                } else {
                    println!("{c}");
                }
            }
            i32::from(out.failed())
        }
        Err(Error::Config(errs)) => {
            eprintln!("invalid configuration:");
            for e in errs {
                eprintln!("  {e}");
            }
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
