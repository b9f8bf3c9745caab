//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 2 7`.

use std::sync::Arc;
use std::time::Instant;

use mscbf::averaging::{CachePolicy, DecayConfig, ErgodicConfig, FbarSource, StderrBudget};
use mscbf::cli;
use mscbf::config::{Experiment, RunConfig};
use mscbf::dynamics::{IntegratorConfig, Model};
use mscbf::experiments::{
    exp_convergence, exp_khasminskii_ladder, exp_mixing, exp_moment_bounds, exp_monotonicity,
    exp_ou_oracle, Check, OuOracleConfig, Report, Study,
};
use mscbf::fields::{
    monotonicity_constant, validate_assumptions, CouplingSpec, LinearCoupling, ModelParams,
    StokesBasis, TanhCoupling, VelocityField,
};
use mscbf::stochastic::CovarianceSpec;
use mscbf::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N_REP: usize = 200;
const HORIZON: f64 = 1.0;

type Verdict = (bool, String);
type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

fn basis() -> Arc<StokesBasis> {
    StokesBasis::new(4, 24).unwrap()
}

fn linear_spec() -> CouplingSpec {
    CouplingSpec::linear(LinearCoupling {
        f_x: 0.2,
        f_y: 1.0,
        g_x: 1.0,
        g_damp: 1.0,
        sigma1: 0.2,
        sigma2: 0.5,
    })
    .unwrap()
}

fn tanh_spec() -> CouplingSpec {
    CouplingSpec::tanh(TanhCoupling {
        f_x: 0.2,
        f_y: 1.0,
        g_x: 1.0,
        g_damp: 1.0,
        g_y: 0.2,
        s1_0: 0.2,
        s1_x: 0.0,
        s2_0: 0.5,
        s2_x: 0.1,
        s2_y: 0.3,
    })
    .unwrap()
}

/// Model with macro step `dt` and micro step `epsilon * 1e-2`.
fn model(b: &Arc<StokesBasis>, spec: CouplingSpec, mu: f64, beta: f64, eps: f64, dt: f64) -> Model {
    let cov = CovarianceSpec::default_for(b);
    let params = ModelParams {
        mu,
        beta,
        r: 3.0,
        epsilon: eps,
        delta: eps.powf(2.0 / 3.0),
        ..ModelParams::default()
    }
    .with_coupling(&spec, cov.max_eigenvalue(), cov.max_eigenvalue());
    Model {
        params,
        spec,
        cov1: cov.clone(),
        cov2: cov,
        integrator: IntegratorConfig::new(dt, eps * 1e-2),
    }
}

fn study(model: Model, x0: VelocityField, y0: VelocityField, seed: u64) -> Study {
    Study {
        model,
        x0,
        y0,
        horizon: HORIZON,
        n_rep: N_REP,
        seed,
        workers: 0,
    }
}

fn verdict(checks: &[Check]) -> Verdict {
    let ok = checks.iter().all(|c| c.passed());
    let detail = checks
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" | ");
    (ok, detail)
}

fn c1_operators() -> Result<Verdict> {
    let b = basis();
    let rep = exp_monotonicity(&b, 1.0, 1.0, &[3.0, 4.0, 5.0], 1000, (-1.0, 0.5), 11)?;
    let eta = monotonicity_constant(&ModelParams {
        mu: 1.0,
        beta: 1.0,
        r: 5.0,
        ..ModelParams::default()
    })?;
    let (ok, detail) = verdict(&rep.checks());
    let eta_ok = (eta - 0.125).abs() < 1e-15;
    Ok((ok && eta_ok, format!("eta(r=5) = {eta}; {detail}")))
}

fn c2_ou_oracle() -> Result<Verdict> {
    let b = basis();
    let m = model(&b, linear_spec(), 1.0, 0.0, 0.1, 1e-2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = VelocityField::random_regular(&b, &mut rng, 1.0);
    let ergodic = ErgodicConfig {
        n_rep: 40,
        horizon: 5.0,
        ..ErgodicConfig::for_params(&m.params)
    };
    let rep = exp_ou_oracle(&OuOracleConfig {
        params: m.params,
        spec: m.spec,
        cov2: m.cov2,
        x,
        ergodic,
        repetitions: 100,
        decay: DecayConfig::default(),
        gap: VelocityField::unit_mode(&b, [1, 0])?,
        seed: 22,
        workers: 0,
    })?;
    Ok(verdict(&rep.checks()))
}

fn c3_mixing() -> Result<Verdict> {
    let b = basis();
    let m = model(&b, tanh_spec(), 1.0, 0.0, 0.1, 1e-2);
    let v = validate_assumptions(&m.params, &m.spec);
    v.require_admissible()?;
    let dir = VelocityField::unit_mode(&b, [1, 0])?;
    let xs: Vec<VelocityField> = [0.0, 1.0, 3.0].iter().map(|a| dir.scaled(*a)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let y2 = VelocityField::random_regular(&b, &mut rng, 2.0);
    let rep = exp_mixing(
        &m.params,
        &m.spec,
        &m.cov2,
        &xs,
        (&VelocityField::zeros(&b), &y2),
        &DecayConfig::default(),
        &ErgodicConfig::for_params(&m.params),
        32,
        0,
    )?;
    let checks: Vec<Check> = rep
        .checks()
        .into_iter()
        .filter(|c| c.name == "rate_bound")
        .collect();
    let (ok, detail) = verdict(&checks);
    Ok((ok, format!("xi = {:.3}; {detail}", v.xi)))
}

fn c4_moments() -> Result<Verdict> {
    let b = basis();
    let m = model(&b, tanh_spec(), 1.0, 1.0, 0.1, 1e-2);
    validate_assumptions(&m.params, &m.spec).require_admissible()?;
    let zero = VelocityField::zeros(&b);
    let rep = exp_moment_bounds(
        &study(m, zero.clone(), zero, 42),
        &[1.0, 0.1, 0.01],
        &[1],
        &[1.0],
        3.0,
    )?;
    Ok(verdict(&rep.checks()))
}

fn ladder_study() -> Study {
    let b = basis();
    let m = model(&b, tanh_spec(), 12.0, 0.0, 0.1, 5e-3);
    study(m, VelocityField::zeros(&b), VelocityField::zeros(&b), 51)
}

fn c5_time_holder() -> Result<Verdict> {
    let (holder, _) = exp_khasminskii_ladder(&ladder_study(), &[0.2, 0.1, 0.05, 0.025])?;
    Ok(verdict(&holder.checks()))
}

fn c6_aux_gap() -> Result<Verdict> {
    let (_, gap) = exp_khasminskii_ladder(&ladder_study(), &[0.2, 0.1, 0.05, 0.025])?;
    let checks: Vec<Check> = gap
        .checks()
        .into_iter()
        .filter(|c| c.name != "ratio_bounded")
        .collect();
    Ok(verdict(&checks))
}

fn c7_averaging() -> Result<Verdict> {
    let b = basis();
    let x0 = VelocityField::unit_mode(&b, [1, 0])?;
    let y0 = VelocityField::zeros(&b);
    let eps = [1e-1, 1e-2, 1e-3];

    let lin = model(&b, linear_spec(), 1.0, 0.0, 0.1, 1e-2);
    let t_lin = exp_convergence(
        &study(lin, x0.clone(), y0.clone(), 71),
        &eps,
        &[1],
        &FbarSource::Oracle,
        10.0,
    )?;

    let th = model(&b, tanh_spec(), 1.0, 0.0, 0.1, 1e-2);
    let source = FbarSource::Estimated {
        ergodic: ErgodicConfig {
            n_rep: 8,
            horizon: 5.0,
            ..ErgodicConfig::for_params(&th.params)
        },
        cache: CachePolicy::Relative(0.05),
        budget: StderrBudget::default(),
        seed: 73,
    };
    let t_tanh = exp_convergence(&study(th, x0, y0, 72), &eps, &[1], &source, 10.0)?;

    let (ok_l, d_l) = verdict(&t_lin.checks());
    let (ok_t, d_t) = verdict(&t_tanh.checks());
    Ok((
        ok_l && ok_t,
        format!(
            "linear/oracle: {d_l} || tanh/estimated ({} estimates, max stderr {:.2e}): {d_t}",
            t_tanh.fbar_estimates, t_tanh.fbar_max_stderr
        ),
    ))
}

fn small_config(experiment: Experiment, workers: usize) -> RunConfig {
    let mut cfg = RunConfig::new(experiment);
    cfg.run.seed = 81;
    cfg.run.workers = workers;
    cfg.run.n_rep = 12;
    cfg.run.horizon = 0.2;
    cfg.integrator.dt = 1e-2;
    cfg.integrator.dt_fast_ratio = 1e-2;
    cfg.model.beta = 0.0;
    cfg.study.samples = 50;
    cfg.study.repetitions = 4;
    cfg.ergodic.n_rep = 8;
    cfg.ergodic.horizon = 5.0;
    cfg.decay.n_rep = 8;
    cfg.decay.resamples = 100;
    cfg.ladder.delta = vec![0.08, 0.04, 0.02];
    cfg.ladder.epsilon = vec![0.1, 0.05, 0.02];
    cfg
}

fn c8_determinism() -> Result<Verdict> {
    let mut notes = Vec::new();
    let mut ok = true;
    for e in Experiment::ALL {
        let mut cfg = small_config(e, 1);
        let a = cli::run(&cfg)?;
        let b = cli::run(&cfg)?;
        cfg.run.workers = 4;
        let c = cli::run(&cfg)?;
        let csv = |o: &cli::RunOutput| o.file("results.csv").unwrap().to_vec();
        let same = csv(&a) == csv(&b) && csv(&a) == csv(&c);
        ok &= same;
        notes.push(format!(
            "{}: {}",
            e.name(),
            if same { "identical" } else { "DIFFERS" }
        ));
    }
    Ok((ok, notes.join(", ")))
}

fn main() {
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 8] = [
        (1, "operator identities", c1_operators),
        (2, "Ornstein-Uhlenbeck oracle suite", c2_ou_oracle),
        (3, "mixing rate bound", c3_mixing),
        (4, "moment uniformity in epsilon", c4_moments),
        (5, "time-increment scaling", c5_time_holder),
        (6, "auxiliary gap decrease", c6_aux_gap),
        (7, "averaging principle", c7_averaging),
        (8, "determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} criterion {n} ({name}) [{secs:.1} s]: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
