use std::sync::Arc;

use mscbf::averaging::FbarSource;
use mscbf::dynamics::{IntegratorConfig, Model};
use mscbf::experiments::{
    exp_convergence, exp_khasminskii_ladder, exp_monotonicity, exp_simulate, Check, Estimate,
    GMonotonicity, Report, Status, Study,
};
use mscbf::fields::{CouplingSpec, LinearCoupling, ModelParams, StokesBasis, VelocityField};
use mscbf::stochastic::CovarianceSpec;
use proptest::prelude::*;

fn basis() -> Arc<StokesBasis> {
    StokesBasis::new(4, 24).unwrap()
}

fn study(spec: CouplingSpec, x0: VelocityField, n_rep: usize, seed: u64) -> Study {
    let b = x0.basis().clone();
    let cov = CovarianceSpec::default_for(&b);
    let params = ModelParams {
        epsilon: 0.1,
        ..ModelParams::default()
    }
    .with_coupling(&spec, cov.max_eigenvalue(), cov.max_eigenvalue());
    Study {
        model: Model {
            params,
            spec,
            cov1: cov.clone(),
            cov2: cov,
            integrator: IntegratorConfig::new(1e-2, 1e-3),
        },
        y0: VelocityField::zeros(&b),
        x0,
        horizon: 0.2,
        n_rep,
        seed,
        workers: 2,
    }
}

fn linear(f_y: f64) -> CouplingSpec {
    CouplingSpec::linear(LinearCoupling {
        f_x: 0.2,
        f_y,
        g_x: 1.0,
        g_damp: 1.0,
        sigma1: 0.2,
        sigma2: 0.5,
    })
    .unwrap()
}

proptest! {
    #[test]
    fn bootstrap_estimate_brackets_mean(xs in proptest::collection::vec(-10.0f64..10.0, 1..60), seed in any::<u64>()) {
        let e = Estimate::from_samples(&xs, seed);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        prop_assert!((e.mean - mean).abs() <= 1e-12);
        prop_assert!(e.ci_lo <= e.mean && e.mean <= e.ci_hi);
        prop_assert!(e.ci_lo >= xs.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-12);
        prop_assert!(e.ci_hi <= xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-12);
        prop_assert_eq!(e.n, xs.len());
        if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((e.stderr - (var / n).sqrt()).abs() <= 1e-12 * (1.0 + e.stderr));
        }
        prop_assert_eq!(Estimate::from_samples(&xs, seed), e);
    }
}

#[test]
fn constant_sample_has_degenerate_interval() {
    let e = Estimate::from_samples(&[2.5; 10], 1);
    assert_eq!((e.ci_lo, e.mean, e.ci_hi, e.stderr), (2.5, 2.5, 2.5, 0.0));
    let lower = Estimate::from_samples(&[1.0, 1.1, 0.9, 1.0], 2);
    assert!(lower.below(&e));
    assert!(!e.below(&lower));
}

#[test]
fn check_lines() {
    let ok = Check::new("a", true, "x = 1".into());
    let bad = Check::new("b", false, "x = 2".into());
    let skip = Check::skip("c", "nothing to test".into());
    assert_eq!(ok.to_string(), "PASS a: x = 1");
    assert_eq!(bad.to_string(), "FAIL b: x = 2");
    assert_eq!(skip.status, Status::Skip);
    assert!(ok.passed() && skip.passed() && !bad.passed());
}

#[test]
fn g_monotonicity_regimes() {
    let p = |beta: f64, r: f64| ModelParams {
        mu: 1.0,
        beta,
        r,
        ..ModelParams::default()
    };
    assert_eq!(
        GMonotonicity::for_params(&p(1.0, 5.0)),
        GMonotonicity::Shifted { eta: 0.125 }
    );
    assert_eq!(
        GMonotonicity::for_params(&p(0.5, 3.0)),
        GMonotonicity::Global
    );
    assert_eq!(
        GMonotonicity::for_params(&p(0.4, 3.0)),
        GMonotonicity::NotApplicable
    );
    assert_eq!(
        GMonotonicity::for_params(&p(0.0, 4.0)),
        GMonotonicity::NotApplicable
    );
}

#[test]
fn monotonicity_report_is_seeded() {
    let b = basis();
    let a = exp_monotonicity(&b, 1.0, 1.0, &[3.0, 5.0], 30, (-1.0, 0.5), 4).unwrap();
    let c = exp_monotonicity(&b, 1.0, 1.0, &[3.0, 5.0], 30, (-1.0, 0.5), 4).unwrap();
    assert_eq!(a.csv(), c.csv());
    assert!(a
        .csv()
        .starts_with("r,n_samples,skew_worst,damping_margin,g_kind,eta,g_margin,equal_pair_max\n"));
    assert_eq!(a.csv().lines().count(), 3);
    assert!(a.checks().iter().all(Check::passed));
}

#[test]
fn y_independent_drift_gives_zero_gap() {
    let b = basis();
    let s = study(
        linear(0.0),
        VelocityField::unit_mode(&b, [1, 0]).unwrap(),
        6,
        3,
    );
    let t = exp_convergence(&s, &[0.01, 0.1, 0.05], &[1, 2], &FbarSource::Exact, 10.0).unwrap();
    let eps: Vec<f64> = t.rows.iter().map(|r| r.epsilon).collect();
    assert_eq!(eps, vec![0.1, 0.1, 0.05, 0.05, 0.01, 0.01]);
    assert!(t.rows.iter().all(|r| r.estimate.mean == 0.0 && r.usable));
    let checks = t.checks();
    assert!(checks
        .iter()
        .any(|c| c.name == "decreasing_p1" && c.status == Status::Skip));
    assert!(t.csv().starts_with(
        "epsilon,delta,p,n_rep,n_eff,flagged,usable,estimate,stderr,ci_lo,ci_hi,energy_exceed\n"
    ));
    assert!(exp_convergence(&s, &[0.1, 0.01], &[1], &FbarSource::Exact, 10.0).is_err());
    assert!(exp_convergence(&s, &[0.1, 0.05, 0.01], &[1], &FbarSource::Oracle, 10.0).is_ok());
}

#[test]
fn block_ladder_rows_and_limits() {
    let b = basis();
    let s = study(linear(1.0), VelocityField::zeros(&b), 8, 5);
    let (holder, gap) = exp_khasminskii_ladder(&s, &[0.02, 0.1, 0.05]).unwrap();
    let deltas: Vec<f64> = holder.rows.iter().map(|r| r.control).collect();
    assert_eq!(deltas, vec![0.1, 0.05, 0.02]);
    for r in holder.rows.iter().chain(&gap.rows) {
        assert!((r.ratio - r.estimate.mean / r.control.sqrt()).abs() <= 1e-15 * (1.0 + r.ratio));
        assert!(r.estimate.mean > 0.0);
    }
    assert!(holder.fit.is_some());
    assert!(exp_khasminskii_ladder(&s, &[0.1, 0.05]).is_err());
    assert!(exp_khasminskii_ladder(&s, &[0.1, 0.05, 0.001]).is_err());

    // Block length equal to the macro step: the anchor is the current state.
    let (holder, gap) = exp_khasminskii_ladder(&s, &[0.01, 0.02, 0.04]).unwrap();
    let finest = holder.rows.last().unwrap();
    assert_eq!(finest.control, 0.01);
    assert!(finest.estimate.mean < holder.rows[0].estimate.mean);
    assert!(gap.rows.last().unwrap().estimate.mean <= gap.rows[0].estimate.mean);
}

#[test]
fn simulation_without_forcing_stays_at_rest() {
    let b = basis();
    let s = study(CouplingSpec::zero(), VelocityField::zeros(&b), 3, 9);
    let r = exp_simulate(&s, 5).unwrap();
    assert_eq!(r.times.len(), 21);
    assert!(r.mean_x_sq.iter().chain(&r.mean_y_sq).all(|v| *v == 0.0));
    assert_eq!((r.n_eff, r.flagged), (3, 0));
    let record = 8 + 12 + 16 * b.len();
    assert_eq!(r.trajectory.len(), 5 * record);
    assert!(r.checks().iter().all(Check::passed));
}
