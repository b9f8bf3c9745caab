use super::{csv_line, flag, fmt_f, par_map, Check, Report, Study};
use crate::dynamics::CoupledState;
use crate::error::Result;
use crate::fields::snapshot::TrajectoryWriter;
use crate::stochastic::{Channel, NoiseStream};

/// Ensemble energies of plain coupled runs plus the recorded slow trajectory
/// of realization 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationReport {
    pub times: Vec<f64>,
    pub mean_x_sq: Vec<f64>,
    pub mean_y_sq: Vec<f64>,
    pub n_eff: usize,
    pub flagged: usize,
    /// Snapshot stream of realization 0 (empty if it was flagged).
    pub trajectory: Vec<u8>,
}

/// Runs `n_rep` coupled realizations, recording every `stride`-th slow state of the first.
pub fn exp_simulate(study: &Study, stride: usize) -> Result<SimulationReport> {
    let steps = study.model.steps_for(study.horizon);
    let runs = par_map(study.workers, study.n_rep, |r| {
        let mut stepper = study.model.stepper()?;
        let mut state = CoupledState::new(study.x0.clone(), study.y0.clone())?;
        let mut s1 = NoiseStream::new(study.seed, r, Channel::Q1);
        let mut s2 = NoiseStream::new(study.seed, r, Channel::Q2);
        let mut writer = (r == 0).then(|| TrajectoryWriter::new(Vec::new(), stride));
        let mut xs = vec![state.x.h_norm_sq()];
        let mut ys = vec![state.y.h_norm_sq()];
        if let Some(w) = writer.as_mut() {
            w.offer(state.t, &state.x)?;
        }
        let res = (|| -> Result<()> {
            for _ in 0..steps {
                stepper.step_coupled(&mut state, &mut s1, &mut s2)?;
                xs.push(state.x.h_norm_sq());
                ys.push(state.y.h_norm_sq());
                if let Some(w) = writer.as_mut() {
                    w.offer(state.t, &state.x)?;
                }
            }
            Ok(())
        })();
        let bytes = match writer {
            Some(w) => w.into_inner()?,
            None => Vec::new(),
        };
        Ok(flag(res)?.value().map(|_| (xs, ys, bytes)))
    })?;
    let done: Vec<_> = runs.iter().flatten().collect();
    let n = done.len();
    let mut mean_x_sq = vec![0.0; steps + 1];
    let mut mean_y_sq = vec![0.0; steps + 1];
    for (xs, ys, _) in &done {
        for i in 0..=steps {
            mean_x_sq[i] += xs[i] / n as f64;
            mean_y_sq[i] += ys[i] / n as f64;
        }
    }
    let dt = study.model.integrator.dt;
    Ok(SimulationReport {
        times: (0..=steps).map(|i| i as f64 * dt).collect(),
        mean_x_sq,
        mean_y_sq,
        n_eff: n,
        flagged: study.n_rep - n,
        trajectory: runs
            .first()
            .and_then(|r| r.as_ref())
            .map(|r| r.2.clone())
            .unwrap_or_default(),
    })
}

impl Report for SimulationReport {
    fn csv(&self) -> String {
        let mut out = String::from("t,mean_x_sq,mean_y_sq,n_eff\n");
        for i in 0..self.times.len() {
            csv_line(
                &mut out,
                &[
                    fmt_f(self.times[i]),
                    fmt_f(self.mean_x_sq[i]),
                    fmt_f(self.mean_y_sq[i]),
                    self.n_eff.to_string(),
                ],
            );
        }
        out
    }

    fn checks(&self) -> Vec<Check> {
        vec![Check::new(
            "no_flagged",
            self.flagged == 0,
            format!(
                "{} of {} realizations flagged",
                self.flagged,
                self.flagged + self.n_eff
            ),
        )]
    }
}
