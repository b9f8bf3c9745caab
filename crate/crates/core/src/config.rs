//! Plain-text `key = value` run configuration with dotted section keys.
//!
//! ```text
//! experiment = monotonicity
//! run.seed = 7
//! model.mu = 1
//! ladder.r = 3, 4, 5
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default except `experiment`. [`RunConfig::to_text`] emits every key, and
//! parsing that text reproduces the configuration exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::averaging::{CachePolicy, DecayConfig, ErgodicConfig, FbarSource, StderrBudget};
use crate::dynamics::{IntegratorConfig, Model, Scheme};
use crate::error::{Error, Result};
use crate::fields::{
    damping_order, validate_assumptions, ConstantSigmaCoupling, CouplingSpec, LinearCoupling,
    ModelParams, StokesBasis, TanhCoupling, VelocityField,
};
use crate::stochastic::CovarianceSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Monotonicity,
    OuOracle,
    Mixing,
    MomentBounds,
    TimeHolder,
    AuxGap,
    Convergence,
    Simulate,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Monotonicity,
        Experiment::OuOracle,
        Experiment::Mixing,
        Experiment::MomentBounds,
        Experiment::TimeHolder,
        Experiment::AuxGap,
        Experiment::Convergence,
        Experiment::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Monotonicity => "monotonicity",
            Experiment::OuOracle => "ou_oracle",
            Experiment::Mixing => "mixing",
            Experiment::MomentBounds => "moment_bounds",
            Experiment::TimeHolder => "time_holder",
            Experiment::AuxGap => "aux_gap",
            Experiment::Convergence => "convergence",
            Experiment::Simulate => "simulate",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!(
                    "unknown experiment '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Linear,
    Tanh,
    ConstantSigma,
    Zero,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Tanh => "tanh",
            Family::ConstantSigma => "constant_sigma",
            Family::Zero => "zero",
        }
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Family::Linear,
            Family::Tanh,
            Family::ConstantSigma,
            Family::Zero,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| format!("unknown coupling family '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbarKind {
    Exact,
    Oracle,
    Estimated,
}

impl FromStr for FbarKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(FbarKind::Exact),
            "oracle" => Ok(FbarKind::Oracle),
            "estimated" => Ok(FbarKind::Estimated),
            _ => Err(format!(
                "unknown averaged-drift source '{s}' (exact, oracle, estimated)"
            )),
        }
    }
}

impl FbarKind {
    fn name(self) -> &'static str {
        match self {
            FbarKind::Exact => "exact",
            FbarKind::Oracle => "oracle",
            FbarKind::Estimated => "estimated",
        }
    }
}

/// Initial field: `zero`, `mode:k1,k2` (unit cosine mode) or `random:SEED`
/// (regular Gaussian field), multiplied by an amplitude.
#[derive(Clone, Debug, PartialEq)]
pub enum InitKind {
    Zero,
    Mode([i32; 2]),
    Random(u64),
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "zero" {
            return Ok(InitKind::Zero);
        }
        if let Some(rest) = s.strip_prefix("mode:") {
            let k: Vec<i32> = rest
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<i32>()
                        .map_err(|e| format!("mode '{rest}': {e}"))
                })
                .collect::<std::result::Result<_, _>>()?;
            if k.len() == 2 {
                return Ok(InitKind::Mode([k[0], k[1]]));
            }
            return Err(format!("mode '{rest}' needs two components"));
        }
        if let Some(rest) = s.strip_prefix("random:") {
            return rest
                .trim()
                .parse()
                .map(InitKind::Random)
                .map_err(|e| format!("random seed '{rest}': {e}"));
        }
        Err(format!(
            "initial field '{s}' (expected zero, mode:k1,k2 or random:SEED)"
        ))
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitKind::Zero => f.write_str("zero"),
            InitKind::Mode(k) => write!(f, "mode:{},{}", k[0], k[1]),
            InitKind::Random(s) => write!(f, "random:{s}"),
        }
    }
}

impl InitKind {
    pub fn build(&self, basis: &Arc<StokesBasis>, amplitude: f64) -> Result<VelocityField> {
        use rand::SeedableRng;
        let f = match self {
            InitKind::Zero => VelocityField::zeros(basis),
            InitKind::Mode(k) => VelocityField::unit_mode(basis, *k)?,
            InitKind::Random(s) => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*s);
                VelocityField::random_regular(basis, &mut rng, 1.0)
            }
        };
        Ok(f.scaled(amplitude))
    }
}

/// Values that can appear on the right of `=`.
trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|_| format!("'{s}' is not a number"))
    }
    fn render(&self) -> String {
        format!("{self}")
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|_| format!("'{s}' is not a nonnegative integer"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
int_value!(u32, u64, usize);

impl ConfigValue for bool {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|_| format!("'{s}' is not true/false"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for String {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Ok(s.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for Option<f64> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            Ok(None)
        } else {
            f64::parse_value(s).map(Some)
        }
    }
    fn render(&self) -> String {
        self.map_or("auto".into(), |v| v.render())
    }
}

impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|p| T::parse_value(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter()
            .map(|v| v.render())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

macro_rules! enum_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse()
            }
            fn render(&self) -> String {
                self.name().to_string()
            }
        }
    )*};
}
enum_value!(Family, FbarKind);

impl ConfigValue for InitKind {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse()
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Scheme {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Scheme::parse(s).ok_or_else(|| {
            format!("unknown scheme '{s}' (exponential_tamed, semi_implicit_linear)")
        })
    }
    fn render(&self) -> String {
        self.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    /// `0` selects the available parallelism.
    pub workers: usize,
    pub out: String,
    pub horizon: f64,
    pub n_rep: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSection {
    pub k_max: usize,
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub mu: f64,
    pub beta: f64,
    pub r: f64,
    pub epsilon: f64,
    /// `None` selects `epsilon^(2/3)`.
    pub delta: Option<f64>,
    pub zeta_growth: f64,
    /// Overrides of the certified constants; `None` uses the certified value.
    pub l_g: Option<f64>,
    pub l_sigma2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSection {
    pub family: Family,
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_damp: f64,
    pub g_y: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub s1_0: f64,
    pub s1_x: f64,
    pub s2_0: f64,
    pub s2_x: f64,
    pub s2_y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSection {
    pub q1_scale: f64,
    pub q1_exponent: f64,
    pub q2_scale: f64,
    pub q2_exponent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorSection {
    pub dt: f64,
    /// `dt_fast = dt_fast_ratio * epsilon`.
    pub dt_fast_ratio: f64,
    pub scheme: Scheme,
    pub taming: f64,
    pub blowup: f64,
    pub convection: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicSection {
    /// `None` selects five mixing times.
    pub burn_in: Option<f64>,
    pub horizon: f64,
    pub n_rep: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FbarSection {
    pub source: FbarKind,
    /// Relative cache tolerance.
    pub cache: f64,
    pub budget_fraction: f64,
    pub budget_floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitSection {
    pub x: InitKind,
    pub x_amplitude: f64,
    pub y: InitKind,
    pub y_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderSection {
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    pub p: Vec<u32>,
    pub r: Vec<f64>,
    /// Initial-data multipliers of the moment study.
    pub scales: Vec<f64>,
    /// Amplitudes of the slow states probed by the mixing study.
    pub x_amplitudes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudySection {
    pub samples: usize,
    pub log_scale_min: f64,
    pub log_scale_max: f64,
    pub moment_factor: f64,
    pub repetitions: usize,
    pub energy_threshold: f64,
    pub trajectory_stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecaySection {
    pub horizon: f64,
    pub n_rep: usize,
    pub dt: f64,
    pub samples: usize,
    pub resamples: usize,
}

/// Everything one `mscbf` run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub run: RunSection,
    pub basis: BasisSection,
    pub model: ModelSection,
    pub coupling: CouplingSection,
    pub noise: NoiseSection,
    pub integrator: IntegratorSection,
    pub ergodic: ErgodicSection,
    pub fbar: FbarSection,
    pub init: InitSection,
    pub ladder: LadderSection,
    pub study: StudySection,
    pub decay: DecaySection,
}

impl RunConfig {
    /// Defaults for `experiment`; `ou_oracle` starts from the linear family
    /// with `beta = 0`, which its closed forms require.
    pub fn new(experiment: Experiment) -> Self {
        let d = DecayConfig::default();
        let mut cfg = RunConfig {
            experiment,
            run: RunSection {
                seed: 0,
                workers: 0,
                out: "out".into(),
                horizon: 1.0,
                n_rep: 200,
            },
            basis: BasisSection { k_max: 4, grid: 24 },
            model: ModelSection {
                mu: 1.0,
                beta: 1.0,
                r: 3.0,
                epsilon: 0.1,
                delta: None,
                zeta_growth: 0.5,
                l_g: None,
                l_sigma2: None,
            },
            coupling: CouplingSection {
                family: Family::Tanh,
                f_x: 0.2,
                f_y: 1.0,
                g_x: 1.0,
                g_damp: 1.0,
                g_y: 0.2,
                sigma1: 0.2,
                sigma2: 0.5,
                s1_0: 0.2,
                s1_x: 0.0,
                s2_0: 0.5,
                s2_x: 0.1,
                s2_y: 0.3,
            },
            noise: NoiseSection {
                q1_scale: 1.0,
                q1_exponent: 2.0,
                q2_scale: 1.0,
                q2_exponent: 2.0,
            },
            integrator: IntegratorSection {
                dt: 1e-3,
                dt_fast_ratio: 1e-3,
                scheme: Scheme::ExponentialTamed,
                taming: 1.0,
                blowup: crate::dynamics::DEFAULT_BLOWUP,
                convection: true,
            },
            ergodic: ErgodicSection {
                burn_in: None,
                horizon: 10.0,
                n_rep: 16,
                dt: 0.01,
            },
            fbar: FbarSection {
                source: FbarKind::Estimated,
                cache: 1e-2,
                budget_fraction: 0.5,
                budget_floor: 1e-2,
            },
            init: InitSection {
                x: InitKind::Mode([1, 0]),
                x_amplitude: 1.0,
                y: InitKind::Zero,
                y_amplitude: 1.0,
            },
            ladder: LadderSection {
                epsilon: vec![1e-1, 1e-2, 1e-3],
                delta: vec![0.2, 0.1, 0.05, 0.025],
                p: vec![1, 2],
                r: vec![3.0, 4.0, 5.0],
                scales: vec![1.0, 2.0],
                x_amplitudes: vec![0.0, 1.0, 2.0],
            },
            study: StudySection {
                samples: 1000,
                log_scale_min: -1.0,
                log_scale_max: 0.5,
                moment_factor: 3.0,
                repetitions: 100,
                energy_threshold: 10.0,
                trajectory_stride: 10,
            },
            decay: DecaySection {
                horizon: d.horizon,
                n_rep: d.n_rep,
                dt: d.dt,
                samples: d.samples,
                resamples: d.resamples,
            },
        };
        if experiment == Experiment::OuOracle {
            cfg.coupling.family = Family::Linear;
            cfg.model.beta = 0.0;
        }
        cfg
    }
}

macro_rules! keys {
    ($($sec:ident . $field:ident),* $(,)?) => {
        /// Every accepted key except `experiment`, in serialization order.
        pub const KEYS: &[&str] = &[$(concat!(stringify!($sec), ".", stringify!($field))),*];

        impl RunConfig {
            fn set_key(&mut self, key: &str, value: &str) -> Option<std::result::Result<(), String>> {
                $(
                    if key == concat!(stringify!($sec), ".", stringify!($field)) {
                        return Some(ConfigValue::parse_value(value).map(|v| self.$sec.$field = v));
                    }
                )*
                None
            }

            fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((concat!(stringify!($sec), ".", stringify!($field)), self.$sec.$field.render())),*]
            }
        }
    };
}

keys!(
    run.seed,
    run.workers,
    run.out,
    run.horizon,
    run.n_rep,
    basis.k_max,
    basis.grid,
    model.mu,
    model.beta,
    model.r,
    model.epsilon,
    model.delta,
    model.zeta_growth,
    model.l_g,
    model.l_sigma2,
    coupling.family,
    coupling.f_x,
    coupling.f_y,
    coupling.g_x,
    coupling.g_damp,
    coupling.g_y,
    coupling.sigma1,
    coupling.sigma2,
    coupling.s1_0,
    coupling.s1_x,
    coupling.s2_0,
    coupling.s2_x,
    coupling.s2_y,
    noise.q1_scale,
    noise.q1_exponent,
    noise.q2_scale,
    noise.q2_exponent,
    integrator.dt,
    integrator.dt_fast_ratio,
    integrator.scheme,
    integrator.taming,
    integrator.blowup,
    integrator.convection,
    ergodic.burn_in,
    ergodic.horizon,
    ergodic.n_rep,
    ergodic.dt,
    fbar.source,
    fbar.cache,
    fbar.budget_fraction,
    fbar.budget_floor,
    init.x,
    init.x_amplitude,
    init.y,
    init.y_amplitude,
    ladder.epsilon,
    ladder.delta,
    ladder.p,
    ladder.r,
    ladder.scales,
    ladder.x_amplitudes,
    study.samples,
    study.log_scale_min,
    study.log_scale_max,
    study.moment_factor,
    study.repetitions,
    study.energy_threshold,
    study.trajectory_stride,
    decay.horizon,
    decay.n_rep,
    decay.dt,
    decay.samples,
    decay.resamples,
);

/// Model, noise and discretization assembled from a configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub basis: Arc<StokesBasis>,
    pub model: Model,
    pub x0: VelocityField,
    pub y0: VelocityField,
    pub ergodic: ErgodicConfig,
    pub decay: DecayConfig,
}

impl RunConfig {
    /// Serializes every key, `experiment` first.
    pub fn to_text(&self) -> String {
        let mut out = format!("experiment = {}\n", self.experiment.name());
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Parses and validates; on failure returns every problem found.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut errors = Vec::new();
        let mut experiment = None;
        let mut pairs = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    n + 1
                ));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                errors.push(format!("line {}: duplicate key '{k}'", n + 1));
                continue;
            }
            if k == "experiment" {
                match v.parse::<Experiment>() {
                    Ok(e) => experiment = Some(e),
                    Err(e) => errors.push(format!("line {}: {e}", n + 1)),
                }
            } else {
                pairs.push((n + 1, k.to_string(), v.to_string()));
            }
        }
        if experiment.is_none() && !seen.contains("experiment") {
            errors.push("missing required key 'experiment'".into());
        }
        let mut cfg = RunConfig::new(experiment.unwrap_or(Experiment::Monotonicity));
        for (n, k, v) in pairs {
            match cfg.set_key(&k, &v) {
                None => errors.push(format!("line {n}: unknown key '{k}'")),
                Some(Err(e)) => errors.push(format!("line {n}: {k}: {e}")),
                Some(Ok(())) => {}
            }
        }
        if errors.is_empty() {
            errors.extend(cfg.check());
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Semantic validation; returns every violation.
    pub fn check(&self) -> Vec<String> {
        match self.resolve() {
            Ok(_) => Vec::new(),
            Err(Error::Config(e)) => e,
            Err(e) => vec![e.to_string()],
        }
    }

    fn params(
        &self,
        spec: &CouplingSpec,
        cov1: &CovarianceSpec,
        cov2: &CovarianceSpec,
    ) -> ModelParams {
        let m = &self.model;
        let mut p = ModelParams {
            mu: m.mu,
            beta: m.beta,
            r: m.r,
            epsilon: m.epsilon,
            delta: m.delta.unwrap_or(m.epsilon.powf(2.0 / 3.0)),
            zeta_growth: m.zeta_growth,
            ..ModelParams::default()
        }
        .with_coupling(spec, cov1.max_eigenvalue(), cov2.max_eigenvalue());
        if let Some(l) = m.l_g {
            p.l_g = l;
        }
        if let Some(l) = m.l_sigma2 {
            p.l_sigma2 = l;
        }
        p
    }

    pub fn coupling_spec(&self) -> Result<CouplingSpec> {
        let c = &self.coupling;
        match c.family {
            Family::Zero => Ok(CouplingSpec::zero()),
            Family::Linear => CouplingSpec::linear(LinearCoupling {
                f_x: c.f_x,
                f_y: c.f_y,
                g_x: c.g_x,
                g_damp: c.g_damp,
                sigma1: c.sigma1,
                sigma2: c.sigma2,
            }),
            Family::Tanh => CouplingSpec::tanh(TanhCoupling {
                f_x: c.f_x,
                f_y: c.f_y,
                g_x: c.g_x,
                g_damp: c.g_damp,
                g_y: c.g_y,
                s1_0: c.s1_0,
                s1_x: c.s1_x,
                s2_0: c.s2_0,
                s2_x: c.s2_x,
                s2_y: c.s2_y,
            }),
            Family::ConstantSigma => CouplingSpec::constant_sigma(ConstantSigmaCoupling {
                f_x: c.f_x,
                f_y: c.f_y,
                g_x: c.g_x,
                g_damp: c.g_damp,
                g_y: c.g_y,
                sigma1: c.sigma1,
                sigma2: c.sigma2,
            }),
        }
    }

    /// Builds the model and initial data, collecting every problem.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut errs = Vec::new();
        let order = if self.model.beta > 0.0 {
            damping_order(self.model.r)
        } else {
            2
        };
        let order = if self.experiment == Experiment::Monotonicity {
            self.ladder
                .r
                .iter()
                .map(|r| damping_order(*r))
                .max()
                .unwrap_or(2)
                .max(order)
        } else {
            order
        };
        let basis = match StokesBasis::with_order(self.basis.k_max, self.basis.grid, order) {
            Ok(b) => Some(b),
            Err(e) => {
                errs.push(format!("basis: {e}"));
                None
            }
        };
        let spec = self
            .coupling_spec()
            .map_err(|e| errs.push(format!("coupling: {e}")))
            .ok();
        if self.run.n_rep == 0 {
            errs.push("run.n_rep must be at least 1".into());
        }
        if !(self.run.horizon > 0.0 && self.run.horizon.is_finite()) {
            errs.push(format!(
                "run.horizon = {} must be positive",
                self.run.horizon
            ));
        }
        if self.run.out.is_empty() {
            errs.push("run.out must not be empty".into());
        }
        let integrator = IntegratorConfig {
            dt: self.integrator.dt,
            dt_fast: self.integrator.dt_fast_ratio * self.model.epsilon,
            scheme: self.integrator.scheme,
            taming: self.integrator.taming,
            blowup: self.integrator.blowup,
            convection: self.integrator.convection,
        };
        errs.extend(
            integrator
                .check()
                .into_iter()
                .map(|e| format!("integrator: {e}")),
        );
        self.check_ladders(&mut errs);
        let (Some(basis), Some(spec)) = (basis, spec) else {
            return Err(Error::Config(errs));
        };
        let cov = |scale, exp, name: &str, errs: &mut Vec<String>| {
            CovarianceSpec::power_law(&basis, scale, exp)
                .map_err(|e| errs.push(format!("noise.{name}: {e}")))
                .ok()
        };
        let cov1 = cov(self.noise.q1_scale, self.noise.q1_exponent, "q1", &mut errs);
        let cov2 = cov(self.noise.q2_scale, self.noise.q2_exponent, "q2", &mut errs);
        let (Some(cov1), Some(cov2)) = (cov1, cov2) else {
            return Err(Error::Config(errs));
        };
        let params = self.params(&spec, &cov1, &cov2);
        if self.experiment == Experiment::Monotonicity {
            errs.extend(params.check().into_iter().map(|e| format!("model: {e}")));
        } else {
            // the standing dissipativity assumptions, gap included
            let report = validate_assumptions(&params, &spec);
            errs.extend(
                report
                    .failures
                    .into_iter()
                    .map(|e| format!("assumptions: {e}")),
            );
        }
        let x0 = self.init.x.build(&basis, self.init.x_amplitude);
        let y0 = self.init.y.build(&basis, self.init.y_amplitude);
        let (x0, y0) = match (x0, y0) {
            (Ok(x), Ok(y)) => (x, y),
            (x, y) => {
                for e in [x.err(), y.err()].into_iter().flatten() {
                    errs.push(format!("init: {e}"));
                }
                return Err(Error::Config(errs));
            }
        };
        let mut ergodic = ErgodicConfig::for_params(&params);
        if let Some(b) = self.ergodic.burn_in {
            ergodic.burn_in = b;
        }
        ergodic.horizon = self.ergodic.horizon;
        ergodic.n_rep = self.ergodic.n_rep;
        ergodic.dt = self.ergodic.dt;
        errs.extend(ergodic.check().into_iter().map(|e| format!("ergodic: {e}")));
        let decay = DecayConfig {
            horizon: self.decay.horizon,
            n_rep: self.decay.n_rep,
            dt: self.decay.dt,
            samples: self.decay.samples,
            resamples: self.decay.resamples,
        };
        if !(decay.horizon > 0.0 && decay.dt > 0.0) || decay.n_rep == 0 || decay.samples < 2 {
            errs.push("decay: horizon and dt must be positive, n_rep >= 1, samples >= 2".into());
        }
        if self.fbar.source == FbarKind::Oracle
            && (spec.as_linear().is_none() || params.beta != 0.0)
        {
            errs.push(
                "fbar.source = oracle needs coupling.family = linear and model.beta = 0".into(),
            );
        }
        if self.fbar.source == FbarKind::Exact && spec.f_depends_on_y() {
            errs.push("fbar.source = exact needs coupling.f_y = 0".into());
        }
        if self.experiment == Experiment::OuOracle
            && (spec.as_linear().is_none() || params.beta != 0.0)
        {
            errs.push("ou_oracle needs coupling.family = linear and model.beta = 0".into());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Resolved {
            basis,
            model: Model {
                params,
                spec,
                cov1,
                cov2,
                integrator,
            },
            x0,
            y0,
            ergodic,
            decay,
        })
    }

    fn check_ladders(&self, errs: &mut Vec<String>) {
        let l = &self.ladder;
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        match self.experiment {
            Experiment::Convergence | Experiment::MomentBounds => {
                let min = if self.experiment == Experiment::Convergence {
                    3
                } else {
                    1
                };
                if l.epsilon.len() < min || !l.epsilon.iter().all(|e| *e > 0.0 && *e <= 1.0) {
                    errs.push(format!(
                        "ladder.epsilon needs at least {min} values in (0, 1]"
                    ));
                }
                if l.p.is_empty() || l.p.contains(&0) {
                    errs.push("ladder.p needs positive moment orders".into());
                }
                if self.experiment == Experiment::MomentBounds
                    && (l.scales.is_empty() || !positive(&l.scales))
                {
                    errs.push("ladder.scales needs positive values".into());
                }
            }
            Experiment::TimeHolder | Experiment::AuxGap => {
                if l.delta.len() < 3 || !positive(&l.delta) {
                    errs.push("ladder.delta needs at least 3 positive values".into());
                } else if l.delta.iter().any(|d| *d < self.integrator.dt) {
                    errs.push("ladder.delta values must be at least integrator.dt".into());
                }
            }
            Experiment::Monotonicity => {
                if l.r.is_empty() || l.r.iter().any(|r| *r < 1.0) {
                    errs.push("ladder.r needs exponents >= 1".into());
                }
                if self.study.samples == 0 {
                    errs.push("study.samples must be at least 1".into());
                }
                if self.study.log_scale_min > self.study.log_scale_max {
                    errs.push("study.log_scale_min exceeds study.log_scale_max".into());
                }
            }
            Experiment::Mixing => {
                if l.x_amplitudes.is_empty() {
                    errs.push("ladder.x_amplitudes needs at least one value".into());
                }
            }
            Experiment::OuOracle => {
                if self.study.repetitions == 0 {
                    errs.push("study.repetitions must be at least 1".into());
                }
            }
            Experiment::Simulate => {
                if self.study.trajectory_stride == 0 {
                    errs.push("study.trajectory_stride must be at least 1".into());
                }
            }
        }
    }

    pub fn fbar_source(&self, seed: u64) -> Result<FbarSource> {
        Ok(match self.fbar.source {
            FbarKind::Exact => FbarSource::Exact,
            FbarKind::Oracle => FbarSource::Oracle,
            FbarKind::Estimated => FbarSource::Estimated {
                ergodic: self.resolve()?.ergodic,
                cache: CachePolicy::Relative(self.fbar.cache),
                budget: StderrBudget {
                    fraction: self.fbar.budget_fraction,
                    floor: self.fbar.budget_floor,
                },
                seed,
            },
        })
    }
}
