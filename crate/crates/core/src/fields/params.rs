use super::basis::LAMBDA_1;
use super::coupling::CouplingSpec;
use crate::error::{Error, Result};

/// Physical parameters and the certified coupling constants. The Darcy
/// coefficient is fixed to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub beta: f64,
    pub r: f64,
    /// Time-scale ratio in `(0, 1]`.
    pub epsilon: f64,
    /// Block length of the auxiliary process.
    pub delta: f64,
    pub l_g: f64,
    pub l_sigma2: f64,
    pub c_lip: f64,
    /// Growth exponent of `sigma2` in `y`, in `(0, 1)`.
    pub zeta_growth: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            mu: 1.0,
            beta: 0.0,
            r: 3.0,
            epsilon: 0.1,
            delta: 0.1f64.powf(2.0 / 3.0),
            l_g: 0.0,
            l_sigma2: 0.0,
            c_lip: 0.0,
            zeta_growth: 0.5,
        }
    }
}

impl ModelParams {
    /// Copies the certified constants of `spec` for covariances with largest
    /// eigenvalues `q1_max`, `q2_max`.
    pub fn with_coupling(mut self, spec: &CouplingSpec, q1_max: f64, q2_max: f64) -> Self {
        let k = spec.constants(q1_max, q2_max);
        self.l_g = k.l_g;
        self.l_sigma2 = k.l_sigma2;
        self.c_lip = k.c_lip;
        self
    }

    /// Checks ranges of the physical parameters; returns every violation.
    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            errs.push(format!("mu = {} must be positive", self.mu));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            errs.push(format!("beta = {} must be >= 0", self.beta));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            errs.push(format!("r = {} must be >= 1", self.r));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            errs.push(format!("epsilon = {} must lie in (0, 1]", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            errs.push(format!("delta = {} must be positive", self.delta));
        }
        if !(self.zeta_growth > 0.0 && self.zeta_growth < 1.0) {
            errs.push(format!(
                "zeta_growth = {} must lie in (0, 1)",
                self.zeta_growth
            ));
        }
        for (name, v) in [
            ("L_g", self.l_g),
            ("L_sigma2", self.l_sigma2),
            ("C_lip", self.c_lip),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        errs
    }

    /// `mu lambda1 - 2 L_g - 2 L_sigma2^2`; averaging runs require it positive.
    pub fn dissipativity_gap(&self) -> f64 {
        self.mu * LAMBDA_1 - 2.0 * self.l_g - 2.0 * self.l_sigma2 * self.l_sigma2
    }

    /// `2 mu lambda1 - 2 L_g - L_sigma2^2`, the contraction rate of the frozen equation.
    pub fn zeta_mix(&self) -> f64 {
        2.0 * self.mu * LAMBDA_1 - 2.0 * self.l_g - self.l_sigma2 * self.l_sigma2
    }
}

/// Signed dissipativity gaps with the list of failed conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `mu lambda1 - 2 L_g`.
    pub gamma: f64,
    /// `mu lambda1 - 2 L_g - L_sigma2^2`.
    pub kappa: f64,
    /// `2 mu lambda1 - 2 L_g - L_sigma2^2`.
    pub zeta_mix: f64,
    /// `mu lambda1 - 2 L_g - 2 L_sigma2^2`.
    pub xi: f64,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Errors unless the averaging gap `xi` is positive.
    pub fn require_admissible(&self) -> Result<()> {
        if self.xi > 0.0 {
            Ok(())
        } else {
            Err(Error::DissipativityGap { xi: self.xi })
        }
    }
}

/// Evaluates every dissipativity gap for `params` and checks that the stored
/// constants are no smaller than those certified by `spec` (assuming unit
/// covariance eigenvalue bounds are already folded into `params`).
pub fn validate_assumptions(params: &ModelParams, spec: &CouplingSpec) -> ValidationReport {
    let mu1 = params.mu * LAMBDA_1;
    let lg = params.l_g;
    let ls2 = params.l_sigma2 * params.l_sigma2;
    let mut failures = params.check();
    let k = spec.constants(0.0, 0.0);
    if k.l_g > lg {
        failures.push(format!(
            "L_g = {lg} is below the coupling's certified constant {}",
            k.l_g
        ));
    }
    let report = ValidationReport {
        gamma: mu1 - 2.0 * lg,
        kappa: mu1 - 2.0 * lg - ls2,
        zeta_mix: 2.0 * mu1 - 2.0 * lg - ls2,
        xi: mu1 - 2.0 * lg - 2.0 * ls2,
        failures,
    };
    let mut failures = report.failures.clone();
    for (name, v) in [
        ("gamma", report.gamma),
        ("kappa", report.kappa),
        ("zeta_mix", report.zeta_mix),
    ] {
        if v <= 0.0 {
            failures.push(format!("gap {name} = {v} is not positive"));
        }
    }
    if report.xi <= 0.0 {
        failures.push(Error::DissipativityGap { xi: report.xi }.to_string());
    }
    ValidationReport { failures, ..report }
}

/// Shift `eta` making `G + eta I` monotone for `r > 3`:
/// `eta = (r-3)/(2 mu (r-1)) * (2/(beta mu (r-1)))^{2/(r-3)}`.
pub fn monotonicity_constant(params: &ModelParams) -> Result<f64> {
    let (mu, beta, r) = (params.mu, params.beta, params.r);
    if r.is_nan() || r <= 3.0 || beta.is_nan() || beta <= 0.0 {
        return Err(Error::MonotonicityDomain { r, beta });
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mu = {mu} must be positive"
        )));
    }
    let base = 2.0 / (beta * mu * (r - 1.0));
    Ok((r - 3.0) / (2.0 * mu * (r - 1.0)) * base.powf(2.0 / (r - 3.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::coupling::{CouplingSpec, TanhCoupling};

    fn params(mu: f64, l_g: f64, l_s: f64) -> ModelParams {
        ModelParams {
            mu,
            l_g,
            l_sigma2: l_s,
            ..ModelParams::default()
        }
    }

    #[test]
    fn gaps_without_coupling_equal_mu() {
        let rep = validate_assumptions(&params(1.0, 0.0, 0.0), &CouplingSpec::zero());
        assert_eq!([rep.gamma, rep.kappa, rep.xi], [1.0; 3]);
        assert_eq!(rep.zeta_mix, 2.0);
        assert!(rep.passed());
        rep.require_admissible().unwrap();
    }

    #[test]
    fn large_l_g_fails() {
        let rep = validate_assumptions(&params(1.0, 0.6, 0.0), &CouplingSpec::zero());
        assert!((rep.xi + 0.2).abs() < 1e-15);
        assert!(!rep.passed());
        assert!(matches!(
            rep.require_admissible(),
            Err(Error::DissipativityGap { .. })
        ));
    }

    #[test]
    fn mixed_constants() {
        let rep = validate_assumptions(&params(2.0, 0.3, 0.5), &CouplingSpec::zero());
        assert!((rep.xi - 0.9).abs() < 1e-15);
        assert!(rep.passed());
    }

    #[test]
    fn understated_constants_are_reported() {
        let spec = CouplingSpec::tanh(TanhCoupling {
            f_x: 0.0,
            f_y: 1.0,
            g_x: 1.0,
            g_damp: 0.0,
            g_y: 0.2,
            s1_0: 0.0,
            s1_x: 0.0,
            s2_0: 0.1,
            s2_x: 0.0,
            s2_y: 0.0,
        })
        .unwrap();
        let rep = validate_assumptions(&params(1.0, 0.0, 0.0), &spec);
        assert!(!rep.passed());
        let p = params(1.0, 0.0, 0.0).with_coupling(&spec, 1.0, 1.0);
        assert!(validate_assumptions(&p, &spec).passed());
    }

    #[test]
    fn monotonicity_shift() {
        let mut p = ModelParams {
            mu: 1.0,
            beta: 1.0,
            r: 5.0,
            ..ModelParams::default()
        };
        assert!((monotonicity_constant(&p).unwrap() - 0.125).abs() < 1e-15);
        p.r = 3.0;
        assert!(matches!(
            monotonicity_constant(&p),
            Err(Error::MonotonicityDomain { .. })
        ));
        // vanishes as r decreases to 3 with beta mu (r - 1) > 2
        p.beta = 4.0;
        let etas: Vec<f64> = [3.5, 3.1, 3.01]
            .iter()
            .map(|&r| monotonicity_constant(&ModelParams { r, ..p }).unwrap())
            .collect();
        assert!(etas[0] > etas[1] && etas[1] > etas[2] && etas[2] < 1e-10);
    }
}
