//! Likelihood, prior scenarios and the joint log-posterior.
//!
//! Prior densities are with respect to the natural parameters (`alpha`,
//! `lambda`, `phi_k`, `gamma_k`, `beta_j`, `sigma`). Samplers that move on the
//! log scale add their own Jacobian.

use statrs::function::gamma::ln_gamma;

use crate::baseline::{BSplineLogBaseline, BaselineModel, PiecewiseConstantBaseline, WeibullBaseline};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::splines::{KnotGrid, CUBIC};

/// Constant used for the median-based elicitation of the PC2 prior mean.
#[allow(clippy::approx_constant)]
pub const MEDIAN_RULE_NUMERATOR: f64 = 0.69315;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `Ga(shape, rate)` with density `rate^shape x^(shape-1) e^(-rate x) / Gamma(shape)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.ln_pdf_at_log(x.ln())
    }

    /// Density of `x` evaluated through `u = ln x`, safe when `e^u` underflows.
    pub fn ln_pdf_at_log(&self, u: f64) -> f64 {
        gamma_ln_pdf_at_log(self.shape, self.rate, u)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    fn valid(&self) -> bool {
        self.shape > 0.0 && self.rate > 0.0
    }
}

fn gamma_ln_pdf_at_log(shape: f64, rate: f64, u: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * u - rate * u.exp()
}

fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -LN_SQRT_2PI - sd.ln() - 0.5 * z * z
}

/// Hyperprior on a random-walk or hierarchical standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaHyperprior {
    /// `sigma ~ U(0, upper)`.
    UniformSd { upper: f64 },
    /// `1 / sigma^2 ~ Ga(shape, rate)`.
    GammaPrecision { shape: f64, rate: f64 },
}

impl Default for SigmaHyperprior {
    fn default() -> Self {
        SigmaHyperprior::UniformSd { upper: 10.0 }
    }
}

impl SigmaHyperprior {
    /// Log density of `sigma` (natural scale) given `ln sigma`.
    pub fn ln_pdf_at_log(&self, log_sigma: f64) -> f64 {
        match *self {
            SigmaHyperprior::UniformSd { upper } => {
                if log_sigma.exp() < upper {
                    -upper.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SigmaHyperprior::GammaPrecision { shape, rate } => {
                // tau = sigma^-2, |d tau / d sigma| = 2 sigma^-3
                gamma_ln_pdf_at_log(shape, rate, -2.0 * log_sigma) + 2f64.ln() - 3.0 * log_sigma
            }
        }
    }

    fn valid(&self) -> bool {
        match *self {
            SigmaHyperprior::UniformSd { upper } => upper > 0.0,
            SigmaHyperprior::GammaPrecision { shape, rate } => shape > 0.0 && rate > 0.0,
        }
    }
}

/// Prior on the baseline-hazard parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselinePrior {
    /// Independent gamma priors on the Weibull shape and scale.
    Weibull { alpha: GammaPrior, lambda: GammaPrior },
    /// `phi_k ~ Ga(eta, psi)` independently.
    Pc1 { eta: f64, psi: f64 },
    /// `phi_k ~ Ga(w0 eta0 d_k, w0 d_k)` with `d_k` the interval length.
    Pc2 { w0: f64, eta0: f64 },
    /// `phi_1 ~ first`, `phi_k | phi_{k-1} ~ Ga(eta, eta / phi_{k-1})`.
    Pc3 { eta: f64, first: GammaPrior },
    /// `log phi_1 ~ N(0, sigma^2)`, `log phi_k | log phi_{k-1} ~ N(log phi_{k-1}, sigma^2)`.
    Pc4 { sigma: SigmaHyperprior },
    /// `gamma_k ~ N(0, sd^2)` independently.
    Ps1 { sd: f64 },
    /// `gamma_k | sigma ~ N(0, sigma^2)`.
    Ps2 { sigma: SigmaHyperprior },
    /// `gamma_1 ~ N(0, anchor_sd^2)`, `gamma_k | gamma_{k-1} ~ N(gamma_{k-1}, sigma^2)`.
    Ps3 { sigma: SigmaHyperprior, anchor_sd: f64 },
}

impl BaselinePrior {
    pub fn weibull() -> Self {
        BaselinePrior::Weibull {
            alpha: GammaPrior::new(0.01, 0.01),
            lambda: GammaPrior::new(0.01, 0.01),
        }
    }

    pub fn pc1() -> Self {
        BaselinePrior::Pc1 { eta: 0.01, psi: 0.01 }
    }

    /// PC2 with `eta0` elicited from the reference-group median survival time.
    pub fn pc2(median_time: f64) -> Self {
        BaselinePrior::Pc2 {
            w0: 0.01,
            eta0: pc2_eta0_from_median(median_time),
        }
    }

    pub fn pc3() -> Self {
        BaselinePrior::Pc3 {
            eta: 0.01,
            first: GammaPrior::new(0.01, 0.01),
        }
    }

    pub fn pc4() -> Self {
        BaselinePrior::Pc4 {
            sigma: SigmaHyperprior::default(),
        }
    }

    pub fn ps1() -> Self {
        BaselinePrior::Ps1 { sd: 10.0 }
    }

    pub fn ps2() -> Self {
        BaselinePrior::Ps2 {
            sigma: SigmaHyperprior::default(),
        }
    }

    pub fn ps3() -> Self {
        BaselinePrior::Ps3 {
            sigma: SigmaHyperprior::default(),
            anchor_sd: 10.0,
        }
    }

    /// Short scenario label (`we`, `pc1`, ..., `ps3`).
    pub fn label(&self) -> &'static str {
        match self {
            BaselinePrior::Weibull { .. } => "we",
            BaselinePrior::Pc1 { .. } => "pc1",
            BaselinePrior::Pc2 { .. } => "pc2",
            BaselinePrior::Pc3 { .. } => "pc3",
            BaselinePrior::Pc4 { .. } => "pc4",
            BaselinePrior::Ps1 { .. } => "ps1",
            BaselinePrior::Ps2 { .. } => "ps2",
            BaselinePrior::Ps3 { .. } => "ps3",
        }
    }

    /// Whether the scenario carries a random standard deviation.
    pub fn has_sigma(&self) -> bool {
        matches!(
            self,
            BaselinePrior::Pc4 { .. } | BaselinePrior::Ps2 { .. } | BaselinePrior::Ps3 { .. }
        )
    }

    pub fn family(&self) -> Family {
        match self {
            BaselinePrior::Weibull { .. } => Family::Weibull,
            BaselinePrior::Pc1 { .. }
            | BaselinePrior::Pc2 { .. }
            | BaselinePrior::Pc3 { .. }
            | BaselinePrior::Pc4 { .. } => Family::PiecewiseConstant,
            _ => Family::BSpline,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BaselinePrior::Weibull { alpha, lambda } => alpha.valid() && lambda.valid(),
            BaselinePrior::Pc1 { eta, psi } => *eta > 0.0 && *psi > 0.0,
            BaselinePrior::Pc2 { w0, eta0 } => *w0 > 0.0 && *eta0 > 0.0,
            BaselinePrior::Pc3 { eta, first } => *eta > 0.0 && first.valid(),
            BaselinePrior::Pc4 { sigma } | BaselinePrior::Ps2 { sigma } => sigma.valid(),
            BaselinePrior::Ps1 { sd } => *sd > 0.0,
            BaselinePrior::Ps3 { sigma, anchor_sd } => sigma.valid() && *anchor_sd > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("{} hyperparameters must be positive", self.label())))
        }
    }
}

/// `eta0 = 0.69315 / median`.
pub fn pc2_eta0_from_median(median_time: f64) -> f64 {
    MEDIAN_RULE_NUMERATOR / median_time
}

/// Independent `N(0, sd^2)` priors on the regression coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior {
    pub sd: f64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self { sd: 1000f64.sqrt() }
    }
}

impl BetaPrior {
    pub fn log_density(&self, beta: &[f64]) -> f64 {
        beta.iter().map(|&b| normal_ln_pdf(b, 0.0, self.sd)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorScenario {
    pub baseline: BaselinePrior,
    pub beta: BetaPrior,
}

impl PriorScenario {
    pub fn new(baseline: BaselinePrior) -> Self {
        Self {
            baseline,
            beta: BetaPrior::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        if !(self.beta.sd > 0.0) {
            return Err(invalid("beta prior standard deviation must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Weibull,
    PiecewiseConstant,
    BSpline,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Weibull => "we",
            Family::PiecewiseConstant => "pc",
            Family::BSpline => "ps",
        }
    }
}

/// Baseline family together with its knot grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Weibull,
    PiecewiseConstant(KnotGrid),
    BSpline(KnotGrid),
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Weibull => Family::Weibull,
            ModelSpec::PiecewiseConstant(_) => Family::PiecewiseConstant,
            ModelSpec::BSpline(_) => Family::BSpline,
        }
    }

    pub fn grid(&self) -> Option<&KnotGrid> {
        match self {
            ModelSpec::Weibull => None,
            ModelSpec::PiecewiseConstant(g) | ModelSpec::BSpline(g) => Some(g),
        }
    }

    /// Number of baseline parameters.
    pub fn baseline_dim(&self) -> usize {
        match self {
            ModelSpec::Weibull => 2,
            ModelSpec::PiecewiseConstant(g) => g.intervals(),
            ModelSpec::BSpline(g) => g.basis_count(CUBIC),
        }
    }

    pub fn baseline_names(&self) -> Vec<String> {
        match self {
            ModelSpec::Weibull => vec!["alpha".into(), "lambda".into()],
            ModelSpec::PiecewiseConstant(g) => (1..=g.intervals()).map(|k| format!("phi[{k}]")).collect(),
            ModelSpec::BSpline(g) => (1..=g.basis_count(CUBIC)).map(|k| format!("gamma[{k}]")).collect(),
        }
    }

    /// Baseline parameters sampled on the log scale.
    pub fn baseline_positive(&self) -> bool {
        !matches!(self, ModelSpec::BSpline(_))
    }

    /// Builds the baseline from its unconstrained coordinates
    /// (`ln alpha, ln lambda` | `ln phi` | `gamma`).
    pub fn baseline_from_unconstrained(&self, theta: &[f64]) -> Result<BaselineModel> {
        if theta.len() != self.baseline_dim() {
            return Err(invalid(format!(
                "expected {} baseline coordinates, got {}",
                self.baseline_dim(),
                theta.len()
            )));
        }
        Ok(match self {
            ModelSpec::Weibull => BaselineModel::Weibull(WeibullBaseline::new(theta[0].exp(), theta[1].exp())?),
            ModelSpec::PiecewiseConstant(g) => BaselineModel::PiecewiseConstant(PiecewiseConstantBaseline::new(
                theta.iter().map(|u| u.exp()).collect(),
                g.clone(),
            )?),
            ModelSpec::BSpline(g) => BaselineModel::BSplineLog(BSplineLogBaseline::new(theta.to_vec(), g.clone())?),
        })
    }

    pub fn matches(&self, baseline: &BaselineModel) -> bool {
        match (self, baseline) {
            (ModelSpec::Weibull, BaselineModel::Weibull(_)) => true,
            (ModelSpec::PiecewiseConstant(g), BaselineModel::PiecewiseConstant(b)) => g == b.grid(),
            (ModelSpec::BSpline(g), BaselineModel::BSplineLog(b)) => g == b.grid(),
            _ => false,
        }
    }

    /// Checks that a prior scenario belongs to this family.
    pub fn check_prior(&self, prior: &PriorScenario) -> Result<()> {
        if prior.baseline.family() != self.family() {
            return Err(invalid(format!(
                "prior scenario {} does not apply to the {} baseline",
                prior.baseline.label(),
                self.family().label()
            )));
        }
        prior.validate()
    }
}

/// Baseline coordinates on the sampling scale.
pub fn baseline_unconstrained(baseline: &BaselineModel) -> Vec<f64> {
    match baseline {
        BaselineModel::Weibull(w) => vec![w.alpha.ln(), w.lambda.ln()],
        BaselineModel::PiecewiseConstant(p) => p.phi().iter().map(|x| x.ln()).collect(),
        BaselineModel::BSplineLog(b) => b.gamma().to_vec(),
    }
}

/// Baseline parameters, regression coefficients and optional hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub baseline: BaselineModel,
    pub beta: Vec<f64>,
    pub sigma: Option<f64>,
}

impl ParameterState {
    pub fn model_spec(&self) -> ModelSpec {
        match &self.baseline {
            BaselineModel::Weibull(_) => ModelSpec::Weibull,
            BaselineModel::PiecewiseConstant(p) => ModelSpec::PiecewiseConstant(p.grid().clone()),
            BaselineModel::BSplineLog(b) => ModelSpec::BSpline(b.grid().clone()),
        }
    }
}

/// Log prior of the baseline block given its unconstrained coordinates.
///
/// The result is a density in the natural parameters; no Jacobian is added.
pub(crate) fn baseline_log_prior(
    prior: &BaselinePrior,
    spec: &ModelSpec,
    theta: &[f64],
    log_sigma: Option<f64>,
) -> f64 {
    let log_sigma_required = || log_sigma.expect("scenario requires sigma");
    match (prior, spec) {
        (BaselinePrior::Weibull { alpha, lambda }, ModelSpec::Weibull) => {
            alpha.ln_pdf_at_log(theta[0]) + lambda.ln_pdf_at_log(theta[1])
        }
        (BaselinePrior::Pc1 { eta, psi }, ModelSpec::PiecewiseConstant(_)) => {
            theta.iter().map(|&u| gamma_ln_pdf_at_log(*eta, *psi, u)).sum()
        }
        (BaselinePrior::Pc2 { w0, eta0 }, ModelSpec::PiecewiseConstant(g)) => theta
            .iter()
            .enumerate()
            .map(|(s, &u)| {
                let d = g.width(s);
                gamma_ln_pdf_at_log(w0 * eta0 * d, w0 * d, u)
            })
            .sum(),
        (BaselinePrior::Pc3 { eta, first }, ModelSpec::PiecewiseConstant(_)) => {
            let mut lp = first.ln_pdf_at_log(theta[0]);
            for w in theta.windows(2) {
                // Ga(eta, eta / phi_prev) through log values
                let (prev, cur) = (w[0], w[1]);
                lp += eta * eta.ln() - eta * prev - ln_gamma(*eta) + (eta - 1.0) * cur - eta * (cur - prev).exp();
            }
            lp
        }
        (BaselinePrior::Pc4 { sigma }, ModelSpec::PiecewiseConstant(_)) => {
            let ls = log_sigma_required();
            let sd = ls.exp();
            // density of log phi, converted to phi by subtracting sum(log phi)
            random_walk_ln_pdf(theta, 0.0, sd, sd) - theta.iter().sum::<f64>() + sigma.ln_pdf_at_log(ls)
        }
        (BaselinePrior::Ps1 { sd }, ModelSpec::BSpline(_)) => theta.iter().map(|&g| normal_ln_pdf(g, 0.0, *sd)).sum(),
        (BaselinePrior::Ps2 { sigma }, ModelSpec::BSpline(_)) => {
            let ls = log_sigma_required();
            let sd = ls.exp();
            theta.iter().map(|&g| normal_ln_pdf(g, 0.0, sd)).sum::<f64>() + sigma.ln_pdf_at_log(ls)
        }
        (BaselinePrior::Ps3 { sigma, anchor_sd }, ModelSpec::BSpline(_)) => {
            let ls = log_sigma_required();
            random_walk_ln_pdf(theta, 0.0, *anchor_sd, ls.exp()) + sigma.ln_pdf_at_log(ls)
        }
        _ => f64::NEG_INFINITY,
    }
}

/// First-order Gaussian random walk: `x_1 ~ N(mean, anchor_sd^2)`,
/// `x_k | x_{k-1} ~ N(x_{k-1}, step_sd^2)`.
fn random_walk_ln_pdf(x: &[f64], mean: f64, anchor_sd: f64, step_sd: f64) -> f64 {
    let mut lp = normal_ln_pdf(x[0], mean, anchor_sd);
    for w in x.windows(2) {
        lp += normal_ln_pdf(w[1], w[0], step_sd);
    }
    lp
}

/// Log prior of a full parameter state, including the
/// hyperprior and regression-coefficient terms.
pub fn log_prior(state: &ParameterState, scenario: &PriorScenario) -> Result<f64> {
    let spec = state.model_spec();
    spec.check_prior(scenario)?;
    let log_sigma = match (scenario.baseline.has_sigma(), state.sigma) {
        (true, Some(s)) if s > 0.0 && s.is_finite() => Some(s.ln()),
        (true, Some(_)) => return Ok(f64::NEG_INFINITY),
        (true, None) => {
            return Err(invalid(format!(
                "scenario {} needs a sigma hyperparameter",
                scenario.baseline.label()
            )))
        }
        (false, _) => None,
    };
    let theta = baseline_unconstrained(&state.baseline);
    Ok(baseline_log_prior(&scenario.baseline, &spec, &theta, log_sigma) + scenario.beta.log_density(&state.beta))
}

/// Per-subject log-likelihood contributions
/// `delta_i (log h0(t_i) + x_i'beta) - H0(t_i) exp(x_i'beta)`.
pub fn cox_loglik_pointwise(data: &Dataset, baseline: &BaselineModel, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != data.covariate_count() {
        return Err(invalid(format!(
            "expected {} regression coefficients, got {}",
            data.covariate_count(),
            beta.len()
        )));
    }
    data.records()
        .iter()
        .map(|r| {
            let eta = r.linear_predictor(beta);
            let cum = baseline.cumulative_hazard(r.time)?;
            let mut l = -cum * eta.exp();
            if r.event {
                l += baseline.log_hazard(r.time)? + eta;
            }
            if l.is_finite() {
                Ok(l)
            } else {
                Err(Error::Numeric(format!(
                    "non-finite log-likelihood contribution at t = {}",
                    r.time
                )))
            }
        })
        .collect()
}

/// Right-censored Cox log-likelihood.
pub fn cox_loglik(data: &Dataset, baseline: &BaselineModel, beta: &[f64]) -> Result<f64> {
    Ok(cox_loglik_pointwise(data, baseline, beta)?.iter().sum())
}

/// `cox_loglik + log_prior`; `-inf` when a constraint is violated.
pub fn log_posterior(data: &Dataset, state: &ParameterState, scenario: &PriorScenario) -> Result<f64> {
    let lp = log_prior(state, scenario)?;
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + cox_loglik(data, &state.baseline, &state.beta)?)
}
