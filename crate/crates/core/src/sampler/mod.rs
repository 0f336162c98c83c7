//! Multi-chain adaptive Metropolis-within-Gibbs sampling.

pub mod diagnostics;
pub mod target;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::inference::{BaselinePrior, ModelSpec, ParameterState, PriorScenario};

pub use diagnostics::{check_convergence, ess, rhat, split_rhat, ConvergenceReport, Thresholds};
pub use target::{CoxTarget, FnTarget, Target};

/// Acceptance rate the proposal scales are tuned towards.
pub const TARGET_ACCEPTANCE: f64 = 0.44;
const INITIAL_STEP: f64 = 0.3;

/// Chain layout and seeding. `iterations` counts burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations per batch between proposal-scale updates during burn-in.
    pub adapt_window: usize,
    /// Keep per-subject log-likelihood contributions for CPO.
    pub store_pointwise: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self::real_data()
    }
}

impl McmcConfig {
    pub fn real_data() -> Self {
        Self {
            chains: 3,
            iterations: 50_000,
            burn_in: 5_000,
            thin: 5,
            seed: 1,
            adapt_window: 50,
            store_pointwise: true,
        }
    }

    pub fn simulation() -> Self {
        Self {
            chains: 3,
            iterations: 22_000,
            burn_in: 2_000,
            thin: 10,
            seed: 1,
            adapt_window: 50,
            store_pointwise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(invalid("chains must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(invalid(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        if self.adapt_window == 0 {
            return Err(invalid("adaptation window must be at least 1"));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Retained output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// row-major, one row per retained iteration, natural-scale parameters
    pub values: Vec<f64>,
    /// 1-based iteration number of each retained row (burn-in included in the count)
    pub iteration: Vec<usize>,
    pub loglik: Vec<f64>,
    /// row-major `rows x subjects`; empty when not stored
    pub pointwise: Vec<f64>,
    /// post-burn-in acceptance rate per coordinate
    pub acceptance: Vec<f64>,
}

/// Retained draws from all chains together with what is needed to evaluate them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    log_scale: Vec<bool>,
    spec: ModelSpec,
    prior: PriorScenario,
    covariates: usize,
    subjects: usize,
    chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    /// Reassembles draws read back from storage. Values are natural-scale
    /// rows in [`parameter_names`] order; `subjects` is the pointwise row
    /// width (0 when pointwise contributions were not kept).
    pub fn from_chains(
        spec: ModelSpec,
        prior: PriorScenario,
        covariate_names: &[String],
        subjects: usize,
        chains: Vec<ChainDraws>,
    ) -> Result<Self> {
        spec.check_prior(&prior)?;
        let names = parameter_names(&spec, covariate_names, &prior.baseline);
        let p = names.len();
        for (c, chain) in chains.iter().enumerate() {
            let rows = chain.loglik.len();
            if chain.values.len() != rows * p
                || chain.iteration.len() != rows
                || (subjects > 0 && chain.pointwise.len() != rows * subjects)
            {
                return Err(invalid(format!("chain {c}: inconsistent draw dimensions")));
            }
        }
        let bd = spec.baseline_dim();
        let mut log_scale = vec![spec.baseline_positive(); bd];
        log_scale.extend(std::iter::repeat_n(false, covariate_names.len()));
        if prior.baseline.has_sigma() {
            log_scale.push(true);
        }
        Ok(Self {
            names,
            log_scale,
            spec,
            prior,
            covariates: covariate_names.len(),
            subjects,
            chains,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn prior(&self) -> &PriorScenario {
        &self.prior
    }

    pub fn chains(&self) -> &[ChainDraws] {
        &self.chains
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn rows_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.loglik.len())
    }

    pub fn total_rows(&self) -> usize {
        self.chains.iter().map(|c| c.loglik.len()).sum()
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn has_pointwise(&self) -> bool {
        self.subjects == 0 || self.chains.iter().all(|c| !c.pointwise.is_empty())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn row(&self, chain: usize, row: usize) -> &[f64] {
        let p = self.names.len();
        &self.chains[chain].values[row * p..(row + 1) * p]
    }

    /// Every retained row, chains in order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let p = self.names.len();
        self.chains.iter().flat_map(move |c| c.values.chunks_exact(p))
    }

    pub fn pointwise_row(&self, chain: usize, row: usize) -> &[f64] {
        let n = self.subjects;
        &self.chains[chain].pointwise[row * n..(row + 1) * n]
    }

    /// Per-chain series of one parameter.
    pub fn parameter(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let j = self.index_of(name)?;
        Ok(self.column(j))
    }

    pub fn column(&self, j: usize) -> Vec<Vec<f64>> {
        let p = self.names.len();
        self.chains
            .iter()
            .map(|c| c.values.chunks_exact(p).map(|r| r[j]).collect())
            .collect()
    }

    /// Draws of `name` pooled over chains.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.parameter(name)?.concat())
    }

    /// Natural-scale state of a stored row.
    pub fn state_of(&self, row: &[f64]) -> Result<ParameterState> {
        let bd = self.spec.baseline_dim();
        let baseline = self
            .spec
            .baseline_from_unconstrained(&to_unconstrained(&row[..bd], &self.log_scale[..bd]))?;
        Ok(ParameterState {
            baseline,
            beta: row[bd..bd + self.covariates].to_vec(),
            sigma: self.prior.baseline.has_sigma().then(|| row[row.len() - 1]),
        })
    }

    /// Posterior mean taken on the sampling scale (log scale for positive
    /// parameters) and mapped back.
    pub fn sampling_scale_mean(&self) -> Result<ParameterState> {
        let p = self.names.len();
        let m = self.total_rows();
        if m == 0 {
            return Err(invalid("no retained draws"));
        }
        let mut acc = vec![0.0; p];
        for row in self.rows() {
            for j in 0..p {
                acc[j] += if self.log_scale[j] { row[j].ln() } else { row[j] };
            }
        }
        let mean: Vec<f64> = acc
            .iter()
            .zip(&self.log_scale)
            .map(|(s, &l)| {
                let v = s / m as f64;
                if l {
                    v.exp()
                } else {
                    v
                }
            })
            .collect();
        self.state_of(&mean)
    }

    pub fn convergence(&self, thresholds: &Thresholds) -> ConvergenceReport {
        let params: Vec<(String, Vec<Vec<f64>>)> = (0..self.names.len())
            .map(|j| (self.names[j].clone(), self.column(j)))
            .collect();
        check_convergence(&params, thresholds)
    }
}

fn to_unconstrained(values: &[f64], log_scale: &[bool]) -> Vec<f64> {
    values
        .iter()
        .zip(log_scale)
        .map(|(v, &l)| if l { v.ln() } else { *v })
        .collect()
}

/// Starting point in unconstrained coordinates: α = 1, λ and every φ at the
/// crude event rate, γ = 0, β = 0 and σ = 1.
pub fn initial_position(data: &Dataset, spec: &ModelSpec, prior: &PriorScenario) -> Vec<f64> {
    let events = data.event_count() as f64;
    let exposure = data.total_time();
    let rate = if events > 0.0 && exposure > 0.0 {
        events / exposure
    } else {
        1.0
    };
    let mut theta = match spec {
        ModelSpec::Weibull => vec![0.0, rate.ln()],
        ModelSpec::PiecewiseConstant(g) => vec![rate.ln(); g.intervals()],
        ModelSpec::BSpline(g) => vec![0.0; g.basis_count(crate::splines::CUBIC)],
    };
    theta.extend(std::iter::repeat_n(0.0, data.covariate_count()));
    if prior.baseline.has_sigma() {
        theta.push(0.0);
    }
    theta
}

/// Runs one chain of coordinate-wise random-walk Metropolis on `target`,
/// calling `keep` on every retained iteration with its 1-based iteration
/// number. Returns the post-burn-in acceptance rate per coordinate.
pub fn run_chain<T: Target>(
    target: &mut T,
    config: &McmcConfig,
    chain: usize,
    mut keep: impl FnMut(&T, usize),
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let d = target.dim();
    let mut log_step = vec![INITIAL_STEP.ln(); d];
    let mut batch_accepts = vec![0usize; d];
    let mut batch = 0usize;
    let mut accepted = vec![0usize; d];
    for it in 0..config.iterations {
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let current = target.log_density();
            let value = target.position()[i] + log_step[i].exp() * z;
            let proposed = target.propose(i, value);
            let u: f64 = rng.random();
            if proposed.is_finite() && u.ln() < proposed - current {
                target.accept();
                if it < config.burn_in {
                    batch_accepts[i] += 1;
                } else {
                    accepted[i] += 1;
                }
            } else {
                target.reject();
            }
        }
        if it < config.burn_in && (it + 1) % config.adapt_window == 0 {
            batch += 1;
            let gain = (2.0 / (batch as f64).sqrt()).min(1.0);
            for i in 0..d {
                let rate = batch_accepts[i] as f64 / config.adapt_window as f64;
                log_step[i] += gain * (rate - TARGET_ACCEPTANCE);
                batch_accepts[i] = 0;
            }
        }
        if it >= config.burn_in && (it - config.burn_in + 1).is_multiple_of(config.thin) {
            keep(target, it + 1);
        }
    }
    let kept = (config.iterations - config.burn_in) as f64;
    accepted.iter().map(|&a| a as f64 / kept).collect()
}

/// Parameter names in storage order.
pub fn parameter_names(spec: &ModelSpec, covariate_names: &[String], prior: &BaselinePrior) -> Vec<String> {
    let mut names = spec.baseline_names();
    names.extend(covariate_names.iter().map(|c| format!("beta[{c}]")));
    if prior.has_sigma() {
        names.push("sigma".to_string());
    }
    names
}

/// Samples the posterior of a Cox model with the given baseline and prior.
pub fn run(data: &Dataset, prior: &PriorScenario, spec: &ModelSpec, config: &McmcConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    prior.validate()?;
    spec.check_prior(prior)?;
    let theta0 = initial_position(data, spec, prior);
    let first = CoxTarget::new(data, spec, prior, theta0)?;
    if !first.log_density().is_finite() {
        return Err(Error::Initialization(format!(
            "log posterior at the starting point is {} (log-likelihood {})",
            first.log_density(),
            first.loglik()
        )));
    }
    let names = parameter_names(spec, data.covariate_names(), &prior.baseline);
    let p = names.len();
    let bd = spec.baseline_dim();
    let j_cov = data.covariate_count();
    let rows = config.retained_per_chain();
    let chains: Vec<ChainDraws> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut target = first.clone();
            let mut out = ChainDraws {
                values: Vec::with_capacity(rows * p),
                iteration: Vec::with_capacity(rows),
                loglik: Vec::with_capacity(rows),
                pointwise: Vec::new(),
                acceptance: Vec::new(),
            };
            if config.store_pointwise {
                out.pointwise.reserve(rows * data.len());
            }
            out.acceptance = run_chain(&mut target, config, c, |t, it| {
                let theta = t.position();
                out.values.extend(theta.iter().enumerate().map(|(j, v)| {
                    let positive = if j < bd {
                        spec.baseline_positive()
                    } else {
                        j >= bd + j_cov
                    };
                    if positive {
                        v.exp()
                    } else {
                        *v
                    }
                }));
                out.iteration.push(it);
                out.loglik.push(t.loglik());
                if config.store_pointwise {
                    t.pointwise_into(&mut out.pointwise);
                }
            });
            out
        })
        .collect();
    let subjects = if config.store_pointwise { data.len() } else { 0 };
    PosteriorDraws::from_chains(spec.clone(), prior.clone(), data.covariate_names(), subjects, chains)
}
