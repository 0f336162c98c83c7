//! Replicated simulate-and-fit runs and their summary metrics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::inference::{BaselinePrior, ModelSpec, PriorScenario};
use crate::sampler::{run, McmcConfig, PosteriorDraws};
use crate::simulate::{generate_dataset, ScenarioSpec, TrueBaseline};
use crate::splines::KnotGrid;

/// Default spacing of the evaluation grid for log-hazard curves.
pub const GRID_STEP: f64 = 0.01;

/// Sample quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `step, 2 step, ...` up to and including `t_max` (within rounding).
pub fn evaluation_grid(t_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t_max >= step) {
        return Err(invalid(format!("invalid grid: step {step}, end {t_max}")));
    }
    let m = (t_max / step + 1e-9).floor() as usize;
    Ok((1..=m).map(|i| i as f64 * step).collect())
}

/// Which posterior curve to summarise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    LogHazard,
    Survival,
}

/// Pointwise posterior mean and equal-tailed 95% interval on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Evaluates `curve` for every retained draw at every time.
pub fn posterior_curves(draws: &PosteriorDraws, times: &[f64], curve: Curve) -> Result<CurveSummary> {
    let m = draws.total_rows();
    if m == 0 {
        return Err(invalid("no retained draws"));
    }
    let mut values = vec![Vec::with_capacity(m); times.len()];
    for row in draws.rows() {
        let state = draws.state_of(row)?;
        for (j, &t) in times.iter().enumerate() {
            let v = match curve {
                Curve::LogHazard => state.baseline.log_hazard(t)?,
                Curve::Survival => state.baseline.survival(t)?,
            };
            values[j].push(v);
        }
    }
    let mut out = CurveSummary {
        times: times.to_vec(),
        mean: Vec::with_capacity(times.len()),
        lower: Vec::with_capacity(times.len()),
        upper: Vec::with_capacity(times.len()),
    };
    for mut v in values {
        out.mean.push(v.iter().sum::<f64>() / m as f64);
        v.sort_by(f64::total_cmp);
        out.lower.push(quantile(&v, 0.025));
        out.upper.push(quantile(&v, 0.975));
    }
    Ok(out)
}

/// Replica-averaged mean and interval endpoints.
pub fn credible_band(replicas: &[CurveSummary]) -> Result<CurveSummary> {
    let first = replicas.first().ok_or_else(|| invalid("no replicas"))?;
    if replicas.iter().any(|r| r.times != first.times) {
        return Err(invalid("replica curves use different grids"));
    }
    let r = replicas.len() as f64;
    let avg = |f: fn(&CurveSummary) -> &Vec<f64>| -> Vec<f64> {
        (0..first.times.len())
            .map(|j| replicas.iter().map(|c| f(c)[j]).sum::<f64>() / r)
            .collect()
    };
    Ok(CurveSummary {
        times: first.times.clone(),
        mean: avg(|c| &c.mean),
        lower: avg(|c| &c.lower),
        upper: avg(|c| &c.upper),
    })
}

/// What one replica contributes to the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub beta_mean: f64,
    pub beta_variance: f64,
    pub beta_lower: f64,
    pub beta_upper: f64,
    /// posterior mean of `log h0` on the evaluation grid
    pub log_hazard_mean: Vec<f64>,
}

pub fn summarize_replica(draws: &PosteriorDraws, beta_name: &str, times: &[f64]) -> Result<ReplicaSummary> {
    let mut beta = draws.pooled(beta_name)?;
    let n = beta.len() as f64;
    if beta.len() < 2 {
        return Err(invalid("need at least two draws"));
    }
    let mean = beta.iter().sum::<f64>() / n;
    let variance = beta.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0);
    beta.sort_by(f64::total_cmp);
    let curve = posterior_curves(draws, times, Curve::LogHazard)?;
    Ok(ReplicaSummary {
        beta_mean: mean,
        beta_variance: variance,
        beta_lower: quantile(&beta, 0.025),
        beta_upper: quantile(&beta, 0.975),
        log_hazard_mean: curve.mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaMetrics {
    pub average: f64,
    pub bias: f64,
    pub se: f64,
    pub sd: f64,
    pub cp: f64,
}

/// Fraction of intervals `[lo, hi]` containing `truth`.
pub fn coverage(intervals: &[(f64, f64)], truth: f64) -> f64 {
    let hit = intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
    hit as f64 / intervals.len() as f64
}

pub fn beta_metrics(replicas: &[ReplicaSummary], beta_true: f64) -> Result<BetaMetrics> {
    if replicas.is_empty() {
        return Err(invalid("no replicas"));
    }
    let r = replicas.len() as f64;
    let average = replicas.iter().map(|s| s.beta_mean).sum::<f64>() / r;
    let se = (replicas.iter().map(|s| s.beta_variance).sum::<f64>() / r).sqrt();
    let sd = if replicas.len() > 1 {
        (replicas.iter().map(|s| (s.beta_mean - average).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let intervals: Vec<(f64, f64)> = replicas.iter().map(|s| (s.beta_lower, s.beta_upper)).collect();
    Ok(BetaMetrics {
        average,
        bias: average - beta_true,
        se,
        sd,
        cp: coverage(&intervals, beta_true),
    })
}

/// RMSD between the replica-averaged posterior-mean log hazard and the truth.
pub fn rmsd_log_hazard(replica_means: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if replica_means.is_empty() {
        return Err(invalid("no replicas"));
    }
    if truth.is_empty() || replica_means.iter().any(|m| m.len() != truth.len()) {
        return Err(invalid("curves and truth differ in length"));
    }
    let r = replica_means.len() as f64;
    let sq: f64 = truth
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let est = replica_means.iter().map(|m| m[j]).sum::<f64>() / r;
            (est - t).powi(2)
        })
        .sum();
    Ok((sq / truth.len() as f64).sqrt())
}

/// A fitted model configuration: family, prior scenario and number of intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Weibull,
    Pc { scenario: u8, k: usize },
    Ps { scenario: u8, k: usize },
}

impl ModelChoice {
    pub fn label(&self) -> String {
        match self {
            ModelChoice::Weibull => "we".into(),
            ModelChoice::Pc { scenario, .. } => format!("pc{scenario}"),
            ModelChoice::Ps { scenario, .. } => format!("ps{scenario}"),
        }
    }

    pub fn intervals(&self) -> Option<usize> {
        match self {
            ModelChoice::Weibull => None,
            ModelChoice::Pc { k, .. } | ModelChoice::Ps { k, .. } => Some(*k),
        }
    }

    /// Model and prior for `data` on an equal-length grid ending at `t_max`.
    pub fn build(&self, data: &Dataset, t_max: f64) -> Result<(ModelSpec, PriorScenario)> {
        let spec = match self {
            ModelChoice::Weibull => ModelSpec::Weibull,
            ModelChoice::Pc { k, .. } => ModelSpec::PiecewiseConstant(KnotGrid::build_equal(t_max, *k)?),
            ModelChoice::Ps { k, .. } => ModelSpec::BSpline(KnotGrid::build_equal(t_max, *k)?),
        };
        let prior = match self {
            ModelChoice::Weibull => BaselinePrior::weibull(),
            ModelChoice::Pc { scenario: 1, .. } => BaselinePrior::pc1(),
            ModelChoice::Pc { scenario: 2, .. } => {
                let median = data
                    .reference_median_time()
                    .ok_or_else(|| invalid("median survival not reached; PC2 prior undefined"))?;
                BaselinePrior::pc2(median)
            }
            ModelChoice::Pc { scenario: 3, .. } => BaselinePrior::pc3(),
            ModelChoice::Pc { scenario: 4, .. } => BaselinePrior::pc4(),
            ModelChoice::Ps { scenario: 1, .. } => BaselinePrior::ps1(),
            ModelChoice::Ps { scenario: 2, .. } => BaselinePrior::ps2(),
            ModelChoice::Ps { scenario: 3, .. } => BaselinePrior::ps3(),
            _ => return Err(invalid(format!("unknown prior scenario {}", self.label()))),
        };
        Ok((spec, PriorScenario::new(prior)))
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.intervals() {
            Some(k) => write!(f, "{}:{k}", self.label()),
            None => write!(f, "{}", self.label()),
        }
    }
}

impl FromStr for ModelChoice {
    type Err = crate::error::Error;

    /// `we`, `pcN:K` or `psN:K`, e.g. `pc4:5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "we" || s == "weibull" {
            return Ok(ModelChoice::Weibull);
        }
        let (name, k) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("model '{s}' needs a knot count, e.g. pc4:5")))?;
        let k: usize = k.parse().map_err(|_| invalid(format!("bad knot count in '{s}'")))?;
        if k == 0 {
            return Err(invalid("knot count must be at least 1"));
        }
        let scenario = |prefix: &str, max: u8| -> Result<u8> {
            name[prefix.len()..]
                .parse::<u8>()
                .ok()
                .filter(|n| (1..=max).contains(n))
                .ok_or_else(|| invalid(format!("unknown prior scenario '{name}'")))
        };
        if name.starts_with("pc") {
            Ok(ModelChoice::Pc {
                scenario: scenario("pc", 4)?,
                k,
            })
        } else if name.starts_with("ps") {
            Ok(ModelChoice::Ps {
                scenario: scenario("ps", 3)?,
                k,
            })
        } else {
            Err(invalid(format!("unknown model '{name}'")))
        }
    }
}

/// Parses a comma-separated list such as `we,pc4:5,ps2:15`.
pub fn parse_models(list: &str) -> Result<Vec<ModelChoice>> {
    let models: Vec<ModelChoice> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if models.is_empty() {
        return Err(invalid("no models given"));
    }
    Ok(models)
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub model: ModelChoice,
    pub n: usize,
    pub beta: BetaMetrics,
    pub rmsd: f64,
}

/// Fits every model to every replica of `scenario` and summarises.
///
/// Replica `r` is fitted with MCMC seed `mcmc.seed + r`. Fitted grids end at
/// the censoring time, and the log hazard is compared on
/// [`evaluation_grid`]`(C_R, grid_step)`.
pub fn replicate(
    scenario: &ScenarioSpec,
    models: &[ModelChoice],
    mcmc: &McmcConfig,
    grid_step: f64,
) -> Result<Vec<MetricsRow>> {
    if scenario.replicas == 0 {
        return Err(invalid("at least one replica required"));
    }
    mcmc.validate()?;
    let cr = scenario.censoring_time()?;
    let times = evaluation_grid(cr, grid_step)?;
    let truth = true_log_hazard(&scenario.baseline, &times)?;
    let per_replica: Vec<Vec<ReplicaSummary>> = (0..scenario.replicas)
        .into_par_iter()
        .map(|r| {
            let data = generate_dataset(scenario, r)?;
            let mut config = mcmc.clone();
            config.seed = mcmc.seed.wrapping_add(r as u64);
            config.store_pointwise = false;
            models
                .iter()
                .map(|m| {
                    let (spec, prior) = m.build(&data, cr)?;
                    let draws = run(&data, &prior, &spec, &config)?;
                    summarize_replica(&draws, "beta[group]", &times)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    models
        .iter()
        .enumerate()
        .map(|(i, &model)| {
            let summaries: Vec<ReplicaSummary> = per_replica.iter().map(|s| s[i].clone()).collect();
            let means: Vec<Vec<f64>> = summaries.iter().map(|s| s.log_hazard_mean.clone()).collect();
            Ok(MetricsRow {
                model,
                n: scenario.n,
                beta: beta_metrics(&summaries, scenario.beta)?,
                rmsd: rmsd_log_hazard(&means, &truth)?,
            })
        })
        .collect()
}

pub fn true_log_hazard(baseline: &TrueBaseline, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| baseline.log_hazard(t)).collect()
}
