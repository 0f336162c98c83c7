//! Convergence diagnostics over per-chain draw series.

use crate::error::{invalid, Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn equal_lengths(chains: &[Vec<f64>]) -> Result<usize> {
    let n = chains.first().map_or(0, Vec::len);
    if chains.iter().any(|c| c.len() != n) {
        return Err(invalid("chains must have equal length"));
    }
    Ok(n)
}

/// Gelman–Rubin potential scale reduction from between- and within-chain
/// variances of whole chains.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::RequiresMultipleChains);
    }
    let n = equal_lengths(chains)?;
    if n < 2 {
        return Err(invalid("each chain needs at least two draws"));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| sample_variance(c, mu))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return Err(Error::DegenerateChain("zero within-chain variance".into()));
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// [`rhat`] after splitting every chain into halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let n = equal_lengths(chains)?;
    let half = n / 2;
    let split: Vec<Vec<f64>> = chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..].to_vec()])
        .collect();
    rhat(&split)
}

fn autocovariance(x: &[f64], mu: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - mu) * (x[i + lag] - mu)).sum::<f64>() / n as f64
}

/// Effective sample size from the multi-chain autocorrelation with Geyer's
/// initial monotone positive sequence, capped at the total draw count.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(invalid("no chains"));
    }
    let n = equal_lengths(chains)?;
    if n < 4 {
        return Err(invalid("each chain needs at least four draws"));
    }
    let m = chains.len();
    let total = (m * n) as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let mean_var = acov(0) * nf / (nf - 1.0);
    let between = if m > 1 {
        sample_variance(&means, mean(&means))
    } else {
        0.0
    };
    let var_plus = mean_var * (nf - 1.0) / nf + between;
    if !(var_plus > 0.0) || !(mean_var > 0.0) {
        return Err(Error::DegenerateChain("constant draws".into()));
    }
    let rho_at = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;

    let mut rho = vec![0.0; n + 2];
    rho[0] = 1.0;
    rho[1] = rho_at(1);
    let mut even = 1.0;
    let mut odd = rho[1];
    let mut t = 1;
    while t + 5 < n && even + odd > 0.0 {
        even = rho_at(t + 1);
        odd = rho_at(t + 2);
        if even + odd >= 0.0 {
            rho[t + 1] = even;
            rho[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 {
        rho[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 4 <= max_t {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0;
            rho[t + 2] = rho[t + 1];
        }
        t += 2;
    }
    let tau = (-1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t + 1]).max(1.0 / total.log10());
    Ok((total / tau).min(total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub rhat_max: f64,
    pub ess_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rhat_max: 1.1,
            ess_min: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDiagnostic {
    pub name: String,
    /// `None` when only one chain was run
    pub rhat: Option<f64>,
    /// zero for a constant series
    pub ess: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub parameters: Vec<ParameterDiagnostic>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.parameters.iter().all(|p| p.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.parameters
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.name.as_str())
            .collect()
    }
}

/// Flags every parameter whose R-hat exceeds or whose ESS falls below the
/// thresholds. A parameter whose diagnostics cannot be computed fails.
pub fn check_convergence(params: &[(String, Vec<Vec<f64>>)], thresholds: &Thresholds) -> ConvergenceReport {
    let parameters = params
        .iter()
        .map(|(name, chains)| {
            let rhat_value = match rhat(chains) {
                Ok(r) => Some(r),
                Err(Error::RequiresMultipleChains) => None,
                Err(_) => Some(f64::NAN),
            };
            let ess_value = ess(chains).unwrap_or(0.0);
            let rhat_ok = rhat_value.is_none_or(|r| r <= thresholds.rhat_max);
            ParameterDiagnostic {
                name: name.clone(),
                rhat: rhat_value,
                ess: ess_value,
                passed: rhat_ok && ess_value >= thresholds.ess_min,
            }
        })
        .collect();
    ConvergenceReport { parameters }
}
