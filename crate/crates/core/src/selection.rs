//! Deviance information criterion, conditional predictive ordinates and the
//! comparison rules built on them.

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::inference::cox_loglik;
use crate::sampler::PosteriorDraws;

/// PBF above which evidence is reported as substantial.
pub const PBF_SUBSTANTIAL: f64 = 3.0;
/// DIC gap beyond which one model is preferred.
pub const DIC_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DicScore {
    pub dic: f64,
    pub pd: f64,
    /// posterior mean deviance
    pub mean_deviance: f64,
    /// deviance at the plug-in point
    pub plugin_deviance: f64,
}

impl DicScore {
    /// Negative pD is a known DIC pathology; reported, not rejected.
    pub fn negative_pd(&self) -> bool {
        self.pd < 0.0
    }
}

/// DIC from per-draw total log-likelihoods and the log-likelihood at the plug-in point.
pub fn dic_from_logliks(logliks: &[f64], plugin_loglik: f64) -> Result<DicScore> {
    if logliks.is_empty() {
        return Err(invalid("no draws"));
    }
    let mean_deviance = -2.0 * logliks.iter().sum::<f64>() / logliks.len() as f64;
    let plugin_deviance = -2.0 * plugin_loglik;
    let pd = mean_deviance - plugin_deviance;
    Ok(DicScore {
        dic: mean_deviance + pd,
        pd,
        mean_deviance,
        plugin_deviance,
    })
}

/// DIC with the plug-in point at the sampling-scale posterior mean.
pub fn dic(draws: &PosteriorDraws, data: &Dataset) -> Result<DicScore> {
    let logliks: Vec<f64> = draws.chains().iter().flat_map(|c| c.loglik.iter().copied()).collect();
    let mean = draws.sampling_scale_mean()?;
    let plugin = cox_loglik(data, &mean.baseline, &mean.beta)?;
    dic_from_logliks(&logliks, plugin)
}

/// Log CPO per subject from per-draw pointwise log-likelihood rows:
/// `log CPO_i = -log(M^-1 sum_m exp(-l_i^m))`, evaluated by log-sum-exp.
pub fn log_cpo<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let m = rows.len();
    if m == 0 {
        return Err(invalid("no draws"));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid("pointwise rows differ in length"));
    }
    Ok((0..n)
        .map(|i| {
            let top = rows.iter().map(|r| -r[i]).fold(f64::NEG_INFINITY, f64::max);
            if top == f64::INFINITY {
                return f64::NEG_INFINITY;
            }
            let s: f64 = rows.iter().map(|r| (-r[i] - top).exp()).sum();
            -(top + (s / m as f64).ln())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpmlScore {
    pub lpml: f64,
    pub cpo: Vec<f64>,
    /// subjects whose likelihood vanished in some draw
    pub zero_likelihood: Vec<usize>,
}

pub fn lpml_from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<LpmlScore> {
    let log_cpo = log_cpo(rows)?;
    let zero_likelihood = log_cpo
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == f64::NEG_INFINITY)
        .map(|(i, _)| i)
        .collect();
    Ok(LpmlScore {
        lpml: log_cpo.iter().sum(),
        cpo: log_cpo.iter().map(|v| v.exp()).collect(),
        zero_likelihood,
    })
}

pub fn lpml(draws: &PosteriorDraws) -> Result<LpmlScore> {
    if !draws.has_pointwise() {
        return Err(invalid("draws were sampled without pointwise log-likelihoods"));
    }
    let rows = (0..draws.chain_count())
        .flat_map(|c| (0..draws.chains()[c].loglik.len()).map(move |r| (c, r)))
        .map(|(c, r)| draws.pointwise_row(c, r));
    lpml_from_rows(rows)
}

/// Pseudo Bayes factor of model 1 against model 2.
pub fn pbf(lpml1: f64, lpml2: f64) -> f64 {
    (lpml1 - lpml2).exp()
}

pub fn pbf_substantial(value: f64) -> bool {
    value > PBF_SUBSTANTIAL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DicPreference {
    First,
    Second,
    Equivalent,
}

/// Prefers the smaller DIC when the two differ by more than the threshold.
pub fn dic_rule(dic1: f64, dic2: f64) -> DicPreference {
    if (dic1 - dic2).abs() <= DIC_THRESHOLD {
        DicPreference::Equivalent
    } else if dic1 < dic2 {
        DicPreference::First
    } else {
        DicPreference::Second
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScores {
    pub dic: f64,
    pub pd: f64,
    pub lpml: f64,
    pub cpo: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn score(draws: &PosteriorDraws, data: &Dataset) -> Result<SelectionScores> {
    let d = dic(draws, data)?;
    let l = lpml(draws)?;
    let mut warnings = Vec::new();
    if d.negative_pd() {
        warnings.push(format!("negative pD ({})", d.pd));
    }
    if !l.zero_likelihood.is_empty() {
        warnings.push(format!(
            "{} subjects with zero likelihood in some draw",
            l.zero_likelihood.len()
        ));
    }
    Ok(SelectionScores {
        dic: d.dic,
        pd: d.pd,
        lpml: l.lpml,
        cpo: l.cpo,
        warnings,
    })
}
