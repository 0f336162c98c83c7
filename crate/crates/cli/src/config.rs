//! Run configuration: a TOML file with `[model]`, `[mcmc]`, `[prior]` and
//! `[curves]` sections, overridden field by field by command-line flags.

use std::path::Path;

use bayes_cox::inference::Family;
use bayes_cox::{
    BaselinePrior, BetaPrior, Dataset, GammaPrior, KnotGrid, McmcConfig, ModelSpec, PriorScenario, SigmaHyperprior,
};
use serde::Deserialize;

use crate::error::{input, CliResult};
use crate::io::read_text;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub curves: CurvesSection,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `we`, `pc` or `ps`
    pub family: Option<String>,
    /// `we`, `pc1`..`pc4`, `ps1`..`ps3`
    pub prior: Option<String>,
    pub knots: Option<usize>,
    /// right end of the knot grid; defaults to the largest observed time
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    /// `real` or `simulation`
    pub preset: Option<String>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub adapt_window: Option<usize>,
    pub rhat_max: Option<f64>,
    pub ess_min: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub beta_sd: Option<f64>,
    pub alpha_shape: Option<f64>,
    pub alpha_rate: Option<f64>,
    pub lambda_shape: Option<f64>,
    pub lambda_rate: Option<f64>,
    /// PC1 shape, PC3 martingale shape
    pub eta: Option<f64>,
    /// PC1 rate
    pub psi: Option<f64>,
    pub w0: Option<f64>,
    /// PC2 prior guess of the hazard level; defaults to the median rule
    pub eta0: Option<f64>,
    pub first_shape: Option<f64>,
    pub first_rate: Option<f64>,
    /// PS1 coefficient standard deviation
    pub sd: Option<f64>,
    pub anchor_sd: Option<f64>,
    /// `uniform` (sd ~ U(0, sigma_upper)) or `gamma` (precision ~ Ga)
    pub sigma_hyperprior: Option<String>,
    pub sigma_upper: Option<f64>,
    pub precision_shape: Option<f64>,
    pub precision_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CurvesSection {
    pub step: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| input(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::parse(&read_text(p)?).map_err(|e| input(format!("{}: {e}", p.display()))),
            None => Ok(Self::default()),
        }
    }
}

/// MCMC settings from a named preset with per-field overrides.
pub fn resolve_mcmc(section: &McmcSection, default_preset: &str) -> CliResult<McmcConfig> {
    let preset = section.preset.as_deref().unwrap_or(default_preset);
    let mut cfg = match preset {
        "real" => McmcConfig::real_data(),
        "simulation" => McmcConfig::simulation(),
        other => return Err(input(format!("unknown MCMC preset '{other}' (real|simulation)"))),
    };
    if let Some(v) = section.chains {
        cfg.chains = v;
    }
    if let Some(v) = section.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = section.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = section.thin {
        cfg.thin = v;
    }
    if let Some(v) = section.seed {
        cfg.seed = v;
    }
    if let Some(v) = section.adapt_window {
        cfg.adapt_window = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_family(s: &str) -> CliResult<Family> {
    match s.trim().to_ascii_lowercase().as_str() {
        "we" | "weibull" => Ok(Family::Weibull),
        "pc" => Ok(Family::PiecewiseConstant),
        "ps" => Ok(Family::BSpline),
        other => Err(input(format!("unknown model family '{other}' (we|pc|ps)"))),
    }
}

fn family_of_prior(label: &str) -> CliResult<Family> {
    match label {
        "we" => Ok(Family::Weibull),
        "pc1" | "pc2" | "pc3" | "pc4" => Ok(Family::PiecewiseConstant),
        "ps1" | "ps2" | "ps3" => Ok(Family::BSpline),
        other => Err(input(format!("unknown prior scenario '{other}'"))),
    }
}

fn sigma_hyperprior(p: &PriorSection) -> CliResult<SigmaHyperprior> {
    let default = SigmaHyperprior::default();
    match p.sigma_hyperprior.as_deref().unwrap_or("uniform") {
        "uniform" => {
            let SigmaHyperprior::UniformSd { upper } = default else {
                unreachable!()
            };
            Ok(SigmaHyperprior::UniformSd {
                upper: p.sigma_upper.unwrap_or(upper),
            })
        }
        "gamma" => Ok(SigmaHyperprior::GammaPrecision {
            shape: p.precision_shape.unwrap_or(1.0),
            rate: p.precision_rate.unwrap_or(0.0005),
        }),
        other => Err(input(format!("unknown sigma hyperprior '{other}' (uniform|gamma)"))),
    }
}

/// Prior scenario `label` with defaults replaced by any values in `p`.
/// `median_time` feeds the PC2 median rule when `eta0` is not given.
pub fn build_prior(label: &str, p: &PriorSection, median_time: Option<f64>) -> CliResult<PriorScenario> {
    let baseline = match label {
        "we" => {
            let BaselinePrior::Weibull { alpha, lambda } = BaselinePrior::weibull() else {
                unreachable!()
            };
            BaselinePrior::Weibull {
                alpha: GammaPrior::new(p.alpha_shape.unwrap_or(alpha.shape), p.alpha_rate.unwrap_or(alpha.rate)),
                lambda: GammaPrior::new(
                    p.lambda_shape.unwrap_or(lambda.shape),
                    p.lambda_rate.unwrap_or(lambda.rate),
                ),
            }
        }
        "pc1" => {
            let BaselinePrior::Pc1 { eta, psi } = BaselinePrior::pc1() else {
                unreachable!()
            };
            BaselinePrior::Pc1 {
                eta: p.eta.unwrap_or(eta),
                psi: p.psi.unwrap_or(psi),
            }
        }
        "pc2" => {
            let eta0 = match (p.eta0, median_time) {
                (Some(v), _) => v,
                (None, Some(m)) => bayes_cox::inference::pc2_eta0_from_median(m),
                (None, None) => {
                    return Err(input(
                        "median survival not reached; set prior.eta0 for the pc2 scenario",
                    ))
                }
            };
            let BaselinePrior::Pc2 { w0, .. } = BaselinePrior::pc2(1.0) else {
                unreachable!()
            };
            BaselinePrior::Pc2 {
                w0: p.w0.unwrap_or(w0),
                eta0,
            }
        }
        "pc3" => {
            let BaselinePrior::Pc3 { eta, first } = BaselinePrior::pc3() else {
                unreachable!()
            };
            BaselinePrior::Pc3 {
                eta: p.eta.unwrap_or(eta),
                first: GammaPrior::new(p.first_shape.unwrap_or(first.shape), p.first_rate.unwrap_or(first.rate)),
            }
        }
        "pc4" => BaselinePrior::Pc4 {
            sigma: sigma_hyperprior(p)?,
        },
        "ps1" => {
            let BaselinePrior::Ps1 { sd } = BaselinePrior::ps1() else {
                unreachable!()
            };
            BaselinePrior::Ps1 { sd: p.sd.unwrap_or(sd) }
        }
        "ps2" => BaselinePrior::Ps2 {
            sigma: sigma_hyperprior(p)?,
        },
        "ps3" => {
            let BaselinePrior::Ps3 { anchor_sd, .. } = BaselinePrior::ps3() else {
                unreachable!()
            };
            BaselinePrior::Ps3 {
                sigma: sigma_hyperprior(p)?,
                anchor_sd: p.anchor_sd.unwrap_or(anchor_sd),
            }
        }
        other => return Err(input(format!("unknown prior scenario '{other}'"))),
    };
    let mut prior = PriorScenario::new(baseline);
    if let Some(sd) = p.beta_sd {
        prior.beta = BetaPrior { sd };
    }
    prior.validate()?;
    Ok(prior)
}

/// Fully resolved model: family, knot grid and prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedModel {
    pub spec: ModelSpec,
    pub prior: PriorScenario,
    /// end of the grid or, for Weibull, of the observed follow-up
    pub t_max: f64,
}

/// Combines the model section with the prior section for `data`.
///
/// The family may be omitted when the prior label implies it; the prior
/// defaults to `we`, `pc1` or `ps1` for the family. `pc`/`ps` need `knots`.
pub fn resolve_model(model: &ModelSection, prior: &PriorSection, data: &Dataset) -> CliResult<ResolvedModel> {
    let family = match (&model.family, &model.prior) {
        (Some(f), _) => parse_family(f)?,
        (None, Some(p)) => family_of_prior(p)?,
        (None, None) => return Err(input("no model given; use --model we|pc|ps")),
    };
    let label = model.prior.clone().unwrap_or_else(|| match family {
        Family::Weibull => "we".into(),
        Family::PiecewiseConstant => "pc1".into(),
        Family::BSpline => "ps1".into(),
    });
    if family_of_prior(&label)? != family {
        return Err(input(format!(
            "prior scenario {label} does not apply to the {} model",
            family.label()
        )));
    }
    let max_time = data.max_time().ok_or_else(|| input("dataset has no records"))?;
    let t_max = model.t_max.unwrap_or(max_time);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(input(format!("t_max must be positive, got {t_max}")));
    }
    if family != Family::Weibull && t_max < max_time {
        return Err(input(format!(
            "t_max {t_max} is before the largest observed time {max_time}"
        )));
    }
    let grid = |k: Option<usize>| -> CliResult<KnotGrid> {
        let k = k.ok_or_else(|| input("pc and ps models need --knots K (K >= 1)"))?;
        Ok(KnotGrid::build_equal(t_max, k)?)
    };
    let spec = match family {
        Family::Weibull => ModelSpec::Weibull,
        Family::PiecewiseConstant => ModelSpec::PiecewiseConstant(grid(model.knots)?),
        Family::BSpline => ModelSpec::BSpline(grid(model.knots)?),
    };
    let prior = build_prior(&label, prior, data.reference_median_time())?;
    spec.check_prior(&prior)?;
    Ok(ResolvedModel { spec, prior, t_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bayes_cox::SurvivalRecord;

    fn data() -> Dataset {
        let recs = (1..=10)
            .map(|i| SurvivalRecord::new(i as f64 / 5.0, i % 3 != 0, vec![f64::from(i % 2)]))
            .collect();
        Dataset::new(recs, vec!["x".into()]).unwrap()
    }

    #[test]
    fn parses_all_sections() {
        let cfg = FileConfig::parse(
            "[model]\nfamily = \"pc\"\nprior = \"pc4\"\nknots = 5\n\n[mcmc]\npreset = \"simulation\"\nthin = 2\n\n[prior]\nsigma_upper = 4.0\n\n[curves]\nstep = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.model.knots, Some(5));
        assert_eq!(cfg.curves.step, Some(0.05));
        let mcmc = resolve_mcmc(&cfg.mcmc, "real").unwrap();
        assert_eq!((mcmc.iterations, mcmc.thin), (22_000, 2));
        let m = resolve_model(&cfg.model, &cfg.prior, &data()).unwrap();
        assert_eq!(
            m.prior.baseline,
            BaselinePrior::Pc4 {
                sigma: SigmaHyperprior::UniformSd { upper: 4.0 }
            }
        );
        assert_eq!(m.spec.grid().unwrap().intervals(), 5);
        assert_eq!(m.t_max, 2.0);
    }

    #[test]
    fn rejects_unknown_keys_and_mismatches() {
        assert!(FileConfig::parse("[model]\nfamly = \"pc\"\n").is_err());
        let model = ModelSection {
            family: Some("we".into()),
            prior: Some("ps2".into()),
            ..Default::default()
        };
        assert!(resolve_model(&model, &PriorSection::default(), &data()).is_err());
        let no_k = ModelSection {
            family: Some("ps".into()),
            ..Default::default()
        };
        assert!(resolve_model(&no_k, &PriorSection::default(), &data()).is_err());
        assert!(resolve_mcmc(
            &McmcSection {
                preset: Some("fast".into()),
                ..Default::default()
            },
            "real"
        )
        .is_err());
    }

    #[test]
    fn defaults_match_library() {
        let p = PriorSection::default();
        for (label, expected) in [
            ("we", BaselinePrior::weibull()),
            ("pc1", BaselinePrior::pc1()),
            ("pc3", BaselinePrior::pc3()),
            ("pc4", BaselinePrior::pc4()),
            ("ps1", BaselinePrior::ps1()),
            ("ps2", BaselinePrior::ps2()),
            ("ps3", BaselinePrior::ps3()),
        ] {
            assert_eq!(build_prior(label, &p, None).unwrap().baseline, expected);
        }
        assert_eq!(
            build_prior("pc2", &p, Some(2.0)).unwrap().baseline,
            BaselinePrior::pc2(2.0)
        );
        assert!(build_prior("pc2", &p, None).is_err());
        let gamma = PriorSection {
            sigma_hyperprior: Some("gamma".into()),
            ..Default::default()
        };
        assert_eq!(
            build_prior("ps2", &gamma, None).unwrap().baseline,
            BaselinePrior::Ps2 {
                sigma: SigmaHyperprior::GammaPrecision {
                    shape: 1.0,
                    rate: 0.0005
                }
            }
        );
    }
}
