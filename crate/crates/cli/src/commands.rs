//! The five batch commands. Each returns the paths it wrote.

use std::path::{Path, PathBuf};

use bayes_cox::sampler::{run, Thresholds};
use bayes_cox::selection::{dic_rule, pbf, pbf_substantial, score, DicPreference};
use bayes_cox::simulate::{generate_dataset, ScenarioSpec};
use bayes_cox::study::{
    evaluation_grid, parse_models, posterior_curves, quantile, replicate as run_study, Curve, GRID_STEP,
};
use bayes_cox::{KnotGrid, ModelSpec, PosteriorDraws};

use crate::args::{CompareArgs, CurvesArgs, FitArgs, McmcArgs, ReplicateArgs, SimulateArgs};
use crate::config::{build_prior, resolve_mcmc, resolve_model, FileConfig, McmcSection, PriorSection};
use crate::error::{input, CliError, CliResult};
use crate::io::{
    dataset_to_csv, draws_to_csv, finite_or_na, join_floats, parse_draws, read_dataset, read_text, write_atomic,
    KeyValueWriter, KeyValues,
};

pub const CURVES_HEADER: &str =
    "time,loghazard_mean,loghazard_lower,loghazard_upper,survival_mean,survival_lower,survival_upper";
pub const METRICS_HEADER: &str = "model,N,K,average,bias,se,sd,cp,rmsd";
pub const COMPARE_HEADER: &str = "model,dic,pd,lpml,pbf,pbf_substantial,dic_vs_best";

/// Grid points used by `curves` when no step is given.
pub const DEFAULT_CURVE_POINTS: f64 = 500.0;

fn apply_mcmc_flags(section: &mut McmcSection, flags: &McmcArgs) {
    if flags.preset.is_some() {
        section.preset.clone_from(&flags.preset);
    }
    if flags.chains.is_some() {
        section.chains = flags.chains;
    }
    if flags.iter.is_some() {
        section.iterations = flags.iter;
    }
    if flags.burnin.is_some() {
        section.burn_in = flags.burnin;
    }
    if flags.thin.is_some() {
        section.thin = flags.thin;
    }
    if flags.seed.is_some() {
        section.seed = flags.seed;
    }
}

fn thresholds(section: &McmcSection) -> Thresholds {
    let d = Thresholds::default();
    Thresholds {
        rhat_max: section.rhat_max.unwrap_or(d.rhat_max),
        ess_min: section.ess_min.unwrap_or(d.ess_min),
    }
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    let spec = ScenarioSpec::reference(args.scenario, args.n, args.replicas, args.seed)?;
    if args.replicas == 0 {
        return Err(input("at least one replica required"));
    }
    let mut written = Vec::with_capacity(args.replicas + 1);
    for r in 0..args.replicas {
        let data = generate_dataset(&spec, r)?;
        let path = args.out.join(replica_file_name(r));
        write_atomic(&path, dataset_to_csv(&data).as_bytes())?;
        written.push(path);
    }
    let mut m = KeyValueWriter::default();
    m.put("scenario", args.scenario);
    m.put("n", args.n);
    m.put("replicas", args.replicas);
    m.put("seed", args.seed);
    m.put("beta", spec.beta);
    m.put("censor_quantile", spec.censor_quantile);
    m.put("censoring_time", spec.censoring_time()?);
    for (name, value) in spec.baseline.parameters() {
        m.put(&format!("true.{name}"), value);
    }
    let path = args.out.join("manifest.txt");
    write_atomic(&path, m.finish().as_bytes())?;
    written.push(path);
    Ok(written)
}

/// `replica_001.csv` for replica index 0.
pub fn replica_file_name(replica: usize) -> String {
    format!("replica_{:03}.csv", replica + 1)
}

fn model_label(spec: &ModelSpec, prior_label: &str) -> String {
    match spec.grid() {
        Some(g) => format!("{prior_label}:{}", g.intervals()),
        None => prior_label.to_string(),
    }
}

/// Runs the sampler and writes `draws.csv` and `summary.txt` into `args.out`.
/// A failed convergence check still writes both files, then returns
/// [`CliError::Convergence`].
pub fn fit(args: &FitArgs) -> CliResult<Vec<PathBuf>> {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    if args.model.is_some() {
        cfg.model.family.clone_from(&args.model);
    }
    if args.prior.is_some() {
        cfg.model.prior.clone_from(&args.prior);
    }
    if args.knots.is_some() {
        cfg.model.knots = args.knots;
    }
    if args.t_max.is_some() {
        cfg.model.t_max = args.t_max;
    }
    apply_mcmc_flags(&mut cfg.mcmc, &args.mcmc);
    let mut mcmc = resolve_mcmc(&cfg.mcmc, "real")?;
    mcmc.store_pointwise = true;

    let data = read_dataset(&args.data)?;
    let model = resolve_model(&cfg.model, &cfg.prior, &data)?;
    let draws = run(&data, &model.prior, &model.spec, &mcmc)?;
    let scores = score(&draws, &data)?;
    let report = draws.convergence(&thresholds(&cfg.mcmc));

    let prior_label = model.prior.baseline.label();
    let mut s = KeyValueWriter::default();
    s.put("label", model_label(&model.spec, prior_label));
    s.put("model", model.spec.family().label());
    s.put("prior", prior_label);
    if let Some(g) = model.spec.grid() {
        s.put("k", g.intervals());
        s.put("knots", join_floats(g.knots()));
    }
    s.put("t_max", model.t_max);
    s.put("data", args.data.display());
    s.put("covariates", data.covariate_names().join(","));
    s.put("parameters", draws.names().join(","));
    s.put("subjects", data.len());
    s.put("events", data.event_count());
    s.put("chains", mcmc.chains);
    s.put("iterations", mcmc.iterations);
    s.put("burn_in", mcmc.burn_in);
    s.put("thin", mcmc.thin);
    s.put("seed", mcmc.seed);
    s.put("adapt_window", mcmc.adapt_window);
    s.put("draws", draws.total_rows());
    s.put("dic", scores.dic);
    s.put("pd", scores.pd);
    s.put("lpml", scores.lpml);
    s.put("converged", report.passed());
    if !report.passed() {
        s.put("failed", report.failures().join(","));
    }
    if !scores.warnings.is_empty() {
        s.put("warnings", scores.warnings.join("; "));
    }
    for (j, diag) in report.parameters.iter().enumerate() {
        let mut v = draws.column(j).concat();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        v.sort_by(f64::total_cmp);
        let name = &diag.name;
        s.put(&format!("mean[{name}]"), mean);
        s.put(&format!("sd[{name}]"), sd);
        s.put(&format!("lower[{name}]"), quantile(&v, 0.025));
        s.put(&format!("upper[{name}]"), quantile(&v, 0.975));
        s.put(
            &format!("rhat[{name}]"),
            diag.rhat.map_or("NA".into(), |r| r.to_string()),
        );
        s.put(&format!("ess[{name}]"), diag.ess);
        let acc: f64 = draws.chains().iter().map(|c| c.acceptance[j]).sum::<f64>() / draws.chain_count() as f64;
        s.put(&format!("acceptance[{name}]"), acc);
    }
    for cov in data.covariate_names() {
        let mut hr: Vec<f64> = draws
            .pooled(&format!("beta[{cov}]"))?
            .into_iter()
            .map(f64::exp)
            .collect();
        let mean = hr.iter().sum::<f64>() / hr.len() as f64;
        hr.sort_by(f64::total_cmp);
        s.put(&format!("hr[{cov}]"), mean);
        s.put(&format!("hr_lower[{cov}]"), quantile(&hr, 0.025));
        s.put(&format!("hr_upper[{cov}]"), quantile(&hr, 0.975));
    }

    let draws_path = args.out.join("draws.csv");
    let summary_path = args.out.join("summary.txt");
    write_atomic(&draws_path, draws_to_csv(&draws).as_bytes())?;
    write_atomic(&summary_path, s.finish().as_bytes())?;
    if !report.passed() {
        return Err(CliError::Convergence(format!(
            "parameters failing R-hat/ESS thresholds: {} (outputs written to {})",
            report.failures().join(", "),
            args.out.display()
        )));
    }
    Ok(vec![draws_path, summary_path])
}

struct Scored {
    label: String,
    dic: f64,
    pd: f64,
    lpml: f64,
}

/// Writes the comparison table and returns the preference lines.
pub fn compare(args: &CompareArgs) -> CliResult<Vec<String>> {
    let mut models: Vec<Scored> = Vec::with_capacity(args.summaries.len());
    for path in &args.summaries {
        let kv = KeyValues::read(path)?;
        let mut label = kv.get("label")?.to_string();
        if models.iter().any(|m| m.label == label) {
            label = format!("{label}@{}", path.display());
        }
        models.push(Scored {
            label,
            dic: kv.number("dic")?,
            pd: kv.number("pd")?,
            lpml: kv.number("lpml")?,
        });
    }
    let best_lpml = (0..models.len())
        .max_by(|&a, &b| models[a].lpml.total_cmp(&models[b].lpml))
        .unwrap_or(0);
    let best_dic = (0..models.len())
        .min_by(|&a, &b| models[a].dic.total_cmp(&models[b].dic))
        .unwrap_or(0);

    let mut table = format!("{COMPARE_HEADER}\n");
    let mut lines = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let factor = pbf(models[best_lpml].lpml, m.lpml);
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.label,
            m.dic,
            m.pd,
            m.lpml,
            factor,
            pbf_substantial(factor),
            m.dic - models[best_dic].dic
        ));
        if i != best_lpml {
            lines.push(format!(
                "PBF {} vs {} = {}{}",
                models[best_lpml].label,
                m.label,
                factor,
                if pbf_substantial(factor) { " (substantial)" } else { "" }
            ));
        }
        if i != best_dic {
            let best = &models[best_dic];
            let gap = m.dic - best.dic;
            lines.push(match dic_rule(best.dic, m.dic) {
                DicPreference::First => format!("DIC prefers {} over {} (difference {gap})", best.label, m.label),
                _ => format!("DIC: {} and {} are equivalent (difference {gap})", best.label, m.label),
            });
        }
    }
    write_atomic(&args.out, table.as_bytes())?;
    Ok(lines)
}

/// Rebuilds posterior draws from a draws file and its summary.
pub fn load_fit(draws_path: &Path, summary: &KeyValues) -> CliResult<PosteriorDraws> {
    let family = summary.get("model")?;
    let prior_label = summary.get("prior")?;
    let spec = match family {
        "we" => ModelSpec::Weibull,
        "pc" | "ps" => {
            let knots = crate::io::parse_floats(summary.get("knots")?)?;
            let grid = KnotGrid::from_knots(knots)?;
            if family == "pc" {
                ModelSpec::PiecewiseConstant(grid)
            } else {
                ModelSpec::BSpline(grid)
            }
        }
        other => return Err(input(format!("unknown model family '{other}' in summary"))),
    };
    // hyperparameters do not enter the curves; the scenario label fixes the layout
    let prior = build_prior(prior_label, &PriorSection::default(), Some(1.0))?;
    let covariates: Vec<String> = summary
        .get("covariates")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let names = bayes_cox::sampler::parameter_names(&spec, &covariates, &prior.baseline);
    let chains = parse_draws(&read_text(draws_path)?, &names, draws_path)?;
    Ok(PosteriorDraws::from_chains(spec, prior, &covariates, 0, chains)?)
}

pub fn curves(args: &CurvesArgs) -> CliResult<Vec<PathBuf>> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let summary_path = match &args.summary {
        Some(p) => p.clone(),
        None => args
            .draws
            .parent()
            .map_or_else(|| PathBuf::from("summary.txt"), |d| d.join("summary.txt")),
    };
    let summary = KeyValues::read(&summary_path)?;
    let draws = load_fit(&args.draws, &summary)?;
    let fitted_end = match draws.spec().grid() {
        Some(g) => g.boundary_high(),
        None => summary.number("t_max")?,
    };
    let t_max = args.t_max.unwrap_or(fitted_end);
    if let Some(g) = draws.spec().grid() {
        if t_max > g.boundary_high() {
            return Err(input(format!(
                "grid end {t_max} is beyond the last knot {}",
                g.boundary_high()
            )));
        }
    }
    let step = args.step.or(cfg.curves.step).unwrap_or(t_max / DEFAULT_CURVE_POINTS);
    let mut times = vec![0.0];
    times.extend(evaluation_grid(t_max, step)?.into_iter().map(|t| t.min(t_max)));
    let lh = posterior_curves(&draws, &times, Curve::LogHazard)?;
    let sv = posterior_curves(&draws, &times, Curve::Survival)?;
    let mut out = format!("{CURVES_HEADER}\n");
    for (j, t) in times.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t,
            finite_or_na(lh.mean[j]),
            finite_or_na(lh.lower[j]),
            finite_or_na(lh.upper[j]),
            sv.mean[j],
            sv.lower[j],
            sv.upper[j]
        ));
    }
    write_atomic(&args.out, out.as_bytes())?;
    Ok(vec![args.out.clone()])
}

pub fn replicate(args: &ReplicateArgs) -> CliResult<Vec<PathBuf>> {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    apply_mcmc_flags(&mut cfg.mcmc, &args.mcmc);
    let mcmc = resolve_mcmc(&cfg.mcmc, "simulation")?;
    let models = parse_models(&args.models)?;
    let scenario = ScenarioSpec::reference(args.scenario, args.n, args.replicas, mcmc.seed)?;
    let step = args.step.or(cfg.curves.step).unwrap_or(GRID_STEP);
    let rows = run_study(&scenario, &models, &mcmc, step)?;
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        let k = r.model.intervals().map_or("NA".to_string(), |k| k.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.model.label(),
            r.n,
            k,
            r.beta.average,
            r.beta.bias,
            r.beta.se,
            r.beta.sd,
            r.beta.cp,
            r.rmsd
        ));
    }
    write_atomic(&args.out, out.as_bytes())?;
    Ok(vec![args.out.clone()])
}
