mod common;

use bayes_cox::inference::{BaselinePrior, GammaPrior, ModelSpec, PriorScenario, SigmaHyperprior};
use bayes_cox::sampler::{ess, run, McmcConfig, PosteriorDraws};
use bayes_cox::{Dataset, KnotGrid, SurvivalRecord};
use common::{mean, variance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(chains: usize, iterations: usize, seed: u64) -> McmcConfig {
    McmcConfig {
        chains,
        iterations,
        burn_in: iterations / 10,
        thin: 1,
        seed,
        adapt_window: 50,
        store_pointwise: false,
    }
}

/// Per-chain series after applying `f` to one parameter.
fn series(draws: &PosteriorDraws, name: &str, f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    draws
        .parameter(name)
        .unwrap()
        .into_iter()
        .map(|c| c.into_iter().map(&f).collect())
        .collect()
}

/// Mean of the pooled series and its Monte Carlo standard error.
fn mean_and_mcse(chains: &[Vec<f64>]) -> (f64, f64) {
    let pooled = chains.concat();
    let sd = variance(&pooled).sqrt();
    (mean(&pooled), sd / ess(chains).unwrap().sqrt())
}

fn variance_and_mcse(chains: &[Vec<f64>]) -> (f64, f64) {
    let m = mean(&chains.concat());
    let sq: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| c.iter().map(|x| (x - m).powi(2)).collect())
        .collect();
    mean_and_mcse(&sq)
}

fn assert_within_3_mcse(draws: &PosteriorDraws, name: &str, f: impl Fn(f64) -> f64, expected: f64) {
    let s = series(draws, name, f);
    let (m, se) = mean_and_mcse(&s);
    assert!(
        (m - expected).abs() <= 3.0 * se,
        "{name}: mean {m}, expected {expected}, mcse {se}"
    );
}

fn identity(x: f64) -> f64 {
    x
}

#[test]
fn pc1_default_prior_recovered_on_one_interval() {
    let spec = ModelSpec::PiecewiseConstant(KnotGrid::build_equal(1.0, 1).unwrap());
    let prior = PriorScenario::new(BaselinePrior::pc1());
    let draws = run(&Dataset::empty(vec![]), &prior, &spec, &config(4, 250_000, 11)).unwrap();
    let phi = series(&draws, "phi[1]", identity);
    let (m, se) = mean_and_mcse(&phi);
    assert!((m - 1.0).abs() <= 3.0 * se, "mean {m} mcse {se}");
    let (v, vse) = variance_and_mcse(&phi);
    assert!((v - 100.0).abs() <= 3.0 * vse, "variance {v} mcse {vse}");
}

#[test]
fn conjugate_gamma_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let recs: Vec<SurvivalRecord> = (0..80)
        .map(|_| {
            let t: f64 = -rng.random::<f64>().ln() / 1.7;
            if t > 1.0 {
                SurvivalRecord::new(1.0, false, vec![])
            } else {
                SurvivalRecord::new(t, true, vec![])
            }
        })
        .collect();
    let data = Dataset::new(recs, vec![]).unwrap();
    let (eta, psi) = (0.01, 0.01);
    let shape = eta + data.event_count() as f64;
    let rate = psi + data.total_time();
    let spec = ModelSpec::PiecewiseConstant(KnotGrid::build_equal(1.0, 1).unwrap());
    let prior = PriorScenario::new(BaselinePrior::Pc1 { eta, psi });
    let draws = run(&data, &prior, &spec, &config(4, 60_000, 8)).unwrap();
    let phi = draws.pooled("phi[1]").unwrap();
    let (m, v) = (mean(&phi), variance(&phi));
    let (tm, tv) = (shape / rate, shape / (rate * rate));
    assert!((m / tm - 1.0).abs() <= 0.02, "mean {m} vs {tm}");
    assert!((v / tv - 1.0).abs() <= 0.02, "variance {v} vs {tv}");
}

fn empty_with_covariate() -> Dataset {
    Dataset::empty(vec!["x".into()])
}

fn grid() -> KnotGrid {
    KnotGrid::build_equal(3.0, 3).unwrap()
}

fn recover(spec: ModelSpec, prior: BaselinePrior, seed: u64) -> PosteriorDraws {
    let draws = run(
        &empty_with_covariate(),
        &PriorScenario::new(prior),
        &spec,
        &config(4, 100_000, seed),
    )
    .unwrap();
    assert_within_3_mcse(&draws, "beta[x]", identity, 0.0);
    draws
}

#[test]
fn prior_recovery_weibull() {
    let prior = BaselinePrior::Weibull {
        alpha: GammaPrior::new(3.0, 2.0),
        lambda: GammaPrior::new(2.0, 4.0),
    };
    let d = recover(ModelSpec::Weibull, prior, 21);
    assert_within_3_mcse(&d, "alpha", identity, 1.5);
    assert_within_3_mcse(&d, "lambda", identity, 0.5);
}

#[test]
fn prior_recovery_pc1() {
    let prior = BaselinePrior::Pc1 { eta: 3.0, psi: 2.0 };
    let d = recover(ModelSpec::PiecewiseConstant(grid()), prior, 22);
    for k in 1..=3 {
        assert_within_3_mcse(&d, &format!("phi[{k}]"), identity, 1.5);
    }
}

#[test]
fn prior_recovery_pc2() {
    // unit-width intervals: Ga(w0 eta0, w0)
    let prior = BaselinePrior::Pc2 { w0: 2.0, eta0: 1.5 };
    let d = recover(ModelSpec::PiecewiseConstant(grid()), prior, 23);
    for k in 1..=3 {
        assert_within_3_mcse(&d, &format!("phi[{k}]"), identity, 1.5);
    }
}

#[test]
fn prior_recovery_pc3() {
    let prior = BaselinePrior::Pc3 {
        eta: 8.0,
        first: GammaPrior::new(4.0, 4.0),
    };
    let d = recover(ModelSpec::PiecewiseConstant(grid()), prior, 24);
    for k in 1..=3 {
        assert_within_3_mcse(&d, &format!("phi[{k}]"), identity, 1.0);
    }
}

#[test]
fn prior_recovery_pc4() {
    let prior = BaselinePrior::Pc4 {
        sigma: SigmaHyperprior::UniformSd { upper: 2.0 },
    };
    let d = recover(ModelSpec::PiecewiseConstant(grid()), prior, 25);
    for k in 1..=3 {
        assert_within_3_mcse(&d, &format!("phi[{k}]"), f64::ln, 0.0);
    }
    assert_within_3_mcse(&d, "sigma", identity, 1.0);
}

#[test]
fn prior_recovery_ps1() {
    let d = recover(ModelSpec::BSpline(grid()), BaselinePrior::Ps1 { sd: 2.0 }, 26);
    for k in 1..=6 {
        assert_within_3_mcse(&d, &format!("gamma[{k}]"), identity, 0.0);
    }
}

#[test]
fn prior_recovery_ps2() {
    let prior = BaselinePrior::Ps2 {
        sigma: SigmaHyperprior::UniformSd { upper: 2.0 },
    };
    let d = recover(ModelSpec::BSpline(grid()), prior, 27);
    for k in 1..=6 {
        assert_within_3_mcse(&d, &format!("gamma[{k}]"), identity, 0.0);
    }
    assert_within_3_mcse(&d, "sigma", identity, 1.0);
}

#[test]
fn prior_recovery_ps3() {
    let prior = BaselinePrior::Ps3 {
        sigma: SigmaHyperprior::UniformSd { upper: 2.0 },
        anchor_sd: 2.0,
    };
    let d = recover(ModelSpec::BSpline(grid()), prior, 28);
    for k in 1..=6 {
        assert_within_3_mcse(&d, &format!("gamma[{k}]"), identity, 0.0);
    }
    assert_within_3_mcse(&d, "sigma", identity, 1.0);
}

#[test]
fn gamma_precision_hyperprior_recovered() {
    // precision ~ Ga(4, 4): E[sigma] = E[tau^-1/2] = Gamma(3.5) / Gamma(4) * 2
    let prior = BaselinePrior::Ps2 {
        sigma: SigmaHyperprior::GammaPrecision { shape: 4.0, rate: 4.0 },
    };
    let d = recover(ModelSpec::BSpline(KnotGrid::build_equal(1.0, 1).unwrap()), prior, 29);
    let expected = statrs::function::gamma::gamma(3.5) / statrs::function::gamma::gamma(4.0) * 2.0;
    assert_within_3_mcse(&d, "sigma", identity, expected);
}

fn fitted(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let recs = (0..40)
        .map(|_| {
            let x = f64::from(u8::from(rng.random_bool(0.5)));
            SurvivalRecord::new(rng.random_range(0.05..2.0), rng.random_bool(0.7), vec![x])
        })
        .collect();
    let data = Dataset::new(recs, vec!["x".into()]).unwrap();
    let spec = ModelSpec::BSpline(KnotGrid::build_equal(2.0, 4).unwrap());
    let prior = PriorScenario::new(BaselinePrior::ps3());
    let mut cfg = config(3, 2_000, seed);
    cfg.thin = 3;
    cfg.store_pointwise = true;
    let d = run(&data, &prior, &spec, &cfg).unwrap();
    let mut out = String::new();
    for (c, ch) in d.chains().iter().enumerate() {
        for r in 0..ch.loglik.len() {
            out.push_str(&format!("{c},{:?},{}\n", d.row(c, r), ch.loglik[r]));
        }
        out.push_str(&format!("{:?}\n", ch.pointwise));
    }
    out
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let a = fitted(4);
    assert_eq!(a, fitted(4));
    assert_ne!(a, fitted(5));
}
