//! Right-censored Cox data by inversion of the baseline cumulative hazard.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;

use crate::baseline::{BaselineModel, PiecewiseConstantBaseline, WeibullBaseline};
use crate::data::{Dataset, SurvivalRecord};
use crate::error::{domain, invalid, Result};
use crate::roots::brent;
use crate::splines::KnotGrid;

/// Absolute tolerance in time for root-finding inversions.
pub const TIME_TOL: f64 = 1e-10;

/// Two-component Weibull mixture on the survival scale,
/// `S(t) = p exp(-λ1 t^α1) + (1-p) exp(-λ2 t^α2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullMixture {
    pub alpha1: f64,
    pub alpha2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
}

impl WeibullMixture {
    pub fn new(alpha1: f64, alpha2: f64, lambda1: f64, lambda2: f64, p: f64) -> Result<Self> {
        let ok = [alpha1, alpha2, lambda1, lambda2]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !ok {
            return Err(invalid("mixture shapes and scales must be positive"));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid(format!("mixing probability must lie in (0, 1], got {p}")));
        }
        Ok(Self {
            alpha1,
            alpha2,
            lambda1,
            lambda2,
            p,
        })
    }

    fn components(&self, t: f64) -> (f64, f64) {
        (
            self.p * (-self.lambda1 * t.powf(self.alpha1)).exp(),
            (1.0 - self.p) * (-self.lambda2 * t.powf(self.alpha2)).exp(),
        )
    }

    pub fn survival(&self, t: f64) -> f64 {
        let (a, b) = self.components(t);
        a + b
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        -self.survival(t).ln()
    }

    pub fn hazard(&self, t: f64) -> f64 {
        let (a, b) = self.components(t);
        let f1 = self.lambda1 * self.alpha1 * t.powf(self.alpha1 - 1.0);
        let f2 = self.lambda2 * self.alpha2 * t.powf(self.alpha2 - 1.0);
        (f1 * a + f2 * b) / (a + b)
    }
}

/// Data-generating baseline hazard.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueBaseline {
    Model(BaselineModel),
    Mixture(WeibullMixture),
}

impl TrueBaseline {
    /// `H0(t)`; piecewise and spline baselines keep their last hazard value past `cK`.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("time must be non-negative, got {t}")));
        }
        match self {
            TrueBaseline::Mixture(m) => Ok(m.cumulative_hazard(t)),
            TrueBaseline::Model(BaselineModel::PiecewiseConstant(p)) => Ok(p.cumulative_extended(t)),
            TrueBaseline::Model(b @ BaselineModel::BSplineLog(s)) => {
                let hi = s.grid().boundary_high();
                if t > hi {
                    Ok(b.cumulative_hazard(hi)? + b.hazard(hi)? * (t - hi))
                } else {
                    b.cumulative_hazard(t)
                }
            }
            TrueBaseline::Model(b) => b.cumulative_hazard(t),
        }
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(t)?).exp())
    }

    /// `log h0(t)` with the same extension as [`Self::cumulative_hazard`].
    pub fn log_hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("time must be non-negative, got {t}")));
        }
        match self {
            TrueBaseline::Mixture(m) => Ok(m.hazard(t).ln()),
            TrueBaseline::Model(BaselineModel::PiecewiseConstant(p)) => Ok(p.hazard_extended(t).ln()),
            TrueBaseline::Model(b) => b.log_hazard(b.grid().map_or(t, |g| t.min(g.boundary_high()))),
        }
    }

    /// Smallest `t` with `H0(t) = target`.
    pub fn inverse_cumulative(&self, target: f64, upper_hint: f64) -> Result<f64> {
        if !(target >= 0.0) || !target.is_finite() {
            return Err(invalid(format!(
                "cumulative hazard target must be finite and non-negative, got {target}"
            )));
        }
        match self {
            TrueBaseline::Model(BaselineModel::Weibull(w)) => Ok(w.inverse_cumulative(target)),
            TrueBaseline::Model(BaselineModel::PiecewiseConstant(p)) => Ok(p.inverse_cumulative_extended(target)),
            _ => {
                if target == 0.0 {
                    return Ok(0.0);
                }
                let mut hi = if upper_hint > 0.0 { upper_hint } else { 1.0 };
                let mut guard = 0;
                while self.cumulative_hazard(hi)? < target {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 200 {
                        return Err(domain("cumulative hazard target not reachable"));
                    }
                }
                brent(
                    |t| self.cumulative_hazard(t).unwrap_or(f64::NAN) - target,
                    0.0,
                    hi,
                    TIME_TOL,
                )
            }
        }
    }

    /// Name/value pairs of the true parameters, for manifests.
    pub fn parameters(&self) -> Vec<(String, f64)> {
        match self {
            TrueBaseline::Mixture(m) => vec![
                ("alpha1".into(), m.alpha1),
                ("alpha2".into(), m.alpha2),
                ("lambda1".into(), m.lambda1),
                ("lambda2".into(), m.lambda2),
                ("p".into(), m.p),
            ],
            TrueBaseline::Model(BaselineModel::Weibull(w)) => {
                vec![("alpha".into(), w.alpha), ("lambda".into(), w.lambda)]
            }
            TrueBaseline::Model(BaselineModel::PiecewiseConstant(p)) => {
                let mut v: Vec<(String, f64)> = p
                    .grid()
                    .knots()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (format!("knot[{k}]"), *c))
                    .collect();
                v.extend(p.phi().iter().enumerate().map(|(k, f)| (format!("phi[{}]", k + 1), *f)));
                v
            }
            TrueBaseline::Model(BaselineModel::BSplineLog(s)) => {
                let mut v: Vec<(String, f64)> = s
                    .grid()
                    .knots()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (format!("knot[{k}]"), *c))
                    .collect();
                v.extend(
                    s.gamma()
                        .iter()
                        .enumerate()
                        .map(|(k, g)| (format!("gamma[{}]", k + 1), *g)),
                );
                v
            }
        }
    }
}

/// `C_R` with `S0(C_R) = q`.
pub fn censoring_time(baseline: &TrueBaseline, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!("survival level must lie in (0, 1), got {q}")));
    }
    baseline.inverse_cumulative(-q.ln(), 1.0)
}

/// Event time solving `H0(T) exp(x'β) = -log u`.
pub fn draw_time(baseline: &TrueBaseline, linear_predictor: f64, u: f64) -> Result<f64> {
    draw_time_with_hint(baseline, linear_predictor, u, 1.0)
}

fn draw_time_with_hint(baseline: &TrueBaseline, linear_predictor: f64, u: f64, hint: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("uniform variate must lie in (0, 1), got {u}")));
    }
    baseline.inverse_cumulative(-u.ln() / linear_predictor.exp(), hint)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub baseline: TrueBaseline,
    /// log hazard ratio of the group indicator
    pub beta: f64,
    /// baseline survival level defining the censoring time
    pub censor_quantile: f64,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    /// `false` records every event time uncensored
    pub censoring: bool,
}

impl ScenarioSpec {
    /// One of the three reference scenarios: Weibull (1), five-level
    /// piecewise constant (2) and a Weibull mixture (3), each with β = 1 and
    /// censoring at `S0 = 0.3`.
    pub fn reference(scenario: u8, n: usize, replicas: usize, seed: u64) -> Result<Self> {
        let baseline = match scenario {
            1 => TrueBaseline::Model(BaselineModel::Weibull(WeibullBaseline::new(1.5, 0.5)?)),
            2 => TrueBaseline::Model(BaselineModel::PiecewiseConstant(PiecewiseConstantBaseline::new(
                vec![0.5, 2.5, 0.5, 1.0, 1.5],
                KnotGrid::build_equal(1.0, 5)?,
            )?)),
            3 => TrueBaseline::Mixture(WeibullMixture::new(3.0, 1.0, 0.5, 0.5, 0.2)?),
            s => return Err(invalid(format!("unknown scenario {s}; expected 1, 2 or 3"))),
        };
        let spec = Self {
            baseline,
            beta: 1.0,
            censor_quantile: 0.3,
            n,
            replicas,
            seed,
            censoring: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.censor_quantile > 0.0 && self.censor_quantile < 1.0) {
            return Err(invalid("censor quantile must lie in (0, 1)"));
        }
        if self.n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        if !self.beta.is_finite() {
            return Err(invalid("beta must be finite"));
        }
        Ok(())
    }

    pub fn censoring_time(&self) -> Result<f64> {
        censoring_time(&self.baseline, self.censor_quantile)
    }
}

/// RNG for one replica; streams are independent across replica indices.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Replica `replica` of the scenario: group `x ~ Bernoulli(0.5)`, event
/// time by inversion, censored at `C_R`.
pub fn generate_dataset(spec: &ScenarioSpec, replica: usize) -> Result<Dataset> {
    spec.validate()?;
    let cr = spec.censoring_time()?;
    let mut rng = replica_rng(spec.seed, replica);
    let mut records = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let u: f64 = rng.sample(Open01);
        let t = draw_time_with_hint(&spec.baseline, spec.beta * x, u, 2.0 * cr)?;
        let record = if spec.censoring && t > cr {
            SurvivalRecord::new(cr, false, vec![x])
        } else {
            SurvivalRecord::new(t, true, vec![x])
        };
        records.push(record);
    }
    Dataset::new(records, vec!["group".to_string()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mixture_values() {
        let m = WeibullMixture::new(3.0, 1.0, 0.5, 0.5, 0.2).unwrap();
        assert_eq!(m.survival(0.0), 1.0);
        assert_abs_diff_eq!(m.survival(1.0), (-0.5f64).exp(), epsilon = 1e-12);
        let w = WeibullMixture::new(2.0, 1.0, 0.7, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(w.hazard(1.3), 0.7 * 2.0 * 1.3, epsilon = 1e-12);
        assert!(WeibullMixture::new(3.0, 1.0, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn mixture_hazard_is_log_survival_slope() {
        let m = WeibullMixture::new(3.0, 1.0, 0.5, 0.5, 0.2).unwrap();
        for &t in &[0.1, 0.5, 1.0, 1.7, 2.5] {
            let h = 1e-6;
            let fd = (m.cumulative_hazard(t + h) - m.cumulative_hazard(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, m.hazard(t), epsilon = 1e-6);
        }
    }

    #[test]
    fn censoring_times() {
        let s1 = ScenarioSpec::reference(1, 10, 1, 1).unwrap();
        // (-ln 0.3 / 0.5)^(2/3)
        assert_abs_diff_eq!(s1.censoring_time().unwrap(), 1.796516, epsilon = 1e-6);
        let s2 = ScenarioSpec::reference(2, 10, 1, 1).unwrap();
        assert_abs_diff_eq!(s2.censoring_time().unwrap(), 1.002649, epsilon = 1e-6);
        let s3 = ScenarioSpec::reference(3, 10, 1, 1).unwrap();
        let c = s3.censoring_time().unwrap();
        assert_abs_diff_eq!(s3.baseline.survival(c).unwrap(), 0.3, epsilon = 1e-10);
        assert!(censoring_time(&s1.baseline, 1.0).is_err());
        assert!(ScenarioSpec::reference(4, 10, 1, 1).is_err());
    }

    #[test]
    fn draw_time_closed_forms() {
        let s1 = ScenarioSpec::reference(1, 10, 1, 1).unwrap();
        // (ln 2 / 0.5)^(2/3) and (ln 2 / (0.5 e))^(2/3)
        assert_abs_diff_eq!(draw_time(&s1.baseline, 0.0, 0.5).unwrap(), 1.243284, epsilon = 1e-6);
        assert_abs_diff_eq!(draw_time(&s1.baseline, 1.0, 0.5).unwrap(), 0.638323, epsilon = 1e-6);
        // (2 ln 2 / (0.5 e))^(2/3)
        assert_abs_diff_eq!(draw_time(&s1.baseline, 1.0, 0.25).unwrap(), 1.013275, epsilon = 1e-6);
        assert!(draw_time(&s1.baseline, 0.0, 0.0).is_err());
        assert!(draw_time(&s1.baseline, 0.0, 1.0).is_err());
        let s2 = ScenarioSpec::reference(2, 10, 1, 1).unwrap();
        // H0(0.4) = 0.6
        let t = draw_time(&s2.baseline, 0.0, (-0.6f64).exp()).unwrap();
        assert_abs_diff_eq!(t, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let spec = ScenarioSpec::reference(3, 50, 2, 17).unwrap();
        let a = generate_dataset(&spec, 0).unwrap();
        let b = generate_dataset(&spec, 0).unwrap();
        let c = generate_dataset(&spec, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
        let cr = spec.censoring_time().unwrap();
        for r in a.records() {
            assert!(r.time > 0.0 && r.time <= cr);
            assert!(r.event || r.time == cr);
        }
        let one = ScenarioSpec::reference(1, 1, 1, 3).unwrap();
        assert_eq!(generate_dataset(&one, 0).unwrap().len(), 1);
    }
}
