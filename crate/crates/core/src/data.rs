use crate::error::{invalid, Result};

/// One subject: observed time, event indicator and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> f64 {
        self.covariates.iter().zip(beta).map(|(x, b)| x * b).sum()
    }
}

/// Right-censored survival data with named covariates.
///
/// An empty record list is allowed so that prior-only runs can reuse the
/// same machinery.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(records: Vec<SurvivalRecord>, covariate_names: Vec<String>) -> Result<Self> {
        let j = covariate_names.len();
        for (i, r) in records.iter().enumerate() {
            if !(r.time > 0.0 && r.time.is_finite()) {
                return Err(invalid(format!(
                    "record {i}: time must be positive and finite, got {}",
                    r.time
                )));
            }
            if r.covariates.len() != j {
                return Err(invalid(format!(
                    "record {i}: expected {j} covariates, got {}",
                    r.covariates.len()
                )));
            }
            if r.covariates.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("record {i}: non-finite covariate")));
            }
        }
        Ok(Self {
            records,
            covariate_names,
        })
    }

    pub fn empty(covariate_names: Vec<String>) -> Self {
        Self {
            records: Vec::new(),
            covariate_names,
        }
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_count(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_time(&self) -> Option<f64> {
        self.records.iter().map(|r| r.time).reduce(f64::max)
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn total_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).sum()
    }

    /// Kaplan–Meier median of the reference group (all covariates zero),
    /// falling back to all subjects when that group is empty. `None` when
    /// the estimated survival never drops to 0.5.
    pub fn reference_median_time(&self) -> Option<f64> {
        let reference: Vec<&SurvivalRecord> = self
            .records
            .iter()
            .filter(|r| r.covariates.iter().all(|&x| x == 0.0))
            .collect();
        let group = if reference.is_empty() {
            self.records.iter().collect()
        } else {
            reference
        };
        kaplan_meier_median(&group)
    }
}

fn kaplan_meier_median(records: &[&SurvivalRecord]) -> Option<f64> {
    let mut sorted: Vec<(f64, bool)> = records.iter().map(|r| (r.time, r.event)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = sorted.len() as f64;
    let mut surv = 1.0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let mut deaths = 0.0;
        let mut leaving = 0.0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                deaths += 1.0;
            }
            leaving += 1.0;
            i += 1;
        }
        if deaths > 0.0 {
            surv *= 1.0 - deaths / at_risk;
            if surv <= 0.5 {
                return Some(t);
            }
        }
        at_risk -= leaving;
    }
    None
}
