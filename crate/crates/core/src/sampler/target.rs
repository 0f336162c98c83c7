//! Incremental log-posterior for coordinate-wise updates.
//!
//! The sampler moves one unconstrained coordinate at a time. Each family
//! keeps enough cached state that a proposal only recomputes what the moved
//! coordinate touches: one power sum for the Weibull shape, the interval
//! sufficient statistics for the piecewise-constant levels, and only the knot
//! spans inside a basis function's support for the spline coefficients.
//! After every accepted move the per-subject caches `log h0(t_i)` and
//! `H0(t_i)` are valid, which is all the regression-coefficient moves need.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{baseline_log_prior, ModelSpec, ParameterState, PriorScenario};
use crate::quadrature::GaussLegendre;
use crate::splines::{local_basis_in_span, KnotGrid, CUBIC};

/// A density over a vector of unconstrained coordinates that supports
/// single-coordinate proposals.
pub trait Target {
    fn dim(&self) -> usize;
    fn position(&self) -> &[f64];
    fn log_density(&self) -> f64;
    /// Log density with coordinate `i` moved to `value`. The proposal stays
    /// pending until [`Target::accept`] or [`Target::reject`].
    fn propose(&mut self, i: usize, value: f64) -> f64;
    fn accept(&mut self);
    fn reject(&mut self);
}

/// Target defined by a plain log-density closure; every proposal is a full evaluation.
pub struct FnTarget<F> {
    f: F,
    x: Vec<f64>,
    lp: f64,
    pending: Option<(usize, f64, f64, f64)>,
}

impl<F: Fn(&[f64]) -> f64> FnTarget<F> {
    pub fn new(f: F, init: Vec<f64>) -> Self {
        let lp = f(&init);
        Self {
            f,
            x: init,
            lp,
            pending: None,
        }
    }
}

impl<F: Fn(&[f64]) -> f64> Target for FnTarget<F> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn position(&self) -> &[f64] {
        &self.x
    }

    fn log_density(&self) -> f64 {
        self.lp
    }

    fn propose(&mut self, i: usize, value: f64) -> f64 {
        let old = self.x[i];
        self.x[i] = value;
        let lp = (self.f)(&self.x);
        self.x[i] = old;
        self.pending = Some((i, old, value, lp));
        lp
    }

    fn accept(&mut self) {
        if let Some((i, _, value, lp)) = self.pending.take() {
            self.x[i] = value;
            self.lp = lp;
        }
    }

    fn reject(&mut self) {
        self.pending = None;
    }
}

/// Per-subject data and caches shared by all families.
#[derive(Debug, Clone)]
struct Records {
    time: Vec<f64>,
    event: Vec<f64>,
    /// row-major `n x j`
    x: Vec<f64>,
    j: usize,
    eta: Vec<f64>,
    w: Vec<f64>,
    log_h: Vec<f64>,
    cum: Vec<f64>,
}

impl Records {
    fn new(data: &Dataset) -> Self {
        let n = data.len();
        let j = data.covariate_count();
        let mut x = Vec::with_capacity(n * j);
        for r in data.records() {
            x.extend_from_slice(&r.covariates);
        }
        Self {
            time: data.records().iter().map(|r| r.time).collect(),
            event: data.records().iter().map(|r| if r.event { 1.0 } else { 0.0 }).collect(),
            x,
            j,
            eta: vec![0.0; n],
            w: vec![1.0; n],
            log_h: vec![0.0; n],
            cum: vec![0.0; n],
        }
    }

    fn len(&self) -> usize {
        self.time.len()
    }

    fn set_beta(&mut self, beta: &[f64]) {
        for i in 0..self.len() {
            let row = &self.x[i * self.j..(i + 1) * self.j];
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            self.eta[i] = eta;
            self.w[i] = eta.exp();
        }
    }

    fn loglik(&self) -> f64 {
        (0..self.len())
            .map(|i| self.event[i] * (self.log_h[i] + self.eta[i]) - self.cum[i] * self.w[i])
            .sum()
    }

    fn pointwise(&self, out: &mut Vec<f64>) {
        out.extend((0..self.len()).map(|i| self.event[i] * (self.log_h[i] + self.eta[i]) - self.cum[i] * self.w[i]));
    }

    fn event_eta(&self) -> f64 {
        self.event.iter().zip(&self.eta).map(|(d, e)| d * e).sum()
    }
}

#[derive(Debug, Clone)]
struct WeibullCache {
    log_t: Vec<f64>,
    events: f64,
    event_log_t: f64,
    /// `t_i^alpha`
    t_pow: Vec<f64>,
    /// `sum_i w_i t_i^alpha`
    power_sum: f64,
}

#[derive(Debug, Clone)]
struct PiecewiseCache {
    span: Vec<usize>,
    offset: Vec<f64>,
    width: Vec<f64>,
    events: Vec<f64>,
    /// weighted exposure per interval
    exposure: Vec<f64>,
}

impl PiecewiseCache {
    fn refresh_exposure(&mut self, w: &[f64]) {
        let k = self.width.len();
        let mut tail = vec![0.0; k];
        let mut partial = vec![0.0; k];
        for (i, &s) in self.span.iter().enumerate() {
            tail[s] += w[i];
            partial[s] += w[i] * self.offset[i];
        }
        let mut beyond = 0.0;
        for s in (0..k).rev() {
            self.exposure[s] = self.width[s] * beyond + partial[s];
            beyond += tail[s];
        }
    }
}

#[derive(Debug, Clone)]
struct SplineCache {
    grid: KnotGrid,
    nodes: usize,
    /// quadrature weights and cubic basis values at the full-span nodes, per span
    span_weight: Vec<f64>,
    span_basis: Vec<[f64; CUBIC]>,
    /// the same for each subject's partial span `[c_s, t_i]`
    rec_weight: Vec<f64>,
    rec_basis: Vec<[f64; CUBIC]>,
    /// basis values at the subject's own time
    rec_point: Vec<[f64; CUBIC]>,
    rec_span: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// full-span integrals of h0
    span_integral: Vec<f64>,
    /// partial integrals `int_{c_s}^{t_i} h0`
    partial: Vec<f64>,
    /// per-span `sum_i w_i`, `sum_i w_i P_i`, `sum_i delta_i log h0(t_i)`
    span_w: Vec<f64>,
    span_wp: Vec<f64>,
    span_ev: Vec<f64>,
}

impl SplineCache {
    fn new(grid: &KnotGrid, times: &[f64], rule: &GaussLegendre) -> Self {
        let k = grid.intervals();
        let q = rule.len();
        let knots = grid.knots();
        let mut span_weight = Vec::with_capacity(k * q);
        let mut span_basis = Vec::with_capacity(k * q);
        for s in 0..k {
            for (u, w) in rule.mapped(knots[s], knots[s + 1]) {
                span_weight.push(w);
                span_basis.push(cubic_values(u, s, grid));
            }
        }
        let n = times.len();
        let mut rec_weight = Vec::with_capacity(n * q);
        let mut rec_basis = Vec::with_capacity(n * q);
        let mut rec_point = Vec::with_capacity(n);
        let mut rec_span = Vec::with_capacity(n);
        let mut members = vec![Vec::new(); k];
        for (i, &t) in times.iter().enumerate() {
            let s = grid.span_index(t).expect("times validated against grid");
            rec_span.push(s);
            members[s].push(i);
            rec_point.push(cubic_values(t, s, grid));
            for (u, w) in rule.mapped(knots[s], t) {
                rec_weight.push(w);
                rec_basis.push(cubic_values(u, s, grid));
            }
        }
        Self {
            grid: grid.clone(),
            nodes: q,
            span_weight,
            span_basis,
            rec_weight,
            rec_basis,
            rec_point,
            rec_span,
            members,
            span_integral: vec![0.0; k],
            partial: vec![0.0; n],
            span_w: vec![0.0; k],
            span_wp: vec![0.0; k],
            span_ev: vec![0.0; k],
        }
    }

    fn span_value(&self, s: usize, gamma: &[f64]) -> f64 {
        let g = &gamma[s..s + CUBIC];
        let q = self.nodes;
        (s * q..(s + 1) * q)
            .map(|m| self.span_weight[m] * dot4(&self.span_basis[m], g).exp())
            .sum()
    }

    fn record_values(&self, i: usize, gamma: &[f64]) -> (f64, f64) {
        let s = self.rec_span[i];
        let g = &gamma[s..s + CUBIC];
        let q = self.nodes;
        let partial = (i * q..(i + 1) * q)
            .map(|m| self.rec_weight[m] * dot4(&self.rec_basis[m], g).exp())
            .sum();
        (partial, dot4(&self.rec_point[i], g))
    }

    fn spans_touched(&self, coef: usize) -> std::ops::RangeInclusive<usize> {
        let k = self.grid.intervals();
        coef.saturating_sub(CUBIC - 1)..=coef.min(k - 1)
    }

    fn total(&self, span_integral: &[f64], span_wp: &[f64], span_ev: &[f64]) -> f64 {
        let mut before = 0.0;
        let mut ll = 0.0;
        for s in 0..span_integral.len() {
            ll += span_ev[s] - self.span_w[s] * before - span_wp[s];
            before += span_integral[s];
        }
        ll
    }
}

fn cubic_values(t: f64, span: usize, grid: &KnotGrid) -> [f64; CUBIC] {
    let (_, v) = local_basis_in_span(t, span, CUBIC, grid);
    [v[0], v[1], v[2], v[3]]
}

#[inline]
fn dot4(b: &[f64; CUBIC], g: &[f64]) -> f64 {
    b[0] * g[0] + b[1] * g[1] + b[2] * g[2] + b[3] * g[3]
}

#[derive(Debug, Clone)]
enum FamilyCache {
    Weibull(WeibullCache),
    Piecewise(PiecewiseCache),
    Spline(Box<SplineCache>),
}

#[derive(Debug, Clone)]
enum Pending {
    None,
    /// baseline coordinate with family-specific scratch
    Baseline {
        coord: usize,
        value: f64,
        loglik: f64,
        prior: f64,
        scratch: Scratch,
    },
    Beta {
        coord: usize,
        value: f64,
        loglik: f64,
        prior: f64,
        eta: Vec<f64>,
        w: Vec<f64>,
    },
    Sigma {
        value: f64,
        prior: f64,
    },
}

#[derive(Debug, Clone)]
enum Scratch {
    None,
    WeibullShape {
        t_pow: Vec<f64>,
        power_sum: f64,
    },
    Spline {
        spans: Vec<(usize, f64, f64, f64)>,
        records: Vec<(usize, f64, f64)>,
    },
}

/// Posterior of a Cox model over unconstrained coordinates
/// `[baseline..., beta..., ln sigma?]`, including the log-scale Jacobian.
#[derive(Debug, Clone)]
pub struct CoxTarget {
    spec: ModelSpec,
    prior: PriorScenario,
    theta: Vec<f64>,
    base_dim: usize,
    j: usize,
    has_sigma: bool,
    records: Records,
    family: FamilyCache,
    loglik: f64,
    prior_lp: f64,
    pending: Pending,
}

impl CoxTarget {
    /// Builds the target at `theta` (unconstrained coordinates).
    pub fn new(data: &Dataset, spec: &ModelSpec, prior: &PriorScenario, theta: Vec<f64>) -> Result<Self> {
        spec.check_prior(prior)?;
        if let (Some(grid), Some(tmax)) = (spec.grid(), data.max_time()) {
            if tmax > grid.boundary_high() {
                return Err(Error::Domain(format!(
                    "observed time {tmax} beyond the last knot {}",
                    grid.boundary_high()
                )));
            }
        }
        let base_dim = spec.baseline_dim();
        let j = data.covariate_count();
        let has_sigma = prior.baseline.has_sigma();
        let dim = base_dim + j + usize::from(has_sigma);
        if theta.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "expected {dim} coordinates, got {}",
                theta.len()
            )));
        }
        let mut records = Records::new(data);
        records.set_beta(&theta[base_dim..base_dim + j]);
        let family = match spec {
            ModelSpec::Weibull => {
                let log_t: Vec<f64> = records.time.iter().map(|t| t.ln()).collect();
                FamilyCache::Weibull(WeibullCache {
                    events: records.event.iter().sum(),
                    event_log_t: records.event.iter().zip(&log_t).map(|(d, l)| d * l).sum(),
                    t_pow: vec![0.0; log_t.len()],
                    log_t,
                    power_sum: 0.0,
                })
            }
            ModelSpec::PiecewiseConstant(grid) => {
                let k = grid.intervals();
                let mut span = Vec::with_capacity(records.len());
                let mut offset = Vec::with_capacity(records.len());
                let mut events = vec![0.0; k];
                for (i, &t) in records.time.iter().enumerate() {
                    let s = grid.span_index(t)?;
                    span.push(s);
                    offset.push(t - grid.knots()[s]);
                    events[s] += records.event[i];
                }
                FamilyCache::Piecewise(PiecewiseCache {
                    span,
                    offset,
                    width: (0..k).map(|s| grid.width(s)).collect(),
                    events,
                    exposure: vec![0.0; k],
                })
            }
            ModelSpec::BSpline(grid) => FamilyCache::Spline(Box::new(SplineCache::new(
                grid,
                &records.time,
                GaussLegendre::standard(),
            ))),
        };
        let mut target = Self {
            spec: spec.clone(),
            prior: prior.clone(),
            theta,
            base_dim,
            j,
            has_sigma,
            records,
            family,
            loglik: 0.0,
            prior_lp: 0.0,
            pending: Pending::None,
        };
        target.rebuild();
        Ok(target)
    }

    /// Recomputes every cache from `theta`.
    fn rebuild(&mut self) {
        let base = &self.theta[..self.base_dim];
        let rec = &mut self.records;
        match &mut self.family {
            FamilyCache::Weibull(c) => {
                let (la, ll) = (base[0], base[1]);
                let alpha = la.exp();
                let lambda = ll.exp();
                for i in 0..rec.len() {
                    c.t_pow[i] = (alpha * c.log_t[i]).exp();
                    rec.log_h[i] = ll + la + (alpha - 1.0) * c.log_t[i];
                    rec.cum[i] = lambda * c.t_pow[i];
                }
                c.power_sum = c.t_pow.iter().zip(&rec.w).map(|(p, w)| p * w).sum();
            }
            FamilyCache::Piecewise(c) => {
                fill_piecewise_records(c, base, rec);
                c.refresh_exposure(&rec.w);
            }
            FamilyCache::Spline(c) => {
                for s in 0..c.grid.intervals() {
                    c.span_integral[s] = c.span_value(s, base);
                }
                for i in 0..rec.len() {
                    let (p, lh) = c.record_values(i, base);
                    c.partial[i] = p;
                    rec.log_h[i] = lh;
                }
                refresh_spline_records(c, rec);
            }
        }
        self.loglik = rec.loglik();
        self.prior_lp = self.prior_with(&self.theta);
    }

    fn log_sigma(&self, theta: &[f64]) -> Option<f64> {
        self.has_sigma.then(|| theta[theta.len() - 1])
    }

    /// Prior plus log-scale Jacobian at `theta`.
    fn prior_with(&self, theta: &[f64]) -> f64 {
        let base = &theta[..self.base_dim];
        let beta = &theta[self.base_dim..self.base_dim + self.j];
        let ls = self.log_sigma(theta);
        let mut lp = baseline_log_prior(&self.prior.baseline, &self.spec, base, ls) + self.prior.beta.log_density(beta);
        if self.spec.baseline_positive() {
            lp += base.iter().sum::<f64>();
        }
        if let Some(ls) = ls {
            lp += ls;
        }
        lp
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Per-subject log-likelihood contributions at the current state.
    pub fn pointwise_into(&self, out: &mut Vec<f64>) {
        self.records.pointwise(out)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Current state in natural parameters.
    pub fn state(&self) -> Result<ParameterState> {
        Ok(ParameterState {
            baseline: self.spec.baseline_from_unconstrained(&self.theta[..self.base_dim])?,
            beta: self.theta[self.base_dim..self.base_dim + self.j].to_vec(),
            sigma: self.log_sigma(&self.theta).map(f64::exp),
        })
    }

    fn propose_baseline(&mut self, coord: usize, value: f64) -> (f64, Scratch) {
        let rec = &self.records;
        let old = self.theta[coord];
        match &self.family {
            FamilyCache::Weibull(c) => {
                let (mut la, mut ll) = (self.theta[0], self.theta[1]);
                if coord == 0 {
                    la = value;
                } else {
                    ll = value;
                }
                let alpha = la.exp();
                let (power_sum, scratch) = if coord == 0 {
                    let t_pow: Vec<f64> = c.log_t.iter().map(|l| (alpha * l).exp()).collect();
                    let ps = t_pow.iter().zip(&rec.w).map(|(p, w)| p * w).sum();
                    (ps, Scratch::WeibullShape { t_pow, power_sum: ps })
                } else {
                    (c.power_sum, Scratch::None)
                };
                let ll_new =
                    c.events * (ll + la) + (alpha - 1.0) * c.event_log_t + rec.event_eta() - ll.exp() * power_sum;
                (ll_new, scratch)
            }
            FamilyCache::Piecewise(c) => {
                let base = &self.theta[..self.base_dim];
                let mut ll = rec.event_eta();
                for (s, &b) in base.iter().enumerate() {
                    let u = if s == coord { value } else { b };
                    ll += c.events[s] * u - u.exp() * c.exposure[s];
                }
                (ll, Scratch::None)
            }
            FamilyCache::Spline(c) => {
                let mut gamma = self.theta[..self.base_dim].to_vec();
                gamma[coord] = value;
                let mut span_integral = c.span_integral.clone();
                let mut span_wp = c.span_wp.clone();
                let mut span_ev = c.span_ev.clone();
                let mut spans = Vec::new();
                let mut records = Vec::new();
                for s in c.spans_touched(coord) {
                    span_integral[s] = c.span_value(s, &gamma);
                    let mut wp = 0.0;
                    let mut ev = 0.0;
                    for &i in &c.members[s] {
                        let (p, lh) = c.record_values(i, &gamma);
                        wp += rec.w[i] * p;
                        ev += rec.event[i] * lh;
                        records.push((i, p, lh));
                    }
                    span_wp[s] = wp;
                    span_ev[s] = ev;
                    spans.push((s, span_integral[s], wp, ev));
                }
                let _ = old;
                let ll = c.total(&span_integral, &span_wp, &span_ev) + rec.event_eta();
                (ll, Scratch::Spline { spans, records })
            }
        }
    }

    fn commit_baseline(&mut self, coord: usize, value: f64, scratch: Scratch) {
        self.theta[coord] = value;
        let base_dim = self.base_dim;
        let rec = &mut self.records;
        match (&mut self.family, scratch) {
            (FamilyCache::Weibull(c), scratch) => {
                if let Scratch::WeibullShape { t_pow, power_sum } = scratch {
                    c.t_pow = t_pow;
                    c.power_sum = power_sum;
                }
                let (la, ll) = (self.theta[0], self.theta[1]);
                let alpha = la.exp();
                let lambda = ll.exp();
                for i in 0..rec.len() {
                    rec.log_h[i] = ll + la + (alpha - 1.0) * c.log_t[i];
                    rec.cum[i] = lambda * c.t_pow[i];
                }
            }
            (FamilyCache::Piecewise(c), _) => {
                fill_piecewise_records(c, &self.theta[..base_dim], rec);
            }
            (FamilyCache::Spline(c), Scratch::Spline { spans, records }) => {
                for (s, integral, wp, ev) in spans {
                    c.span_integral[s] = integral;
                    c.span_wp[s] = wp;
                    c.span_ev[s] = ev;
                }
                for (i, p, lh) in records {
                    c.partial[i] = p;
                    rec.log_h[i] = lh;
                }
                let mut before = vec![0.0; c.span_integral.len()];
                let mut acc = 0.0;
                for (s, b) in before.iter_mut().enumerate() {
                    *b = acc;
                    acc += c.span_integral[s];
                }
                for i in 0..rec.len() {
                    rec.cum[i] = before[c.rec_span[i]] + c.partial[i];
                }
            }
            (FamilyCache::Spline(_), _) => unreachable!("spline proposal without scratch"),
        }
    }

    fn commit_beta(&mut self, eta: Vec<f64>, w: Vec<f64>) {
        self.records.eta = eta;
        self.records.w = w;
        let rec = &mut self.records;
        match &mut self.family {
            FamilyCache::Weibull(c) => {
                c.power_sum = c.t_pow.iter().zip(&rec.w).map(|(p, w)| p * w).sum();
            }
            FamilyCache::Piecewise(c) => c.refresh_exposure(&rec.w),
            FamilyCache::Spline(c) => refresh_spline_records(c, rec),
        }
    }
}

fn fill_piecewise_records(c: &PiecewiseCache, log_phi: &[f64], rec: &mut Records) {
    let k = log_phi.len();
    let mut before = vec![0.0; k];
    let mut acc = 0.0;
    for s in 0..k {
        before[s] = acc;
        acc += log_phi[s].exp() * c.width[s];
    }
    for i in 0..rec.len() {
        let s = c.span[i];
        rec.log_h[i] = log_phi[s];
        rec.cum[i] = before[s] + log_phi[s].exp() * c.offset[i];
    }
}

fn refresh_spline_records(c: &mut SplineCache, rec: &mut Records) {
    let k = c.span_integral.len();
    let mut before = Vec::with_capacity(k);
    let mut acc = 0.0;
    for integral in &c.span_integral {
        before.push(acc);
        acc += integral;
    }
    c.span_w.iter_mut().for_each(|v| *v = 0.0);
    c.span_wp.iter_mut().for_each(|v| *v = 0.0);
    c.span_ev.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..rec.len() {
        let s = c.rec_span[i];
        rec.cum[i] = before[s] + c.partial[i];
        c.span_w[s] += rec.w[i];
        c.span_wp[s] += rec.w[i] * c.partial[i];
        c.span_ev[s] += rec.event[i] * rec.log_h[i];
    }
}

impl Target for CoxTarget {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn position(&self) -> &[f64] {
        &self.theta
    }

    fn log_density(&self) -> f64 {
        self.loglik + self.prior_lp
    }

    fn propose(&mut self, i: usize, value: f64) -> f64 {
        let mut theta = std::mem::take(&mut self.theta);
        let old = theta[i];
        theta[i] = value;
        let prior = self.prior_with(&theta);
        theta[i] = old;
        self.theta = theta;
        if prior == f64::NEG_INFINITY || prior.is_nan() {
            self.pending = Pending::Sigma {
                value,
                prior: f64::NEG_INFINITY,
            };
            return f64::NEG_INFINITY;
        }
        if i < self.base_dim {
            let (loglik, scratch) = self.propose_baseline(i, value);
            self.pending = Pending::Baseline {
                coord: i,
                value,
                loglik,
                prior,
                scratch,
            };
            loglik + prior
        } else if i < self.base_dim + self.j {
            let col = i - self.base_dim;
            let delta = value - old;
            let rec = &self.records;
            let mut eta = rec.eta.clone();
            let mut w = rec.w.clone();
            let mut loglik = 0.0;
            for r in 0..rec.len() {
                eta[r] += delta * rec.x[r * rec.j + col];
                w[r] = eta[r].exp();
                loglik += rec.event[r] * (rec.log_h[r] + eta[r]) - rec.cum[r] * w[r];
            }
            self.pending = Pending::Beta {
                coord: i,
                value,
                loglik,
                prior,
                eta,
                w,
            };
            loglik + prior
        } else {
            self.pending = Pending::Sigma { value, prior };
            self.loglik + prior
        }
    }

    fn accept(&mut self) {
        match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => {}
            Pending::Baseline {
                coord,
                value,
                loglik,
                prior,
                scratch,
            } => {
                self.commit_baseline(coord, value, scratch);
                self.loglik = loglik;
                self.prior_lp = prior;
            }
            Pending::Beta {
                coord,
                value,
                loglik,
                prior,
                eta,
                w,
            } => {
                self.theta[coord] = value;
                self.commit_beta(eta, w);
                self.loglik = loglik;
                self.prior_lp = prior;
            }
            Pending::Sigma { value, prior } => {
                let last = self.theta.len() - 1;
                self.theta[last] = value;
                self.prior_lp = prior;
            }
        }
    }

    fn reject(&mut self) {
        self.pending = Pending::None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;
    use crate::inference::{log_posterior, BaselinePrior};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize, tmax: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|_| {
                let t = rng.random_range(0.01..tmax);
                SurvivalRecord::new(
                    t,
                    rng.random_bool(0.7),
                    vec![f64::from(u8::from(rng.random_bool(0.5))), rng.random_range(-1.0..1.0)],
                )
            })
            .collect();
        Dataset::new(recs, vec!["g".into(), "z".into()]).unwrap()
    }

    /// log posterior in unconstrained coordinates via the direct route
    fn direct(data: &Dataset, spec: &ModelSpec, prior: &PriorScenario, theta: &[f64]) -> f64 {
        let bd = spec.baseline_dim();
        let j = data.covariate_count();
        let state = ParameterState {
            baseline: spec.baseline_from_unconstrained(&theta[..bd]).unwrap(),
            beta: theta[bd..bd + j].to_vec(),
            sigma: prior.baseline.has_sigma().then(|| theta[theta.len() - 1].exp()),
        };
        let mut lp = log_posterior(data, &state, prior).unwrap();
        if spec.baseline_positive() {
            lp += theta[..bd].iter().sum::<f64>();
        }
        if prior.baseline.has_sigma() {
            lp += theta[theta.len() - 1];
        }
        lp
    }

    fn check_incremental(spec: ModelSpec, prior: BaselinePrior) {
        let tmax = spec.grid().map_or(3.0, |g| g.boundary_high());
        let data = toy_data(60, tmax, 3);
        let prior = PriorScenario::new(prior);
        let dim = spec.baseline_dim() + 2 + usize::from(prior.baseline.has_sigma());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut target = CoxTarget::new(&data, &spec, &prior, init).unwrap();
        for step in 0..400 {
            let i = step % dim;
            let v = target.position()[i] + rng.random_range(-0.4..0.4);
            let proposed = target.propose(i, v);
            let mut moved = target.position().to_vec();
            moved[i] = v;
            let expected = direct(&data, &spec, &prior, &moved);
            assert_relative_eq!(proposed, expected, max_relative = 1e-10, epsilon = 1e-9);
            if rng.random_bool(0.5) {
                target.accept();
            } else {
                target.reject();
            }
            let here = direct(&data, &spec, &prior, target.position());
            assert_relative_eq!(target.log_density(), here, max_relative = 1e-10, epsilon = 1e-9);
        }
    }

    #[test]
    fn weibull_incremental_matches_direct() {
        check_incremental(ModelSpec::Weibull, BaselinePrior::weibull());
    }

    #[test]
    fn piecewise_incremental_matches_direct() {
        let g = KnotGrid::build_equal(3.0, 5).unwrap();
        check_incremental(ModelSpec::PiecewiseConstant(g.clone()), BaselinePrior::pc3());
        check_incremental(ModelSpec::PiecewiseConstant(g), BaselinePrior::pc4());
    }

    #[test]
    fn spline_incremental_matches_direct() {
        let g = KnotGrid::build_equal(3.0, 6).unwrap();
        check_incremental(ModelSpec::BSpline(g.clone()), BaselinePrior::ps3());
        check_incremental(ModelSpec::BSpline(g), BaselinePrior::ps1());
        let g = KnotGrid::build_equal(3.0, 1).unwrap();
        check_incremental(ModelSpec::BSpline(g), BaselinePrior::ps2());
    }

    #[test]
    fn rejects_times_beyond_grid() {
        let data = toy_data(10, 3.0, 1);
        let g = KnotGrid::build_equal(1.0, 2).unwrap();
        let prior = PriorScenario::new(BaselinePrior::pc1());
        let r = CoxTarget::new(&data, &ModelSpec::PiecewiseConstant(g), &prior, vec![0.0; 4]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
