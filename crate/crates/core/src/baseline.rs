//! Baseline hazard families and their cumulative hazards.

use crate::error::{domain, invalid, Result};
use crate::quadrature::GaussLegendre;
use crate::splines::{self, KnotGrid, CUBIC};

/// `h0(t) = lambda * alpha * t^(alpha - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullBaseline {
    pub alpha: f64,
    pub lambda: f64,
}

impl WeibullBaseline {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && lambda > 0.0 && alpha.is_finite() && lambda.is_finite()) {
            return Err(invalid(format!(
                "Weibull shape and scale must be positive (alpha = {alpha}, lambda = {lambda})"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn log_hazard(&self, t: f64) -> f64 {
        self.lambda.ln() + self.alpha.ln() + (self.alpha - 1.0) * t.ln()
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            self.lambda * t.powf(self.alpha)
        }
    }

    /// Time at which the cumulative hazard reaches `target`.
    pub fn inverse_cumulative(&self, target: f64) -> f64 {
        (target / self.lambda).powf(1.0 / self.alpha)
    }
}

/// Step hazard `phi_s` on `(c_s, c_{s+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantBaseline {
    phi: Vec<f64>,
    grid: KnotGrid,
}

impl PiecewiseConstantBaseline {
    pub fn new(phi: Vec<f64>, grid: KnotGrid) -> Result<Self> {
        if phi.len() != grid.intervals() {
            return Err(invalid(format!(
                "expected {} piecewise levels, got {}",
                grid.intervals(),
                phi.len()
            )));
        }
        if phi.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(invalid("piecewise hazard levels must be positive"));
        }
        Ok(Self { phi, grid })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    /// Cumulative hazard at each knot, `H0(c_0), ..., H0(c_K)`.
    pub fn knot_cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.phi.len() + 1);
        out.push(0.0);
        for (s, p) in self.phi.iter().enumerate() {
            acc += p * self.grid.width(s);
            out.push(acc);
        }
        out
    }

    /// Hazard with the last level extended past `cK`.
    pub fn hazard_extended(&self, t: f64) -> f64 {
        if t > self.grid.boundary_high() {
            self.phi[self.phi.len() - 1]
        } else {
            let s = self.grid.span_index(t.max(self.grid.boundary_low())).unwrap_or(0);
            self.phi[s]
        }
    }

    /// Cumulative hazard with the last level extended past `cK`.
    pub fn cumulative_extended(&self, t: f64) -> f64 {
        let hi = self.grid.boundary_high();
        if t > hi {
            let knots = self.knot_cumulative();
            knots[knots.len() - 1] + self.phi[self.phi.len() - 1] * (t - hi)
        } else {
            self.cumulative_in_domain(t.max(self.grid.boundary_low()))
        }
    }

    fn cumulative_in_domain(&self, t: f64) -> f64 {
        let s = self.grid.span_index(t).expect("t checked against grid");
        let full: f64 = (0..s).map(|m| self.phi[m] * self.grid.width(m)).sum();
        full + self.phi[s] * (t - self.grid.knots()[s])
    }

    /// Inverse of [`Self::cumulative_extended`].
    pub fn inverse_cumulative_extended(&self, target: f64) -> f64 {
        let cum = self.knot_cumulative();
        let knots = self.grid.knots();
        for s in 0..self.phi.len() {
            if target <= cum[s + 1] {
                return knots[s] + (target - cum[s]) / self.phi[s];
            }
        }
        let last = self.phi.len() - 1;
        knots[last + 1] + (target - cum[last + 1]) / self.phi[last]
    }
}

/// `log h0(t) = sum_k gamma_k B_{(k,4)}(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineLogBaseline {
    gamma: Vec<f64>,
    grid: KnotGrid,
}

impl BSplineLogBaseline {
    pub fn new(gamma: Vec<f64>, grid: KnotGrid) -> Result<Self> {
        if gamma.len() != grid.basis_count(CUBIC) {
            return Err(invalid(format!(
                "expected {} spline coefficients, got {}",
                grid.basis_count(CUBIC),
                gamma.len()
            )));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(invalid("spline coefficients must be finite"));
        }
        Ok(Self { gamma, grid })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    fn log_hazard_in_span(&self, t: f64, span: usize) -> f64 {
        let (first, b) = splines::local_basis_in_span(t, span, CUBIC, &self.grid);
        b[..CUBIC]
            .iter()
            .zip(&self.gamma[first..first + CUBIC])
            .map(|(b, g)| b * g)
            .sum()
    }

    /// Cumulative hazard by Gauss–Legendre quadrature on each knot span.
    pub fn cumulative_with_rule(&self, t: f64, rule: &GaussLegendre) -> Result<f64> {
        let span = self.grid.span_index(t)?;
        let knots = self.grid.knots();
        let mut total = 0.0;
        for s in 0..span {
            total += rule.integrate(knots[s], knots[s + 1], |u| self.log_hazard_in_span(u, s).exp());
        }
        if t > knots[span] {
            total += rule.integrate(knots[span], t, |u| self.log_hazard_in_span(u, span).exp());
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel {
    Weibull(WeibullBaseline),
    PiecewiseConstant(PiecewiseConstantBaseline),
    BSplineLog(BSplineLogBaseline),
}

impl BaselineModel {
    pub fn grid(&self) -> Option<&KnotGrid> {
        match self {
            BaselineModel::Weibull(_) => None,
            BaselineModel::PiecewiseConstant(b) => Some(b.grid()),
            BaselineModel::BSplineLog(b) => Some(b.grid()),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(domain(format!("time must be non-negative, got {t}")));
        }
        if let Some(grid) = self.grid() {
            if t > grid.boundary_high() {
                return Err(domain(format!("t = {t} beyond the last knot {}", grid.boundary_high())));
            }
        }
        Ok(())
    }

    /// `log h0(t)`. At `t = 0` the right limit is returned.
    pub fn log_hazard(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self {
            BaselineModel::Weibull(w) => w.log_hazard(t),
            BaselineModel::PiecewiseConstant(p) => {
                let t = t.max(p.grid.boundary_low());
                p.phi[p.grid.span_index(t)?].ln()
            }
            BaselineModel::BSplineLog(b) => {
                let t = t.max(b.grid.boundary_low());
                b.log_hazard_in_span(t, b.grid.span_index(t)?)
            }
        })
    }

    pub fn hazard(&self, t: f64) -> Result<f64> {
        match self {
            BaselineModel::PiecewiseConstant(p) => {
                self.check_time(t)?;
                let t = t.max(p.grid.boundary_low());
                Ok(p.phi[p.grid.span_index(t)?])
            }
            _ => self.log_hazard(t).map(f64::exp),
        }
    }

    /// `H0(t) = int_0^t h0(u) du`.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match self {
            BaselineModel::Weibull(w) => Ok(w.cumulative_hazard(t)),
            BaselineModel::PiecewiseConstant(p) => Ok(p.cumulative_in_domain(t.max(p.grid.boundary_low()))),
            BaselineModel::BSplineLog(b) => {
                b.cumulative_with_rule(t.max(b.grid.boundary_low()), GaussLegendre::standard())
            }
        }
    }

    /// `S0(t) = exp(-H0(t))`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(t)?).exp())
    }
}
