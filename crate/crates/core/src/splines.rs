//! B-spline bases of order 1 through 5 on a clamped knot partition.
//!
//! A [`KnotGrid`] holds the partition `c0 < c1 < ... < cK`. The order-`p`
//! basis lives on the clamped knot vector with `p` copies of each boundary
//! knot, which gives `K + p - 1` basis functions: order 1 reproduces the
//! interval indicators of the piecewise-constant hazard and order 4 the cubic
//! basis of the log-hazard spline. Indices are 0-based throughout.
//!
//! Spans are half-open on the left, `(c_{s}, c_{s+1}]`, with `t = c0`
//! assigned to the first span, so every basis is left-continuous and the
//! whole closed range `[c0, cK]` is covered.

use crate::error::{domain, invalid, Result};

/// Highest supported basis order.
pub const MAX_ORDER: usize = 5;
/// Order of the log-hazard spline basis.
pub const CUBIC: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotGrid {
    knots: Vec<f64>,
    tau: Vec<f64>,
}

impl KnotGrid {
    /// `K` equal intervals on `[0, t_max]`.
    pub fn build_equal(t_max: f64, k: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(invalid(format!("t_max must be positive, got {t_max}")));
        }
        if k == 0 {
            return Err(invalid("interval count K must be at least 1"));
        }
        let width = t_max / k as f64;
        let mut knots: Vec<f64> = (0..k).map(|j| j as f64 * width).collect();
        knots.push(t_max);
        Self::from_knots(knots)
    }

    /// Grid from explicit boundary and internal knots `c0 < ... < cK`.
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("a knot grid needs at least two knots"));
        }
        if knots.iter().any(|c| !c.is_finite()) {
            return Err(invalid("knots must be finite"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("knots must be strictly increasing"));
        }
        let tau = clamped_vector(&knots, CUBIC);
        Ok(Self { knots, tau })
    }

    /// Number of intervals `K`.
    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn boundary_low(&self) -> f64 {
        self.knots[0]
    }

    pub fn boundary_high(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn internal_knots(&self) -> &[f64] {
        &self.knots[1..self.knots.len() - 1]
    }

    /// Augmented cubic knot sequence, length `K + 7`.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Cubic sequence extended by one more boundary node at each end (length `K + 9`).
    pub fn tau_order5(&self) -> Vec<f64> {
        clamped_vector(&self.knots, 5)
    }

    /// Clamped knot vector for an arbitrary order.
    pub fn clamped(&self, order: usize) -> Vec<f64> {
        clamped_vector(&self.knots, order)
    }

    pub fn basis_count(&self, order: usize) -> usize {
        self.intervals() + order - 1
    }

    pub fn width(&self, span: usize) -> f64 {
        self.knots[span + 1] - self.knots[span]
    }

    /// Span `s` with `c_s < t <= c_{s+1}`; `t = c0` maps to span 0.
    pub fn span_index(&self, t: f64) -> Result<usize> {
        let (lo, hi) = (self.boundary_low(), self.boundary_high());
        if !(t >= lo && t <= hi) {
            return Err(domain(format!("t = {t} outside [{lo}, {hi}]")));
        }
        // first knot >= t, excluding c0
        let idx = self.knots[1..].partition_point(|&c| c < t);
        Ok(idx.min(self.intervals() - 1))
    }
}

fn clamped_vector(knots: &[f64], order: usize) -> Vec<f64> {
    let lo = knots[0];
    let hi = knots[knots.len() - 1];
    let mut v = Vec::with_capacity(knots.len() - 2 + 2 * order);
    v.extend(std::iter::repeat_n(lo, order));
    v.extend_from_slice(&knots[1..knots.len() - 1]);
    v.extend(std::iter::repeat_n(hi, order));
    v
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(invalid(format!("basis order must be in 1..=5, got {order}")))
    }
}

/// `B_{(k, order)}(t)` by the Cox–de Boor recursion, with 0/0 terms taken as 0.
pub fn bspline_value(t: f64, k: usize, order: usize, grid: &KnotGrid) -> Result<f64> {
    check_order(order)?;
    if k >= grid.basis_count(order) {
        return Err(invalid(format!(
            "basis index {k} out of range for order {order} (count {})",
            grid.basis_count(order)
        )));
    }
    let active = grid.span_index(t)? + order - 1;
    let tau = grid.clamped(order);
    Ok(recursion(&tau, k, order, t, active))
}

fn recursion(tau: &[f64], k: usize, order: usize, t: f64, active: usize) -> f64 {
    if order == 1 {
        return if k == active { 1.0 } else { 0.0 };
    }
    let p = order - 1;
    let mut value = 0.0;
    let d1 = tau[k + p] - tau[k];
    if d1 > 0.0 {
        value += (t - tau[k]) / d1 * recursion(tau, k, p, t, active);
    }
    let d2 = tau[k + order] - tau[k + 1];
    if d2 > 0.0 {
        value += (tau[k + order] - t) / d2 * recursion(tau, k + 1, p, t, active);
    }
    value
}

/// Nonzero basis values at `t`: returns the first index and `order` values
/// for bases `first..first + order`.
pub fn local_basis(t: f64, order: usize, grid: &KnotGrid) -> Result<(usize, [f64; MAX_ORDER])> {
    check_order(order)?;
    let span = grid.span_index(t)?;
    Ok(local_basis_in_span(t, span, order, grid))
}

/// As [`local_basis`] with the span already known. `t` must lie in the closed span.
pub(crate) fn local_basis_in_span(t: f64, span: usize, order: usize, grid: &KnotGrid) -> (usize, [f64; MAX_ORDER]) {
    // Knot vector index of the span's left end is span + order - 1; knots
    // beyond the boundary are clamped so they can be read from `knots`.
    let knots = grid.knots();
    let kn = |i: isize| -> f64 {
        let last = knots.len() as isize - 1;
        knots[i.clamp(0, last) as usize]
    };
    let s = span as isize;
    let mut values = [0.0; MAX_ORDER];
    let mut left = [0.0; MAX_ORDER];
    let mut right = [0.0; MAX_ORDER];
    values[0] = 1.0;
    for r in 1..order {
        left[r] = t - kn(s + 1 - r as isize);
        right[r] = kn(s + r as isize) - t;
        let mut saved = 0.0;
        for q in 0..r {
            let temp = values[q] / (right[q + 1] + left[r - q]);
            values[q] = saved + right[q + 1] * temp;
            saved = left[r - q] * temp;
        }
        values[r] = saved;
    }
    (span, values)
}

/// Full cubic basis row `(B_{(0,4)}(t), ..., B_{(K+2,4)}(t))`.
pub fn basis_row(t: f64, grid: &KnotGrid) -> Result<Vec<f64>> {
    let (first, values) = local_basis(t, CUBIC, grid)?;
    let mut row = vec![0.0; grid.basis_count(CUBIC)];
    row[first..first + CUBIC].copy_from_slice(&values[..CUBIC]);
    Ok(row)
}

/// Value of `sum_k coeffs[k] B_{(k, order)}(t)`.
pub fn spline_value(coeffs: &[f64], order: usize, t: f64, grid: &KnotGrid) -> Result<f64> {
    check_order(order)?;
    if coeffs.len() != grid.basis_count(order) {
        return Err(invalid(format!(
            "expected {} coefficients for order {order}, got {}",
            grid.basis_count(order),
            coeffs.len()
        )));
    }
    let (first, values) = local_basis(t, order, grid)?;
    Ok(values[..order]
        .iter()
        .zip(&coeffs[first..first + order])
        .map(|(b, c)| b * c)
        .sum())
}

/// Order-5 coefficients of the antiderivative of a cubic spline:
/// `int_{c0}^t sum_k gamma_k B_{(k,4)} = sum_k phi_k B_{(k,5)}(t)`.
pub fn antiderivative_coeffs(gamma: &[f64], grid: &KnotGrid) -> Result<Vec<f64>> {
    let n = grid.basis_count(CUBIC);
    if gamma.len() != n {
        return Err(invalid(format!("expected {n} cubic coefficients, got {}", gamma.len())));
    }
    let tau = grid.tau();
    let mut phi = Vec::with_capacity(n + 1);
    phi.push(0.0);
    let mut acc = 0.0;
    for (m, g) in gamma.iter().enumerate() {
        acc += g * (tau[m + 4] - tau[m]) / 4.0;
        phi.push(acc);
    }
    Ok(phi)
}
