//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

/// All B-spline values of one order at `t` on knot vector `tau`, by the
/// bottom-up triangular table. Order-1 indicators are left-open
/// `(tau_i, tau_{i+1}]`, except that `t` equal to the first knot belongs to
/// the first non-empty interval.
pub fn deboor_table(t: f64, order: usize, tau: &[f64]) -> Vec<f64> {
    let first_nonempty = (0..tau.len() - 1).find(|&i| tau[i + 1] > tau[i]).unwrap();
    let mut b: Vec<f64> = (0..tau.len() - 1)
        .map(|i| {
            let inside = tau[i] < t && t <= tau[i + 1];
            let at_start = t == tau[0] && i == first_nonempty;
            if inside || at_start {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for p in 2..=order {
        let next: Vec<f64> = (0..tau.len() - p)
            .map(|i| {
                let mut v = 0.0;
                let d1 = tau[i + p - 1] - tau[i];
                if d1 > 0.0 {
                    v += (t - tau[i]) / d1 * b[i];
                }
                let d2 = tau[i + p] - tau[i + 1];
                if d2 > 0.0 {
                    v += (tau[i + p] - t) / d2 * b[i + 1];
                }
                v
            })
            .collect();
        b = next;
    }
    b
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Integral over `[a, b]` split at the given breakpoints.
pub fn piecewise_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&c| c > a && c < b));
    pts.push(b);
    pts.windows(2).map(|w| adaptive_simpson(f, w[0], w[1], tol)).sum()
}

/// Bisection for an increasing function with `f(a) < 0 < f(b)`.
pub fn bisection<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Kolmogorov–Smirnov sup distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(mut sample: Vec<f64>, cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}
