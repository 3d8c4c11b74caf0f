//! Gauss–Legendre nodes and adaptive composite Simpson integration.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[lo, hi]`.
pub fn gauss_legendre(count: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    assert!(count > 0, "need at least one node");
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut out = Vec::with_capacity(count);
    let n = count as f64;
    for i in 0..count {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid - half * x, half * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Composite Simpson rule with panel doubling.
///
/// Starts from `initial_panels` (rounded up to even) and doubles until the
/// Richardson error estimate `|S_2n - S_n| / 15` drops below
/// `abs_tol(S_2n)`, or `max_panels` is reached. Returns the estimate and the
/// final error estimate.
pub fn simpson_adaptive<F, T>(
    f: F,
    lo: f64,
    hi: f64,
    initial_panels: usize,
    max_panels: usize,
    abs_tol: T,
) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    if hi <= lo {
        return (0.0, 0.0);
    }
    let mut panels = initial_panels.max(2);
    if panels % 2 == 1 {
        panels += 1;
    }
    let h = (hi - lo) / panels as f64;
    let ends = f(lo) + f(hi);
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..panels {
        let v = f(lo + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    let mut estimate = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
    let mut error = f64::INFINITY;
    while panels < max_panels {
        let finer = panels * 2;
        let h = (hi - lo) / finer as f64;
        // Old odd and even nodes are all even nodes of the refined grid.
        even += odd;
        odd = (0..panels).map(|i| f(lo + (2 * i + 1) as f64 * h)).sum();
        let refined = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
        error = (refined - estimate).abs() / 15.0;
        estimate = refined;
        panels = finer;
        if error <= abs_tol(estimate) {
            break;
        }
    }
    (estimate, error)
}
