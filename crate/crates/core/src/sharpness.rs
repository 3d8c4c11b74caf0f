//! Lower bounds under a Remez-type condition on `rho_n`, and an explicit
//! atomic gap measure for which that condition can be checked directly.

use std::f64::consts::{LN_10, LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralMeasure;
use crate::toeplitz::rho_with_limit;

/// Largest `n` for which `rho_n` of the example measure is computed.
pub const LAGRANGE_MAX_N: usize = 8;

/// `p0 = P{|g| > 1}` for a standard normal `g`.
pub fn p0() -> f64 {
    libm::erfc(1.0 / SQRT_2)
}

/// `C~ = C + 7 + 1/p0`.
pub fn c_tilde(c: f64) -> f64 {
    c + 7.0 + 1.0 / p0()
}

/// Atoms `(n + k)/(4 pi n)` of mass `1/(n 2^n)` for `2 <= n <= n_max`,
/// `1 <= k <= n`. Coincident frequencies from different generations are kept
/// as separate atoms.
pub fn example_measure(n_max: usize) -> Result<SpectralMeasure> {
    if n_max < 3 {
        return Err(Error::InvalidArgument(format!("example measure needs n_max >= 3, got {n_max}")));
    }
    let atoms: Vec<(f64, f64)> = (2..=n_max)
        .flat_map(|n| {
            let mass = 1.0 / (n as f64 * 2f64.powi(n as i32));
            (1..=n).map(move |k| ((n + k) as f64 / (4.0 * PI * n as f64), mass))
        })
        .collect();
    SpectralMeasure::atomic(&atoms)
}

/// Nodes of generation `g`: `(g + k)/(4 pi g)` for `1 <= k <= g`.
fn generation(g: usize) -> Vec<f64> {
    (1..=g).map(|k| (g + k) as f64 / (4.0 * PI * g as f64)).collect()
}

/// Lagrange basis values `l_k(0)` for the given nodes.
fn lagrange_at_zero(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, y)| y / (y - nodes[k]))
                .product()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangeReport {
    pub n: usize,
    pub n_max: usize,
    pub rho: f64,
    /// `10^{-3n}`.
    pub target: f64,
    pub rho_ok: bool,
    /// Successive terms of the interpolation estimate: `P(0) = 1`,
    /// `sum |l_k(0) P(y_k)|`, `3^{2n+1}(2n+2) sum |P(y_k)|`,
    /// `3^{2n+1} 2^{n+2} (n+1)^2 int |P| dmu`, `10^{3n} (int |P|^2 dmu)^{1/2}`.
    pub chain: Vec<f64>,
    pub chain_ok: bool,
    pub condition: f64,
}

impl LagrangeReport {
    pub fn passed(&self) -> bool {
        self.rho_ok && self.chain_ok
    }
}

/// Computes `rho_n` of `example_measure(n_max)` and re-derives the
/// interpolation estimate `1 <= 10^{3n} rho_n` at the generation-`(n+1)` atoms.
pub fn verify_lagrange_bound(n: usize, n_max: usize) -> Result<LagrangeReport> {
    if n_max < n + 1 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be at least n + 1 = {}", n + 1)));
    }
    let mu = example_measure(n_max)?;
    let value = rho_with_limit(&mu, n, LAGRANGE_MAX_N)?;
    let p = value.polynomial();
    let eval = |y: f64| p.eval(y.into()).re;
    let rho = value.rho2.sqrt();
    let target = 10f64.powi(-3 * n as i32);

    let nodes = generation(n + 1);
    let ell = lagrange_at_zero(&nodes);
    let at_nodes: Vec<f64> = nodes.iter().map(|y| eval(*y).abs()).collect();
    let three = 3f64.powi(2 * n as i32 + 1);
    let l1: f64 = mu.atoms().iter().map(|a| a.mass * (eval(a.freq).abs() + eval(-a.freq).abs())).sum();
    let chain = vec![
        eval(0.0),
        ell.iter().zip(&at_nodes).map(|(l, v)| l.abs() * v).sum(),
        three * (2 * n + 2) as f64 * at_nodes.iter().sum::<f64>(),
        three * 2f64.powi(n as i32 + 2) * ((n + 1) * (n + 1)) as f64 * l1,
        10f64.powi(3 * n as i32) * rho,
    ];
    let chain_ok = chain.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9));
    Ok(LagrangeReport { n, n_max, rho, target, rho_ok: rho >= target, chain, chain_ok, condition: value.condition })
}

/// Lower bound on `P{f >= 0 on [0, L]}` for a measure with
/// `rho_n >= e^{-Cn} mu(R)^{1/2}` and support radius `R`.
///
/// Quantities that overflow are carried as natural logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundTrace {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    /// `2 pi R L`, the length after normalizing the radius to `1/(2 pi)`.
    pub length_normalized: f64,
    /// `max(length_normalized, 1)`; the probability is non-increasing in `L`.
    pub length_used: f64,
    pub p0: f64,
    pub c_tilde: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// `ln a = -C K`.
    pub ln_a: f64,
    /// `ln alpha = ln(a/2) - L`.
    pub ln_alpha: f64,
    /// `ln(p0 (e^{-CK-L}/(6K))^K)`, which must dominate `-C~ K^2`.
    pub ln_regression_floor: f64,
    pub regression_ok: bool,
    /// `sum_{k>K} e^{-k}`, the tail relative to `e^{-C~ K^2}`.
    pub tail_ratio: f64,
    pub ln_bound: f64,
    pub log10_bound: f64,
    /// `e^{ln_bound}`; underflows to 0 for realistic inputs.
    pub bound: f64,
}

/// Smallest integer `K >= max(1, L, 2e^{2C~+1} L, e^{C+2C~+2} L)`.
pub fn choose_k(c: f64, length: f64) -> f64 {
    let ct = c_tilde(c);
    let need = [1.0, length, 2.0 * (2.0 * ct + 1.0).exp() * length, (c + 2.0 * ct + 2.0).exp() * length];
    need.iter().copied().fold(0.0, f64::max).ceil()
}

/// `sum_{k=K+1}^{K+terms} e^{-a_k^2/2} / e^{-C~ K^2}` with
/// `a_k = (2(C~ K^2 + k))^{1/2}` evaluated explicitly.
pub fn tail_sum_ratio(c_tilde: f64, k: f64, terms: usize) -> f64 {
    let base = c_tilde * k * k;
    (1..=terms)
        .map(|j| {
            let a = (2.0 * (base + k + j as f64)).sqrt();
            (-(a * a) / 2.0 + base).exp()
        })
        .sum()
}

pub fn lower_bound(c: f64, length: f64, radius: f64) -> Result<LowerBoundTrace> {
    for (name, v) in [("C", c), ("R", radius)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if !(length >= 1.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!("lower bound needs L >= 1, got {length}")));
    }
    let length_normalized = 2.0 * PI * radius * length;
    let length_used = length_normalized.max(1.0);
    let p0 = p0();
    let ct = c_tilde(c);
    let k = choose_k(c, length_used);
    let ln_a = -c * k;
    let ln_alpha = ln_a - LN_2 - length_used;
    let ln_regression_floor = p0.ln() + k * (-c * k - length_used - (6.0 * k).ln());
    let tail_ratio = (-(k + 1.0)).exp() / (1.0 - (-1.0f64).exp());
    let ln_inner = -ct * k * k + (-tail_ratio).ln_1p();
    let ln_bound = -LN_2 + ln_inner;
    Ok(LowerBoundTrace {
        c,
        length,
        radius,
        length_normalized,
        length_used,
        p0,
        c_tilde: ct,
        k,
        ln_a,
        ln_alpha,
        ln_regression_floor,
        regression_ok: ln_regression_floor >= -ct * k * k,
        tail_ratio,
        ln_bound,
        log10_bound: ln_bound / LN_10,
        bound: ln_bound.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_measure_shape() {
        assert!(example_measure(2).is_err());
        let mu = example_measure(3).unwrap();
        assert_eq!(mu.atoms().len(), 5);
        assert!((mu.half_mass() - 0.375).abs() < 1e-15);
        let big = example_measure(10).unwrap();
        assert!(big.atoms().iter().all(|a| a.freq > 1.0 / (4.0 * PI) && a.freq <= 1.0 / (2.0 * PI) + 1e-15));
        assert!(big.gap_radius() >= 1.0 / (4.0 * PI) - 1e-12);
    }

    #[test]
    fn p0_and_c_tilde() {
        assert!((p0() - 0.317_310_507_862_914_1).abs() < 1e-15);
        assert!((c_tilde(1.0) - (8.0 + 1.0 / p0())).abs() < 1e-12);
        assert!((c_tilde(1.0) - 11.1515).abs() < 1e-3);
    }

    #[test]
    fn lagrange_examples() {
        for n in [1, 3] {
            let r = verify_lagrange_bound(n, 10).unwrap();
            assert!(r.passed(), "{r:?}");
            assert!(r.rho >= 10f64.powi(-3 * n as i32));
        }
        let zero = verify_lagrange_bound(0, 10).unwrap();
        let mu = example_measure(10).unwrap();
        assert!((zero.rho * zero.rho - mu.total_mass()).abs() < 1e-15);
        assert!(verify_lagrange_bound(3, 3).is_err());
        assert!(matches!(verify_lagrange_bound(9, 12), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn lagrange_weights_reproduce_polynomials() {
        let nodes = generation(4);
        let ell = lagrange_at_zero(&nodes);
        // Degree-3 polynomial 1 + y - 2 y^3 recovered at 0.
        let p = |y: f64| 1.0 + y - 2.0 * y.powi(3);
        let s: f64 = ell.iter().zip(&nodes).map(|(l, y)| l * p(*y)).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_examples() {
        let r = lower_bound(1.0, 1.0, 1.0 / (2.0 * PI)).unwrap();
        assert!(r.regression_ok);
        assert!(r.tail_ratio <= 0.5);
        assert!(r.log10_bound < 0.0 && r.log10_bound.is_finite());
        let logs: Vec<f64> =
            [1.0, 2.0, 4.0].iter().map(|l| lower_bound(1.0, *l, 1.0 / (2.0 * PI)).unwrap().log10_bound).collect();
        assert!(logs[0] > logs[1] && logs[1] > logs[2]);
        let harder = lower_bound(2.0, 1.0, 1.0 / (2.0 * PI)).unwrap();
        assert!(harder.log10_bound <= r.log10_bound);
        assert!(lower_bound(1.0, 0.5, 1.0).is_err());
        assert!(lower_bound(0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn k_meets_every_constraint() {
        for (c, l) in [(0.1, 1.0), (1.0, 3.0), (2.5, 10.0)] {
            let k = choose_k(c, l);
            let ct = c_tilde(c);
            assert!(k >= l && k >= 2.0 * (2.0 * ct + 1.0).exp() * l && k >= (c + 2.0 * ct + 2.0).exp() * l);
            assert_eq!(k.fract(), 0.0);
        }
    }

    #[test]
    fn explicit_tail_is_geometric() {
        for k in [1.0, 2.0, 5.0] {
            let s = tail_sum_ratio(1.5, k, 200);
            assert!(s <= 0.5, "{s}");
            let geometric = (-(k + 1.0)).exp() / (1.0 - (-1.0f64).exp());
            assert!((s - geometric).abs() < 1e-9 * geometric.max(1e-300) + 1e-12);
        }
    }
}
