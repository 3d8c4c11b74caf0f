//! The two quadratic minimizations behind the bounds: the least eigenvalue of
//! the Toeplitz covariance matrix of consecutive values, and the minimal
//! `L^2(mu)` norm of a polynomial with constant term one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, min_eigenpair, symmetric_eigen, Matrix};
use crate::poly::Polynomial;
use crate::spectral::SpectralMeasure;

/// Default largest `n` accepted by [`rho`].
pub const RHO_MAX_N: usize = 12;

/// Condition estimate above which the moment matrix is declared unusable.
pub const RHO_MAX_CONDITION: f64 = 1e15;

/// Least eigenvalue of the `(N+1) x (N+1)` Toeplitz matrix and its minimizing
/// polynomial, normalized so that `sum |a_k|^2 = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToeplitzSpectrum {
    pub sigma2: f64,
    pub minimizer: Polynomial,
    pub dimension: usize,
}

/// `rho_n^2 = min int |P|^2 dmu` over `P(y) = 1 + a_1 y + ... + a_n y^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoValue {
    pub n: usize,
    pub rho2: f64,
    /// `a_1..a_n` of the minimizer.
    pub minimizer_moments: Vec<f64>,
    /// Ratio of extreme retained eigenvalues of the equilibrated moment block.
    pub condition: f64,
}

impl RhoValue {
    /// The minimizing polynomial `1 + a_1 y + ... + a_n y^n`.
    pub fn polynomial(&self) -> Polynomial {
        let mut c = vec![1.0];
        c.extend(&self.minimizer_moments);
        Polynomial::from_real(&c)
    }
}

/// `A_ij = k(i - j)` for `0 <= i, j <= N`.
pub fn build_toeplitz(mu: &SpectralMeasure, n: usize) -> Matrix {
    let row: Vec<f64> = (0..=n).map(|j| mu.covariance(j as f64)).collect();
    Matrix::from_fn(n + 1, |i, j| row[i.abs_diff(j)])
}

/// Least Toeplitz eigenvalue for any measure.
pub fn toeplitz_spectrum(mu: &SpectralMeasure, n: usize) -> Result<ToeplitzSpectrum> {
    let a = build_toeplitz(mu, n);
    let (value, vector) = min_eigenpair(&a)?;
    Ok(ToeplitzSpectrum {
        sigma2: value.max(0.0),
        minimizer: Polynomial::from_real(&vector),
        dimension: n + 1,
    })
}

/// Least Toeplitz eigenvalue for a measure supported in `(1/4, 1/2]`.
pub fn sigma_for_band(mu_unit: &SpectralMeasure, n: usize) -> Result<ToeplitzSpectrum> {
    mu_unit.check_support(0.25, 0.5)?;
    toeplitz_spectrum(mu_unit, n)
}

/// `rho_n` of `mu`, with the default conditioning gate.
pub fn rho(mu: &SpectralMeasure, n: usize) -> Result<RhoValue> {
    rho_with_limit(mu, n, RHO_MAX_N)
}

pub fn rho_with_limit(mu: &SpectralMeasure, n: usize, max_n: usize) -> Result<RhoValue> {
    // The minimum is invariant under y -> y / R, which equilibrates the moments.
    let scale = match mu.support_radius() {
        r if r > 0.0 => r,
        _ => 1.0,
    };
    let moments: Vec<f64> = (0..=2 * n).map(|j| mu.moment(j, scale)).collect();
    let mut value = rho_from_moments(&moments, n, max_n)?;
    for (k, a) in value.minimizer_moments.iter_mut().enumerate() {
        *a /= scale.powi(k as i32 + 1);
    }
    Ok(value)
}

/// Solves `min v^T G v` subject to `v_0 = 1` for the Hankel matrix
/// `G_jk = moments[j + k]`.
///
/// The unconstrained block is diagonally equilibrated and inverted through
/// its eigendecomposition; eigenvalues below `1e-13` of the largest are
/// discarded, which gives the minimum over the affine slice when `G` is
/// singular.
pub fn rho_from_moments(moments: &[f64], n: usize, max_n: usize) -> Result<RhoValue> {
    if moments.len() < 2 * n + 1 {
        return Err(Error::InvalidArgument(format!("need {} moments, got {}", 2 * n + 1, moments.len())));
    }
    let g00 = moments[0];
    if n == 0 {
        return Ok(RhoValue { n, rho2: g00, minimizer_moments: Vec::new(), condition: 1.0 });
    }

    let diag: Vec<f64> = (1..=n)
        .map(|i| match moments[2 * i] {
            d if d > 0.0 => 1.0 / d.sqrt(),
            _ => 1.0,
        })
        .collect();
    let block = Matrix::from_fn(n, |i, j| diag[i] * diag[j] * moments[i + j + 2]);
    let cross: Vec<f64> = (0..n).map(|i| diag[i] * moments[i + 1]).collect();

    let eig = symmetric_eigen(&block)?;
    let largest = eig.values.last().copied().unwrap_or(0.0);
    let cutoff = 1e-13 * largest;
    let kept: Vec<usize> = (0..n).filter(|&i| eig.values[i] > cutoff).collect();
    let condition = match kept.first() {
        Some(&i) => largest / eig.values[i],
        None => 1.0,
    };
    if n > max_n || condition > RHO_MAX_CONDITION {
        return Err(Error::IllConditioned { n, condition, max_n });
    }

    // w = -H^+ c in equilibrated coordinates.
    let mut w = vec![0.0; n];
    for &i in &kept {
        let u = &eig.vectors[i];
        let proj = kahan_sum(u.iter().zip(&cross).map(|(a, b)| a * b)) / eig.values[i];
        for (wk, uk) in w.iter_mut().zip(u) {
            *wk -= proj * uk;
        }
    }
    let reduction = kahan_sum(cross.iter().zip(&w).map(|(c, x)| c * x));
    let rho2 = (g00 + reduction).max(0.0);
    let minimizer_moments = w.iter().zip(&diag).map(|(x, d)| x * d).collect();
    Ok(RhoValue { n, rho2, minimizer_moments, condition })
}
