//! Dense complex-coefficient polynomials and the universal positive-coefficient
//! families `((1+z)/2)^L` and its flattened variant.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coeffs[k]` multiplies `z^k`. Trailing exact zeros are trimmed, so the
/// leading coefficient is nonzero unless the polynomial is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl From<Vec<Complex64>> for Polynomial {
    fn from(coeffs: Vec<Complex64>) -> Self {
        Self::new(coeffs)
    }
}

impl From<Polynomial> for Vec<Complex64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn one() -> Self {
        Self::from_real(&[1.0])
    }

    /// Monic `prod (z - r)` over the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots.iter().fold(Self::one(), |acc, &r| {
            &acc * &Self::new(vec![-r, Complex64::new(1.0, 0.0)])
        })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Real parts of the coefficients.
    pub fn real_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of `z^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value at the unit-circle point `e^{2 pi i y}`.
    pub fn eval_circle(&self, y: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, 2.0 * PI * y))
    }

    /// Value and derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Sum of coefficients, i.e. the value at `z = 1`.
    pub fn coefficient_sum(&self) -> Complex64 {
        self.coeffs.iter().sum()
    }

    /// `sum |c_k|`, an upper bound for `|p|` on the closed unit disk.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `z^d p(1/z)` for `d >= deg p`.
    pub fn reflect(&self, d: usize) -> Self {
        assert!(self.degree().is_none_or(|deg| deg <= d));
        let mut out = vec![Complex64::new(0.0, 0.0); d + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[d - k] = c;
        }
        Self::new(out)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::new(Vec::new());
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// `((1+z)/2)^L`: binomial coefficients over `2^L`.
pub fn build_simple(power: usize) -> Polynomial {
    // Repeated averaging keeps every coefficient exact up to rounding of a
    // single halving per step.
    let mut c = vec![1.0];
    for _ in 0..power {
        let mut next = vec![0.0; c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k] += 0.5 * v;
            next[k + 1] += 0.5 * v;
        }
        c = next;
    }
    Polynomial::from_real(&c)
}

/// `(1 + z + ... + z^len-1) / len`.
pub fn flat(len: usize) -> Polynomial {
    assert!(len > 0);
    Polynomial::from_real(&vec![1.0 / len as f64; len])
}

/// `(1 + z + ... + z^{2L'})/(2L'+1) * ((1+z)/2)^{L'}` with `L' = floor(L/3)`.
///
/// Degree `3L' <= L`; coefficients `L'..=2L'` all equal `1/(2L'+1)`.
pub fn build_universal(power: usize) -> Result<Polynomial> {
    if power < 3 {
        return Err(Error::InvalidArgument(format!(
            "universal polynomial needs L >= 3, got {power}"
        )));
    }
    let reduced = power / 3;
    Ok(&flat(2 * reduced + 1) * &build_simple(reduced))
}
