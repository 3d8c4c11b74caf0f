//! Per-band certificates: replace the factors of the Toeplitz minimizer by
//! nonnegative low-degree polynomials, multiply in a flat block and a binomial
//! block, and read off the discrete measure `nu = sum beta_k delta_k`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{build_simple, flat, Polynomial};
use crate::roots::find_roots;
use crate::spectral::SpectralMeasure;
use crate::toeplitz::sigma_for_band;

/// Smallest admissible band size `n`.
pub const N0: usize = 72;

/// Rate constant `c = ln 2 / 100`.
pub const C: f64 = LN_2 / 100.0;

/// Roots with modulus up to `1 + INSIDE_TOL` are treated as inside the disk.
pub const INSIDE_TOL: f64 = 1e-9;

/// `sigma^2 <= SIGMA_ZERO_TOL * mu(R)` is treated as `sigma = 0`.
pub const SIGMA_ZERO_TOL: f64 = 1e-12;

/// Negative coefficients of the replaced product below this are defects.
const NEGATIVE_DEFECT: f64 = -1e-8;

/// Probability measure with finitely many atoms at nonnegative positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for AtomicMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<AtomicMeasure> for Vec<(f64, f64)> {
    fn from(m: AtomicMeasure) -> Self {
        m.atoms
    }
}

impl AtomicMeasure {
    /// `(position, weight)` pairs; sorted on construction.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("atomic measure has no atoms".into()));
        }
        if atoms.iter().any(|&(x, w)| !(x.is_finite() && x >= 0.0 && w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidArgument("atoms need finite nonnegative positions and positive weights".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("atom positions must be distinct".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)])
    }

    /// `sum_k beta_k delta_k`, dropping zero coefficients.
    pub fn from_coefficients(beta: &[f64]) -> Result<Self> {
        Self::new(
            beta.iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(k, b)| (k as f64, *b))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights().sum()
    }

    pub fn max_position(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.0)
    }

    /// Positions divided by `a`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {a}")));
        }
        Ok(Self { atoms: self.atoms.iter().map(|&(x, w)| (x / a, w)).collect() })
    }

    /// `nu^(y) = sum_k w_k e^{2 pi i y x_k}`.
    pub fn fourier(&self, y: f64) -> Complex64 {
        self.atoms.iter().map(|&(x, w)| Complex64::from_polar(w, 2.0 * PI * y * x)).sum()
    }
}

/// `E[(int f dnu)^2] = int |nu^|^2 dmu`, evaluated directly from the atoms of `nu`.
pub fn integral_second_moment(mu: &SpectralMeasure, nu: &AtomicMeasure) -> f64 {
    let fold = |y: f64| 2.0 * nu.fourier(y).norm_sqr();
    let rounding = nu.len() as f64 * f64::EPSILON;
    mu.integrate_folded(fold, nu.max_position(), 2.0 * rounding * rounding)
}

/// Distance from `z` to the left unit semicircle `{|w| = 1, Re w <= 0}`.
pub fn dist_to_left_semicircle(z: Complex64) -> f64 {
    let arg = z.arg().abs();
    if z.norm() > 0.0 && arg >= FRAC_PI_2 {
        (1.0 - z.norm()).abs()
    } else {
        (z - Complex64::i()).norm().min((z + Complex64::i()).norm())
    }
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Nonnegative `alpha` with `sum alpha = 1` and `sum alpha_j z^j = 0`.
fn convex_zero(z: Complex64) -> Option<[f64; 4]> {
    let pts = [Complex64::new(1.0, 0.0), z, z * z, z * z * z];
    let scale = pts.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let accept = |alpha: [f64; 4]| -> Option<[f64; 4]> {
        if alpha.iter().any(|a| !a.is_finite() || *a < -1e-12) {
            return None;
        }
        let clipped = alpha.map(|a| a.max(0.0));
        let s: f64 = clipped.iter().sum();
        let alpha = clipped.map(|a| a / s);
        let residual: Complex64 = alpha.iter().zip(&pts).map(|(a, p)| p * *a).sum();
        (residual.norm() <= 1e-10).then_some(alpha)
    };

    for tri in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
        let [i, j, k] = tri;
        let (a, b, c) = (pts[i], pts[j], pts[k]);
        let det = cross(b - a, c - a);
        if det.abs() <= 1e-12 * scale * scale {
            continue;
        }
        let mut alpha = [0.0; 4];
        alpha[i] = cross(b, c) / det;
        alpha[j] = cross(c, a) / det;
        alpha[k] = cross(a, b) / det;
        if let Some(found) = accept(alpha) {
            return Some(found);
        }
    }
    // Collinear points: look for a segment through the origin.
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let (a, b) = (pts[i], pts[j]);
        let d = b - a;
        if d.norm() <= 1e-15 {
            continue;
        }
        let t = -(a.re * d.re + a.im * d.im) / d.norm_sqr();
        let mut alpha = [0.0; 4];
        alpha[i] = 1.0 - t;
        alpha[j] = t;
        if let Some(found) = accept(alpha) {
            return Some(found);
        }
    }
    None
}

/// Replacement `L~` for the linear factor of a normalized root `z`.
///
/// `inside` selects `z - w` (root in the closed disk) or `1 - z w` (reciprocal
/// of a root outside). Factors far from the left semicircle become `1`; the
/// others become `U` or `w^3 U(1/w)` with nonnegative unit-sum coefficients
/// and `U(z) = 0`.
pub fn replace_factor(root: Complex64, inside: bool) -> Result<Polynomial> {
    if !(root.norm() <= 1.0 + INSIDE_TOL) {
        return Err(Error::InvalidArgument(format!("normalized root {root} lies outside the unit disk")));
    }
    if dist_to_left_semicircle(root) >= 0.5 {
        return Ok(Polynomial::one());
    }
    let alpha = convex_zero(root)
        .ok_or_else(|| Error::Defect(format!("no convex combination of 1, z, z^2, z^3 vanishes at z = {root}")))?;
    let coeffs = if inside { alpha } else { [alpha[3], alpha[2], alpha[1], alpha[0]] };
    Ok(Polynomial::from_real(&coeffs))
}

/// Product of replaced factors, with tiny negative coefficients clamped.
pub fn build_p_tilde(roots: &[Complex64], inside: &[bool]) -> Result<Polynomial> {
    if roots.len() != inside.len() {
        return Err(Error::InvalidArgument("roots and inside flags differ in length".into()));
    }
    let mut p = Polynomial::one();
    for (&z, &flag) in roots.iter().zip(inside) {
        p = &p * &replace_factor(z, flag)?;
    }
    let mut c = p.real_coeffs();
    if let Some(worst) = c.iter().copied().filter(|v| *v < NEGATIVE_DEFECT).reduce(f64::min) {
        return Err(Error::Defect(format!("replaced product has coefficient {worst}")));
    }
    c.iter_mut().for_each(|v| *v = v.max(0.0));
    let s: f64 = c.iter().sum();
    c.iter_mut().for_each(|v| *v /= s);
    Ok(Polynomial::from_real(&c))
}

/// `Q = flat(m + 4N + 1) * ((1 + z)/2)^m * P~`.
pub fn build_q(p_tilde: &Polynomial, big_n: usize, m: usize) -> Polynomial {
    let block = &flat(m + 4 * big_n + 1) * &build_simple(m);
    &block * p_tilde
}

/// Result of sampling `|Q| - 6^N 2^{-m/2} |P|` on the left semicircle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemicircleReport {
    pub samples: usize,
    pub max_excess: f64,
    pub passes: bool,
}

/// Samples `z = e^{2 pi i t}` for `t` evenly spaced in `[1/4, 3/4]`.
pub fn verify_semicircle_bound(q: &Polynomial, p: &Polynomial, big_n: usize, m: usize, samples: usize) -> SemicircleReport {
    let factor = 6f64.powi(big_n as i32) * 2f64.powf(-(m as f64) / 2.0);
    let count = samples.max(1);
    let max_excess = (0..count)
        .map(|j| {
            let t = if count == 1 { 0.5 } else { 0.25 + 0.5 * j as f64 / (count - 1) as f64 };
            q.eval_circle(t).norm() - factor * p.eval_circle(t).norm()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    SemicircleReport { samples: count, max_excess, passes: max_excess <= 1e-9 }
}

/// Structural and analytic checks evaluated while building a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub coefficients_nonnegative: bool,
    pub unit_mass_error: f64,
    pub flat_block_max_error: f64,
    pub flat_block_ok: bool,
    pub leading_modulus: f64,
    pub leading_ok: bool,
    pub energy_ok: bool,
    pub energy_chain_ok: bool,
    pub semicircle: SemicircleReport,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.coefficients_nonnegative
            && self.unit_mass_error <= 1e-12
            && self.flat_block_ok
            && self.leading_ok
            && self.energy_ok
            && self.energy_chain_ok
            && self.semicircle.passes
    }
}

/// Per-band bound on `P{f + phi >= 0 on supp nu, int (f + phi) dnu <= threshold}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub c: f64,
    /// Band scale `a`; positions of `nu` are multiples of `1/a`.
    pub scale: f64,
    pub sigma: f64,
    pub nu: AtomicMeasure,
    pub energy: f64,
    pub energy_bound: f64,
    pub threshold: f64,
    /// `(n e^{-cn})^{N+1}`, or 0 when `sigma = 0`. Not clamped.
    pub prob_bound: f64,
    pub flat_lo: usize,
    pub flat_hi: usize,
    /// Coefficients `beta_k` of `Q`.
    pub q: Vec<f64>,
    /// Unit-norm Toeplitz minimizer `P`.
    pub minimizer: Vec<f64>,
    pub report: VerificationReport,
}

impl Certificate {
    /// `min(prob_bound, 1)`.
    pub fn prob_bound_clamped(&self) -> f64 {
        self.prob_bound.min(1.0)
    }

    pub fn q_polynomial(&self) -> Polynomial {
        Polynomial::from_real(&self.q)
    }

    /// Largest deviation of `beta_k` from `1/(m + 4N + 1)` on the flat block.
    pub fn flat_block_error(&self) -> f64 {
        flat_block_error(&self.q, self.flat_lo, self.flat_hi)
    }
}

fn flat_block_error(beta: &[f64], lo: usize, hi: usize) -> f64 {
    let value = 1.0 / (hi + 1) as f64;
    (lo..=hi).map(|k| (beta.get(k).copied().unwrap_or(0.0) - value).abs()).fold(0.0, f64::max)
}

/// `(n e^{-cn})^{N+1}`.
pub fn prob_bound_formula(n: usize) -> f64 {
    let big_n = n / 23;
    (n as f64 * (-C * n as f64).exp()).powi(big_n as i32 + 1)
}

/// Normalized roots `z_k` with inside flags and the leading factor `|a|`.
///
/// Coefficients below `1e-13 max|p_k|` at the top are dropped; the missing
/// roots sit at infinity and normalize to `z = 0`.
fn normalized_roots(p: &Polynomial, slots: usize) -> Result<(Vec<Complex64>, Vec<bool>, f64)> {
    let mut c = p.coeffs().to_vec();
    let cutoff = 1e-13 * p.max_abs_coeff();
    while c.len() > 1 && c.last().is_some_and(|v| v.norm() <= cutoff) {
        c.pop();
    }
    let trimmed = Polynomial::new(c);
    let lead = trimmed.coeffs().last().copied().unwrap_or_default();
    let found = if trimmed.degree().unwrap_or(0) >= 1 { find_roots(&trimmed)? } else { Vec::new() };

    let mut zs = Vec::with_capacity(slots);
    let mut inside = Vec::with_capacity(slots);
    let mut a = lead;
    for r in found {
        if r.norm() <= 1.0 + INSIDE_TOL {
            zs.push(r);
            inside.push(true);
        } else {
            a *= -r;
            zs.push(r.inv());
            inside.push(false);
        }
    }
    while zs.len() < slots {
        zs.push(Complex64::new(0.0, 0.0));
        inside.push(false);
    }
    Ok((zs, inside, a.norm()))
}

/// Certificate for a measure supported in `(1/4, 1/2]` at size `n >= N0`.
pub fn certify_band(mu_unit: &SpectralMeasure, n: usize) -> Result<Certificate> {
    if n < N0 {
        return Err(Error::InvalidArgument(format!("band size n = {n} is below n0 = {N0}")));
    }
    let big_n = n / 23;
    let m = 8 * big_n;
    let spectrum = sigma_for_band(mu_unit, big_n)?;
    let total = mu_unit.total_mass();
    let degenerate = spectrum.sigma2 <= SIGMA_ZERO_TOL * total;
    let sigma2 = if degenerate { 0.0 } else { spectrum.sigma2 };
    let sigma = sigma2.sqrt();

    let p = spectrum.minimizer;
    let (zs, inside, leading) = normalized_roots(&p, big_n)?;
    let p_tilde = build_p_tilde(&zs, &inside)?;
    let q = build_q(&p_tilde, big_n, m);
    let beta = q.real_coeffs();

    let flat_lo = m + 3 * big_n;
    let flat_hi = m + 4 * big_n;
    let flat_block_max_error = flat_block_error(&beta, flat_lo, flat_hi);
    let unit_mass_error = (beta.iter().sum::<f64>() - 1.0).abs();
    let nu = AtomicMeasure::from_coefficients(&beta)?;

    let energy = mu_unit.energy_integral(&q);
    let energy_bound = 2f64.powi(-2 * big_n as i32) * sigma2;
    let energy_ok = energy <= energy_bound * (1.0 + 1e-9) + 1e-12 * sigma2 + 1e-15 * total;
    let energy_chain_ok = 2f64.powi(-2 * big_n as i32) <= (-6.0 * C * n as f64).exp();
    let report = VerificationReport {
        coefficients_nonnegative: beta.iter().all(|b| *b >= 0.0),
        unit_mass_error,
        flat_block_max_error,
        flat_block_ok: flat_block_max_error <= 1e-12,
        leading_modulus: leading,
        leading_ok: leading >= 2f64.powi(-(big_n as i32)) * (1.0 - 1e-9),
        energy_ok,
        energy_chain_ok,
        semicircle: verify_semicircle_bound(&q, &p, big_n, m, 512),
    };
    if !report.passed() {
        return Err(Error::Defect(format!("certificate checks failed at n = {n}: {report:?}")));
    }

    Ok(Certificate {
        n,
        big_n,
        m,
        c: C,
        scale: 1.0,
        sigma,
        nu,
        energy,
        energy_bound,
        threshold: (-C * n as f64).exp() * sigma,
        prob_bound: if degenerate { 0.0 } else { prob_bound_formula(n) },
        flat_lo,
        flat_hi,
        q: beta,
        minimizer: p.real_coeffs(),
        report,
    })
}

/// Moves a unit-band certificate to the band of scale `a`.
pub fn rescale_certificate(cert: &Certificate, a: f64) -> Result<Certificate> {
    let mut out = cert.clone();
    out.nu = cert.nu.scaled(a)?;
    out.scale = cert.scale * a;
    Ok(out)
}
