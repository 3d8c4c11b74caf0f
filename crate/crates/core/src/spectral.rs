//! Symmetric spectral measures built from atoms and piecewise-constant densities.
//!
//! Only the positive half-line is stored; the measure is implicitly mirrored
//! to the negative half-line, so `total_mass` is twice the stored mass.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::kahan_sum;
use crate::poly::Polynomial;
use crate::quadrature::{gauss_legendre, simpson_adaptive};

/// Point mass at `+freq` (and, implicitly, at `-freq`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub freq: f64,
    pub mass: f64,
}

/// Constant density `height` on `[lo, hi]` (and on `[-hi, -lo]`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    #[serde(rename = "from")]
    pub lo: f64,
    #[serde(rename = "to")]
    pub hi: f64,
    pub height: f64,
}

impl DensityPiece {
    pub fn mass(&self) -> f64 {
        self.height * (self.hi - self.lo)
    }
}

#[derive(Deserialize)]
struct MeasureDocument {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    density: Vec<DensityPiece>,
}

impl TryFrom<MeasureDocument> for SpectralMeasure {
    type Error = Error;

    fn try_from(doc: MeasureDocument) -> Result<Self> {
        SpectralMeasure::new(doc.atoms, doc.density)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDocument")]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
}

/// Dyadic band index `k >= 2`; the band with scale `a = 2^k delta` covers
/// frequencies in `(a/4, a/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BandId(u32);

impl BandId {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("band index must be >= 2, got {k}")));
        }
        Ok(Self(k))
    }

    pub fn k(self) -> u32 {
        self.0
    }

    pub fn scale(self, delta: f64) -> f64 {
        delta * 2f64.powi(self.0 as i32)
    }
}

/// Parses and validates a measure document.
pub fn parse_measure(text: &str) -> Result<SpectralMeasure> {
    let doc: MeasureDocument = serde_json::from_str(text)?;
    SpectralMeasure::try_from(doc)
}

impl SpectralMeasure {
    /// Validated, nonempty measure. Atoms and pieces are sorted.
    pub fn new(atoms: Vec<Atom>, density: Vec<DensityPiece>) -> Result<Self> {
        let mu = Self::with_parts(atoms, density)?;
        if mu.total_mass() <= 0.0 {
            return Err(Error::InvalidMeasure("empty measure".into()));
        }
        Ok(mu)
    }

    /// Purely atomic measure from `(freq, mass)` pairs.
    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            atoms.iter().map(|&(freq, mass)| Atom { freq, mass }).collect(),
            Vec::new(),
        )
    }

    /// Single density piece of the given height.
    pub fn uniform(lo: f64, hi: f64, height: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![DensityPiece { lo, hi, height }])
    }

    /// Validates structure but allows the zero measure (empty dyadic bands).
    fn with_parts(mut atoms: Vec<Atom>, mut density: Vec<DensityPiece>) -> Result<Self> {
        for a in &atoms {
            if !(a.freq.is_finite() && a.freq > 0.0) {
                return Err(Error::InvalidMeasure(format!("atom frequency must be positive, got {}", a.freq)));
            }
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::InvalidMeasure(format!("atom mass must be positive, got {}", a.mass)));
            }
        }
        for p in &density {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo >= 0.0 && p.lo < p.hi) {
                return Err(Error::InvalidMeasure(format!("density piece needs 0 <= from < to, got [{}, {}]", p.lo, p.hi)));
            }
            if !(p.height.is_finite() && p.height >= 0.0) {
                return Err(Error::InvalidMeasure(format!("density height must be nonnegative, got {}", p.height)));
            }
        }
        atoms.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        density.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if let Some(w) = density.windows(2).find(|w| w[0].hi > w[1].lo) {
            return Err(Error::InvalidMeasure(format!(
                "overlapping density pieces [{}, {}] and [{}, {}]",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            )));
        }
        Ok(Self { atoms, density })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    pub fn is_atomic(&self) -> bool {
        self.density.iter().all(|p| p.height == 0.0)
    }

    /// True for the zero measure, which only arises as an empty dyadic band.
    pub fn is_empty(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// Mass on the positive half-line.
    pub fn half_mass(&self) -> f64 {
        kahan_sum(self.atoms.iter().map(|a| a.mass).chain(self.density.iter().map(DensityPiece::mass)))
    }

    pub fn total_mass(&self) -> f64 {
        2.0 * self.half_mass()
    }

    /// `sup { delta >= 0 : mu([-delta, delta]) = 0 }`.
    pub fn gap_radius(&self) -> f64 {
        let atom = self.atoms.first().map(|a| a.freq);
        let piece = self.density.iter().filter(|p| p.height > 0.0).map(|p| p.lo).reduce(f64::min);
        match (atom, piece) {
            (Some(a), Some(p)) => a.min(p),
            (Some(a), None) => a,
            (None, Some(p)) => p,
            (None, None) => 0.0,
        }
    }

    /// Largest `delta` with `mu([-delta, delta]) = 0` up to the edge rule:
    /// when an atom sits exactly at the gap radius the radius is shrunk by a
    /// relative `1e-9`.
    pub fn admissible_delta(&self) -> f64 {
        let gap = self.gap_radius();
        if self.atoms.first().is_some_and(|a| a.freq == gap) {
            gap * (1.0 - 1e-9)
        } else {
            gap
        }
    }

    /// Whether `mu([-delta, delta]) = 0`.
    pub fn admits_gap(&self, delta: f64) -> bool {
        delta > 0.0
            && self.atoms.iter().all(|a| a.freq > delta)
            && self.density.iter().filter(|p| p.height > 0.0).all(|p| p.lo >= delta)
    }

    /// Smallest `R` with the support inside `[-R, R]`.
    pub fn support_radius(&self) -> f64 {
        let atom = self.atoms.last().map_or(0.0, |a| a.freq);
        let piece = self.density.iter().filter(|p| p.height > 0.0).map(|p| p.hi).fold(0.0, f64::max);
        atom.max(piece)
    }

    /// Covariance `k(x) = int e^{2 pi i x y} dmu(y)`.
    pub fn covariance(&self, x: f64) -> f64 {
        let atoms = self.atoms.iter().map(|a| a.mass * (2.0 * PI * a.freq * x).cos());
        // [sin(2 pi hi x) - sin(2 pi lo x)] / (2 pi x), written as a product
        // that stays accurate as x -> 0.
        let pieces = self.density.iter().map(|p| {
            let width = p.hi - p.lo;
            let arg = PI * width * x;
            let sinc = if arg.abs() < 1e-8 { 1.0 - arg * arg / 6.0 } else { arg.sin() / arg };
            p.height * width * (PI * (p.hi + p.lo) * x).cos() * sinc
        });
        2.0 * kahan_sum(atoms.chain(pieces))
    }

    /// Part of the measure in `(a/4, a/2]` with `a = 2^k delta`.
    pub fn dyadic_band(&self, band: BandId, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let a = band.scale(delta);
        Ok(self.restrict(a / 4.0, a / 2.0))
    }

    /// Restriction to the half-open frequency window `(lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        let atoms = self.atoms.iter().filter(|a| a.freq > lo && a.freq <= hi).copied().collect();
        let density = self
            .density
            .iter()
            .filter(|p| p.height > 0.0)
            .filter_map(|p| {
                let clipped = DensityPiece { lo: p.lo.max(lo), hi: p.hi.min(hi), height: p.height };
                (clipped.lo < clipped.hi).then_some(clipped)
            })
            .collect();
        Self::with_parts(atoms, density).expect("restriction of a valid measure is valid")
    }

    /// Pushforward under `y -> y / a`; total mass is preserved.
    pub fn rescale(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {a}")));
        }
        let atoms = self.atoms.iter().map(|x| Atom { freq: x.freq / a, mass: x.mass }).collect();
        let density = self
            .density
            .iter()
            .map(|p| DensityPiece { lo: p.lo / a, hi: p.hi / a, height: p.height * a })
            .collect();
        Self::with_parts(atoms, density)
    }

    /// Pushforward of a band measure supported in `(a/4, a/2]` onto `(1/4, 1/2]`.
    pub fn rescale_to_unit_band(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {a}")));
        }
        self.check_support(a / 4.0, a / 2.0)?;
        self.rescale(a)
    }

    /// Checks the support lies in `(lo, hi]` (density pieces may touch `lo`).
    pub fn check_support(&self, lo: f64, hi: f64) -> Result<()> {
        let slack = 1e-12 * hi;
        let atoms_ok = self.atoms.iter().all(|a| a.freq > lo - slack && a.freq <= hi + slack);
        let pieces_ok = self
            .density
            .iter()
            .filter(|p| p.height > 0.0)
            .all(|p| p.lo >= lo - slack && p.hi <= hi + slack);
        if atoms_ok && pieces_ok {
            return Ok(());
        }
        let (mut s_lo, mut s_hi) = (f64::INFINITY, 0.0f64);
        for a in &self.atoms {
            s_lo = s_lo.min(a.freq);
            s_hi = s_hi.max(a.freq);
        }
        for p in self.density.iter().filter(|p| p.height > 0.0) {
            s_lo = s_lo.min(p.lo);
            s_hi = s_hi.max(p.hi);
        }
        Err(Error::SupportOutsideBand { lo: s_lo, hi: s_hi, band_lo: lo, band_hi: hi })
    }

    /// `int |q(e^{2 pi i y})|^2 dmu(y)`.
    ///
    /// Atoms are summed exactly at both `+freq` and `-freq`. Density pieces use
    /// composite Simpson, refined until the error estimate is below
    /// `1e-10 * total_mass * max|q|^2` on the piece, or below the rounding
    /// level of Horner evaluation when `|q|` is that small.
    pub fn energy_integral(&self, q: &Polynomial) -> f64 {
        let degree = q.degree().unwrap_or(0);
        let rounding = (degree + 1) as f64 * f64::EPSILON * q.l1_norm();
        self.integrate_folded(
            |y| q.eval_circle(y).norm_sqr() + q.eval_circle(-y).norm_sqr(),
            degree as f64,
            2.0 * rounding * rounding,
        )
    }

    /// `int g dmu` given `folded(y) = g(y) + g(-y)` for `y > 0`.
    ///
    /// `bandwidth` bounds the frequency content of `g` in `y` and sets the
    /// initial Simpson panel count on density pieces; `noise` is the absolute
    /// rounding level of `folded`, below which refinement stops.
    pub fn integrate_folded(&self, folded: impl Fn(f64) -> f64, bandwidth: f64, noise: f64) -> f64 {
        let atoms = kahan_sum(self.atoms.iter().map(|a| a.mass * folded(a.freq)));
        let total = self.total_mass();
        let pieces = kahan_sum(self.density.iter().filter(|p| p.height > 0.0).map(|p| {
            let width = p.hi - p.lo;
            // Enough initial panels to see every oscillation.
            let panels = ((8.0 * (bandwidth.abs() + 1.0) * width).ceil() as usize).max(8);
            let peak = (0..=panels)
                .map(|i| folded(p.lo + width * i as f64 / panels as f64).abs())
                .fold(0.0, f64::max);
            let tol = total * (1e-10 * peak).max(noise);
            let (value, _) = simpson_adaptive(&folded, p.lo, p.hi, panels, 1 << 22, |_| tol);
            p.height * value
        }));
        atoms + pieces
    }

    /// `int (y/scale)^j dmu(y)`; odd moments vanish by symmetry.
    pub fn moment(&self, j: usize, scale: f64) -> f64 {
        if j % 2 == 1 {
            return 0.0;
        }
        let power = j as i32;
        let atoms = self.atoms.iter().map(|a| a.mass * (a.freq / scale).powi(power));
        let pieces = self.density.iter().map(|p| {
            let (lo, hi) = (p.lo / scale, p.hi / scale);
            p.height * scale * (hi.powi(power + 1) - lo.powi(power + 1)) / (j + 1) as f64
        });
        2.0 * kahan_sum(atoms.chain(pieces))
    }

    /// Atoms replacing every density piece by `nodes_per_piece` Gauss–Legendre
    /// nodes carrying the corresponding quadrature weights.
    pub fn discretize(&self, nodes_per_piece: usize) -> Vec<Atom> {
        let mut out = self.atoms.clone();
        for p in self.density.iter().filter(|p| p.height > 0.0) {
            out.extend(
                gauss_legendre(nodes_per_piece, p.lo, p.hi)
                    .into_iter()
                    .map(|(freq, w)| Atom { freq, mass: p.height * w }),
            );
        }
        out.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        out
    }

    /// Atomic measure with density pieces discretized as in [`Self::discretize`].
    pub fn discretized(&self, nodes_per_piece: usize) -> Self {
        Self::with_parts(self.discretize(nodes_per_piece), Vec::new()).expect("discretization of a valid measure")
    }

    /// `sup_{|x| <= horizon} |k_disc(x) - k(x)|` on a grid of `samples` points.
    pub fn discretization_error(&self, nodes_per_piece: usize, horizon: f64, samples: usize) -> f64 {
        let disc = self.discretized(nodes_per_piece);
        (0..=samples)
            .map(|i| {
                let x = horizon * i as f64 / samples.max(1) as f64;
                (disc.covariance(x) - self.covariance(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }
}
