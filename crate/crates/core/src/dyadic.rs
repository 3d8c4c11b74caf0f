//! Assembly of per-band certificates over the dyadic decomposition
//! `mu = sum_a mu_a`, `mu_a` supported on `a/4 < |y| <= a/2`, `a = 2^k delta`.

use serde::{Deserialize, Serialize};

use crate::certificate::{certify_band, integral_second_moment, rescale_certificate, AtomicMeasure, Certificate, C, N0};
use crate::error::{Error, Result};
use crate::spectral::{BandId, SpectralMeasure};

/// Default band-size constant `c''`; `c'' sum_{k>=2} 2^{-k/2} < 1`.
pub const DEFAULT_CPP: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub band: BandId,
    pub a: f64,
    pub n_a: usize,
    pub mass_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub delta: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub c_pp: f64,
    pub discrete: bool,
    pub entries: Vec<BandEntry>,
}

impl BandPlan {
    /// First band with `n_a < N0`, if any.
    pub fn short_band(&self) -> Option<&BandEntry> {
        self.entries.iter().find(|e| e.n_a < N0)
    }

    /// Smallest length at which every retained band reaches `N0`.
    pub fn min_length(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let rate = self.c_pp * 2f64.powf(e.band.k() as f64 / 2.0) * self.delta;
                N0 as f64 / rate
            })
            .fold(0.0, f64::max)
    }
}

/// `n_a = floor(c'' 2^{k/2} delta L)`.
pub fn band_size(k: u32, delta: f64, length: f64, c_pp: f64) -> usize {
    (c_pp * 2f64.powf(k as f64 / 2.0) * delta * length + 1e-9).floor() as usize
}

pub fn plan_bands(mu: &SpectralMeasure, delta: f64, length: f64, c_pp: f64) -> Result<BandPlan> {
    plan_bands_with(mu, delta, length, c_pp, false)
}

/// Nonempty dyadic bands of `mu` with their sizes.
///
/// With `discrete` set, every band must have `a <= 1` with `1/a` an integer,
/// so that all `nu_a` live on the integers.
pub fn plan_bands_with(mu: &SpectralMeasure, delta: f64, length: f64, c_pp: f64, discrete: bool) -> Result<BandPlan> {
    for (name, v) in [("delta", delta), ("L", length), ("c_pp", c_pp)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if !mu.admits_gap(delta) {
        return Err(Error::GapViolated { delta, gap_radius: mu.gap_radius() });
    }
    let radius = mu.support_radius();
    if !radius.is_finite() {
        return Err(Error::InvalidMeasure("unbounded support is not supported".into()));
    }
    let mut entries = Vec::new();
    let mut k = 2u32;
    while BandId::new(k)?.scale(delta) / 4.0 < radius {
        let band = BandId::new(k)?;
        let a = band.scale(delta);
        let mass_a = mu.dyadic_band(band, delta)?.total_mass();
        if mass_a > 0.0 {
            if discrete && !(a <= 1.0 && (1.0 / a).fract() == 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "integer-time bands need a <= 1 with 1/a an integer, band k = {k} has a = {a}"
                )));
            }
            entries.push(BandEntry { band, a, n_a: band_size(k, delta, length, c_pp), mass_a });
        }
        k += 1;
    }
    Ok(BandPlan { delta, length, c_pp, discrete, entries })
}

/// Convolution of probability measures; coincident positions are merged.
pub fn convolve(measures: &[AtomicMeasure]) -> Result<AtomicMeasure> {
    let mut acc = vec![(0.0f64, 1.0f64)];
    for nu in measures {
        let mut next: Vec<(f64, f64)> = acc
            .iter()
            .flat_map(|&(x, w)| nu.atoms().iter().map(move |&(y, v)| (x + y, w * v)))
            .collect();
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(next.len());
        for (x, w) in next {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= 1e-12 * (1.0 + x.abs()) => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        acc = merged;
    }
    AtomicMeasure::new(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// `sum_a n_a / a`, compared against `L`.
    pub cond1_sum: f64,
    pub cond1_ok: bool,
    /// `sum_a e^{-c n_a}`, compared against 1.
    pub cond2_sum: f64,
    pub cond2_ok: bool,
    /// `min_a n_a`, compared against `c'' delta L`.
    pub cond3_min: usize,
    pub cond3_ok: bool,
}

/// How the Gaussian tail term was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// `exp(-e^{2 c n_alpha} / 8)`, valid when `sum_a e^{-c n_a} <= 1`.
    Summable,
    /// `exp(-(e^{-c n_alpha} sigma_alpha)^2 / (8 energy_sum^2))`.
    Direct,
    /// All band sigmas vanish.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembledBound {
    pub plan: BandPlan,
    pub certificates: Vec<Certificate>,
    pub nu_total: AtomicMeasure,
    /// `sum_a e^{-3 c n_a} sigma_a`, an upper bound for the standard
    /// deviation of `int f dnu_total`.
    pub energy_sum: f64,
    pub argmax_band: BandId,
    pub tail_rule: TailRule,
    pub tail_term: f64,
    pub event_term: f64,
    pub raw_bound: f64,
    /// `min(raw_bound, 1/2)`, or `1/2` when (cond1) fails.
    pub total_bound: f64,
    pub conditions: Conditions,
}

impl AssembledBound {
    /// Exact `E[(int f dnu_total)^2]` for comparison with `energy_sum^2`.
    pub fn nu_variance(&self, mu: &SpectralMeasure) -> f64 {
        integral_second_moment(mu, &self.nu_total)
    }

    pub fn trace(&self) -> AssemblyTrace {
        AssemblyTrace {
            delta: self.plan.delta,
            length: self.plan.length,
            c_pp: self.plan.c_pp,
            discrete: self.plan.discrete,
            bands: self
                .plan
                .entries
                .iter()
                .zip(&self.certificates)
                .map(|(e, c)| BandTrace {
                    k: e.band.k(),
                    a: e.a,
                    n_a: e.n_a,
                    big_n: c.big_n,
                    m: c.m,
                    mass: e.mass_a,
                    sigma: c.sigma,
                    energy: c.energy,
                    energy_bound: c.energy_bound,
                    prob_bound: c.prob_bound,
                    flat_block_error: c.flat_block_error(),
                    checks_passed: c.report.passed(),
                })
                .collect(),
            conditions: self.conditions,
            argmax_band: self.argmax_band.k(),
            energy_sum: self.energy_sum,
            nu_atoms: self.nu_total.len(),
            nu_max_position: self.nu_total.max_position(),
            tail_rule: self.tail_rule,
            tail_term: self.tail_term,
            event_term: self.event_term,
            raw_bound: self.raw_bound,
            total_bound: self.total_bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandTrace {
    pub k: u32,
    pub a: f64,
    pub n_a: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub mass: f64,
    pub sigma: f64,
    pub energy: f64,
    pub energy_bound: f64,
    pub prob_bound: f64,
    pub flat_block_error: f64,
    pub checks_passed: bool,
}

/// Compact JSON view of an [`AssembledBound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyTrace {
    pub delta: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub c_pp: f64,
    pub discrete: bool,
    pub bands: Vec<BandTrace>,
    pub conditions: Conditions,
    pub argmax_band: u32,
    pub energy_sum: f64,
    pub nu_atoms: usize,
    pub nu_max_position: f64,
    pub tail_rule: TailRule,
    pub tail_term: f64,
    pub event_term: f64,
    pub raw_bound: f64,
    pub total_bound: f64,
}

pub fn assemble(mu: &SpectralMeasure, delta: f64, length: f64, c_pp: f64) -> Result<AssembledBound> {
    assemble_with(mu, delta, length, c_pp, false)
}

/// Upper bound on `P{f >= 0 on [0, L]}` from certificates on every band.
pub fn assemble_with(mu: &SpectralMeasure, delta: f64, length: f64, c_pp: f64, discrete: bool) -> Result<AssembledBound> {
    let plan = plan_bands_with(mu, delta, length, c_pp, discrete)?;
    if plan.entries.is_empty() {
        return Err(Error::InvalidMeasure("measure has no mass".into()));
    }
    if let Some(short) = plan.short_band() {
        return Err(Error::BandTooShort { k: short.band.k(), n_a: short.n_a, n0: N0, min_length: plan.min_length() });
    }

    let certificates = plan
        .entries
        .iter()
        .map(|e| {
            let unit = mu.dyadic_band(e.band, delta)?.rescale_to_unit_band(e.a)?;
            rescale_certificate(&certify_band(&unit, e.n_a)?, e.a)
        })
        .collect::<Result<Vec<_>>>()?;

    let nus: Vec<AtomicMeasure> = certificates.iter().map(|c| c.nu.clone()).collect();
    let nu_total = convolve(&nus)?;

    let sizes: Vec<f64> = plan.entries.iter().map(|e| e.n_a as f64).collect();
    let energy_sum: f64 = sizes.iter().zip(&certificates).map(|(n, c)| (-3.0 * C * n).exp() * c.sigma).sum();
    let cond1_sum: f64 = plan.entries.iter().map(|e| e.n_a as f64 / e.a).sum();
    let cond2_sum: f64 = sizes.iter().map(|n| (-C * n).exp()).sum();
    let cond3_min = plan.entries.iter().map(|e| e.n_a).min().unwrap_or(0);
    let conditions = Conditions {
        cond1_sum,
        cond1_ok: cond1_sum <= length,
        cond2_sum,
        cond2_ok: cond2_sum <= 1.0,
        cond3_min,
        cond3_ok: cond3_min as f64 >= c_pp * delta * length,
    };

    // First band attaining the maximum of e^{-2 c n_a} sigma_a.
    let (alpha, _) = sizes
        .iter()
        .zip(&certificates)
        .map(|(n, c)| (-2.0 * C * n).exp() * c.sigma)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let n_alpha = sizes[alpha];
    let sigma_alpha = certificates[alpha].sigma;

    let (tail_rule, tail_term, event_term) = if sigma_alpha == 0.0 {
        (TailRule::Degenerate, 0.0, 0.0)
    } else {
        let event = 2.0 * certificates[alpha].prob_bound;
        if conditions.cond2_ok {
            (TailRule::Summable, (-(2.0 * C * n_alpha).exp() / 8.0).exp(), event)
        } else {
            let level = (-C * n_alpha).exp() * sigma_alpha;
            (TailRule::Direct, (-(level * level) / (8.0 * energy_sum * energy_sum)).exp(), event)
        }
    };
    let raw_bound = tail_term + event_term;
    let total_bound = if conditions.cond1_ok { raw_bound.min(0.5) } else { 0.5 };

    Ok(AssembledBound {
        argmax_band: plan.entries[alpha].band,
        plan,
        certificates,
        nu_total,
        energy_sum,
        tail_rule,
        tail_term,
        event_term,
        raw_bound,
        total_bound,
        conditions,
    })
}

/// Best available upper bound: the assembled one when every band is long
/// enough, otherwise the single-point bound `1/2`.
pub fn persistence_upper_bound(mu: &SpectralMeasure, delta: f64, length: f64, c_pp: f64, discrete: bool) -> Result<f64> {
    match assemble_with(mu, delta, length, c_pp, discrete) {
        Ok(bound) => Ok(bound.total_bound),
        Err(Error::BandTooShort { .. }) => Ok(0.5),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Atom, DensityPiece};

    #[test]
    fn band_size_examples() {
        assert_eq!(band_size(2, 0.25, 368.0, 0.5), 92);
        let mu = SpectralMeasure::atomic(&[(0.3, 0.5)]).unwrap();
        let plan = plan_bands(&mu, 0.25, 368.0, 0.5).unwrap();
        assert_eq!(plan.entries.len(), 1);
        assert_eq!(plan.entries[0].band.k(), 2);
        assert_eq!(plan.entries[0].n_a, 92);
    }

    #[test]
    fn gap_violation_is_reported() {
        let mu = SpectralMeasure::atomic(&[(0.25, 0.5)]).unwrap();
        let err = plan_bands(&mu, 0.3, 10.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::GapViolated { .. }));
        assert!(err.to_string().contains("gap_radius"));
    }

    #[test]
    fn plan_keeps_only_nonempty_bands() {
        // Bands for delta = 0.1: (0.1, 0.2], (0.2, 0.4], (0.4, 0.8], ...
        let mu = SpectralMeasure::atomic(&[(0.15, 0.2), (0.7, 0.3)]).unwrap();
        let plan = plan_bands(&mu, 0.1, 100.0, 0.5).unwrap();
        let ks: Vec<u32> = plan.entries.iter().map(|e| e.band.k()).collect();
        assert_eq!(ks, vec![2, 4]);
        let mass: f64 = plan.entries.iter().map(|e| e.mass_a).sum();
        assert!((mass - mu.total_mass()).abs() < 1e-15);
    }

    #[test]
    fn discrete_flag_restricts_bands() {
        let mu = SpectralMeasure::atomic(&[(0.3, 0.5)]).unwrap();
        assert!(plan_bands_with(&mu, 0.25, 400.0, 0.5, true).is_ok());
        assert!(plan_bands_with(&mu, 0.2, 400.0, 0.5, true).is_err());
        let wide = SpectralMeasure::atomic(&[(0.3, 0.2), (0.9, 0.3)]).unwrap();
        assert!(plan_bands_with(&wide, 0.25, 400.0, 0.5, true).is_err());
    }

    #[test]
    fn convolve_examples() {
        let nu = AtomicMeasure::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(convolve(&[AtomicMeasure::dirac(0.0).unwrap(), nu.clone()]).unwrap(), nu);
        let two = convolve(&[nu.clone(), nu.clone()]).unwrap();
        assert_eq!(two.atoms(), &[(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]);
        let other = AtomicMeasure::new(vec![(0.0, 0.3), (0.25, 0.3), (3.5, 0.4)]).unwrap();
        let conv = convolve(&[nu, other]).unwrap();
        assert!(conv.max_position() <= 1.0 + 3.5);
        assert!((conv.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_bands_are_rejected() {
        let mu = SpectralMeasure::atomic(&[(0.3, 0.5)]).unwrap();
        match assemble(&mu, 0.25, 100.0, 0.5).unwrap_err() {
            Error::BandTooShort { n_a, min_length, .. } => {
                assert_eq!(n_a, 25);
                assert!((min_length - 288.0).abs() < 1e-9);
            }
            e => panic!("{e}"),
        }
        assert_eq!(persistence_upper_bound(&mu, 0.25, 100.0, 0.5, false).unwrap(), 0.5);
    }

    #[test]
    fn single_band_assembly() {
        let mu = SpectralMeasure::atomic(&[(0.27, 0.1), (0.33, 0.15), (0.41, 0.1), (0.47, 0.1)]).unwrap();
        let b = assemble(&mu, 0.25, 368.0, 0.5).unwrap();
        assert_eq!(b.certificates.len(), 1);
        // One band: nu_total is the rescaled band measure.
        assert_eq!(b.nu_total, b.certificates[0].nu);
        assert!((b.conditions.cond2_sum - (-C * 92.0).exp()).abs() < 1e-15);
        assert!((b.conditions.cond2_sum - 0.528).abs() < 1e-3);
        assert!(b.conditions.cond1_ok && b.conditions.cond2_ok && b.conditions.cond3_ok);
        assert_eq!(b.tail_rule, TailRule::Summable);
        assert_eq!(b.raw_bound, b.tail_term + b.event_term);
        assert!(b.total_bound <= 0.5);
        assert!(b.nu_total.max_position() <= b.conditions.cond1_sum + 1e-12);
        assert!(b.nu_variance(&mu) <= b.energy_sum * b.energy_sum);
        let json = serde_json::to_string(&b.trace()).unwrap();
        let back: AssemblyTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn two_band_assembly() {
        let mu = SpectralMeasure::new(
            vec![Atom { freq: 0.3, mass: 0.2 }, Atom { freq: 0.45, mass: 0.1 }],
            vec![DensityPiece { lo: 0.26, hi: 0.4, height: 0.5 }, DensityPiece { lo: 0.6, hi: 0.95, height: 0.5 }],
        )
        .unwrap();
        let b = assemble(&mu, 0.25, 400.0, 0.5).unwrap();
        assert_eq!(b.certificates.len(), 2);
        assert!(b.certificates.iter().all(|c| c.sigma > 0.0));
        assert!(b.conditions.cond1_ok);
        assert!(b.nu_total.max_position() <= b.conditions.cond1_sum + 1e-9);
        assert!(b.nu_total.max_position() <= 400.0);
        assert!(b.nu_variance(&mu) <= b.energy_sum * b.energy_sum * (1.0 + 1e-9));
        if !b.conditions.cond2_ok {
            assert_eq!(b.tail_rule, TailRule::Direct);
        }
    }

    #[test]
    fn degenerate_bands_give_zero() {
        let mu = SpectralMeasure::atomic(&[(0.3, 0.5)]).unwrap();
        let b = assemble(&mu, 0.25, 368.0, 0.5).unwrap();
        assert_eq!(b.tail_rule, TailRule::Degenerate);
        assert_eq!(b.total_bound, 0.0);
    }
}
