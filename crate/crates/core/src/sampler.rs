//! Spectral-representation sampling of stationary Gaussian processes and
//! Monte Carlo estimates of sign persistence.
//!
//! Each positive atom `(lambda, w)` contributes
//! `sqrt(2 w) (xi cos(2 pi lambda x) + eta sin(2 pi lambda x))` with independent
//! standard normals `xi, eta`, which is exact in distribution for atomic
//! measures. Density pieces are first replaced by Gauss–Legendre atoms.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::certificate::AtomicMeasure;
use crate::error::{Error, Result};
use crate::rng::trial_rng;
use crate::spectral::SpectralMeasure;

/// Gauss–Legendre nodes used per density piece when sampling.
pub const DEFAULT_NODES_PER_PIECE: usize = 64;

/// One realization on the grid `x0 + j * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub x0: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub seed_tag: u64,
}

impl SamplePath {
    pub fn point(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.step
    }
}

/// Binomial proportion with a 95% Clopper–Pearson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let p_hat = successes as f64 / trials as f64;
        let (lo, hi) = clopper_pearson(successes, trials, 0.05);
        Self { successes, trials, p_hat, ci_lo: lo.min(p_hat), ci_hi: hi.max(p_hat) }
    }

    /// Binomial standard error at the estimate.
    pub fn stderr(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }
}

/// Two-sided `1 - alpha` Clopper–Pearson interval.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    let (s, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 { 0.0 } else { inv_beta_reg(s, n - s + 1.0, alpha / 2.0) };
    let hi = if successes == trials { 1.0 } else { inv_beta_reg(s + 1.0, n - s, 1.0 - alpha / 2.0) };
    (lo, hi)
}

/// Deterministic shift `phi` evaluated on the support of a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFunction {
    pub support: Vec<f64>,
    pub values: Vec<f64>,
}

impl ShiftFunction {
    pub fn new(support: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::InvalidArgument("shift support and values differ in length".into()));
        }
        if support.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("shift values must be finite".into()));
        }
        Ok(Self { support, values })
    }

    pub fn zero(nu: &AtomicMeasure) -> Self {
        let support: Vec<f64> = nu.positions().collect();
        let values = vec![0.0; support.len()];
        Self { support, values }
    }
}

/// Trial count, master seed and optional worker count of a Monte Carlo run.
///
/// Results depend only on `trials` and `master_seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(trials: u64, master_seed: u64) -> Self {
        Self { trials, master_seed, workers: None }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        Ok(())
    }
}

/// Trigonometric tables of the spectral representation at fixed points.
pub struct PointSampler {
    amplitudes: Vec<f64>,
    // Row i holds (cos, sin) pairs of every atom at point i.
    table: Vec<f64>,
    points: usize,
}

impl PointSampler {
    pub fn new(mu: &SpectralMeasure, points: &[f64]) -> Self {
        Self::with_nodes(mu, points, DEFAULT_NODES_PER_PIECE)
    }

    pub fn with_nodes(mu: &SpectralMeasure, points: &[f64], nodes_per_piece: usize) -> Self {
        let atoms = mu.discretize(nodes_per_piece);
        let amplitudes = atoms.iter().map(|a| (2.0 * a.mass).sqrt()).collect();
        let mut table = Vec::with_capacity(points.len() * atoms.len() * 2);
        for &x in points {
            for a in &atoms {
                let (s, c) = (2.0 * PI * a.freq * x).sin_cos();
                table.push(c);
                table.push(s);
            }
        }
        Self { amplitudes, table, points: points.len() }
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    /// Draws the Gaussian coefficients of one realization into `coeffs`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, coeffs: &mut Vec<f64>) {
        coeffs.clear();
        for &amp in &self.amplitudes {
            let xi: f64 = rng.sample(StandardNormal);
            let eta: f64 = rng.sample(StandardNormal);
            coeffs.push(amp * xi);
            coeffs.push(amp * eta);
        }
    }

    /// Value of the realization with coefficients `coeffs` at point `i`.
    pub fn value(&self, coeffs: &[f64], i: usize) -> f64 {
        let width = coeffs.len();
        self.table[i * width..(i + 1) * width]
            .iter()
            .zip(coeffs)
            .map(|(t, c)| t * c)
            .sum()
    }
}

/// One realization on `count` grid points starting at `x0`.
pub fn sample_path(mu: &SpectralMeasure, x0: f64, step: f64, count: usize, seed: u64) -> Result<SamplePath> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let points: Vec<f64> = (0..count).map(|j| x0 + j as f64 * step).collect();
    let sampler = PointSampler::new(mu, &points);
    let mut coeffs = Vec::new();
    sampler.draw(&mut trial_rng(seed, 0), &mut coeffs);
    let values = (0..count).map(|i| sampler.value(&coeffs, i)).collect();
    Ok(SamplePath { x0, step, values, seed_tag: seed })
}

/// Whether every grid value is `>= 0`.
pub fn persistence_indicator(path: &SamplePath) -> bool {
    path.values.iter().all(|&v| v >= 0.0)
}

/// `P{g1 >= 0, g2 >= 0}` for standard normals with correlation `rho`.
pub fn orthant_probability(rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(0.25 + rho.asin() / (2.0 * PI))
}

/// Default grid step: `min(0.01 / gap_radius, L / 1000)`.
pub fn default_step(mu: &SpectralMeasure, length: f64) -> f64 {
    let gap = mu.gap_radius();
    let by_gap = if gap > 0.0 { 0.01 / gap } else { f64::INFINITY };
    let by_length = if length > 0.0 { length / 1000.0 } else { f64::INFINITY };
    match by_gap.min(by_length) {
        s if s.is_finite() => s,
        _ => 0.01,
    }
}

/// Index of the last grid point `j * step <= length`.
pub fn last_grid_index(length: f64, step: f64) -> usize {
    (length / step + 1e-9).floor() as usize
}

fn run_parallel<T: Send>(cfg: &McConfig, job: impl FnOnce() -> T + Send) -> Result<T> {
    cfg.validate()?;
    match cfg.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Per-trial histogram of `outcome(rng, coeffs)` over `bins` buckets.
fn tally<F>(cfg: &McConfig, bins: usize, outcome: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>) -> usize + Sync,
{
    let seed = cfg.master_seed;
    run_parallel(cfg, || {
        (0..cfg.trials)
            .into_par_iter()
            .fold(
                || (vec![0u64; bins], Vec::new()),
                |(mut counts, mut coeffs), j| {
                    let mut rng = trial_rng(seed, j);
                    counts[outcome(&mut rng, &mut coeffs)] += 1;
                    (counts, coeffs)
                },
            )
            .map(|(counts, _)| counts)
            .reduce(
                || vec![0u64; bins],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    })
}

/// Grid estimate of `P{f >= 0 on [0, L]}` at the points `0, step, ..., L`.
///
/// The grid event contains the continuous one, so the estimate is an upper
/// approximation of the continuous persistence probability.
pub fn mc_persistence(mu: &SpectralMeasure, length: f64, step: f64, cfg: &McConfig) -> Result<McEstimate> {
    Ok(mc_persistence_sweep(mu, &[length], step, cfg)?.remove(0))
}

/// Persistence estimates for several lengths from common random numbers.
///
/// Every trial samples one path on the grid `j * step` up to the largest
/// length; the trial counts as a success for each length whose grid prefix
/// stays nonnegative, so estimates are non-increasing in the length.
pub fn mc_persistence_sweep(
    mu: &SpectralMeasure,
    lengths: &[f64],
    step: f64,
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    if lengths.is_empty() {
        return Ok(Vec::new());
    }
    if lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument("lengths must be finite and nonnegative".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let max_len = lengths.iter().copied().fold(0.0, f64::max);
    let last = last_grid_index(max_len, step);
    let points: Vec<f64> = (0..=last).map(|j| j as f64 * step).collect();
    let sampler = PointSampler::new(mu, &points);

    // Bin j < points: first negative value at index j. Bin `points`: none.
    let counts = tally(cfg, points.len() + 1, |rng, coeffs| {
        sampler.draw(rng, coeffs);
        (0..sampler.len()).find(|&i| sampler.value(coeffs, i) < 0.0).unwrap_or(sampler.len())
    })?;

    Ok(lengths
        .iter()
        .map(|&l| {
            let needed = last_grid_index(l, step);
            let successes: u64 = counts[needed + 1..].iter().sum();
            McEstimate::from_counts(successes, cfg.trials)
        })
        .collect())
}

/// Frequency of `{f + phi >= 0 on supp nu, int (f + phi) dnu <= threshold}`.
pub fn mc_lemma_event(
    mu: &SpectralMeasure,
    nu: &AtomicMeasure,
    phi: &ShiftFunction,
    threshold: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let positions: Vec<f64> = nu.positions().collect();
    let matches = positions.len() == phi.support.len()
        && positions.iter().zip(&phi.support).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    if !matches {
        return Err(Error::InvalidArgument("shift support does not match the support of nu".into()));
    }
    let weights: Vec<f64> = nu.weights().collect();
    let sampler = PointSampler::new(mu, &positions);
    let counts = tally(cfg, 2, |rng, coeffs| {
        sampler.draw(rng, coeffs);
        let mut integral = 0.0;
        for i in 0..sampler.len() {
            let v = sampler.value(coeffs, i) + phi.values[i];
            if v < 0.0 {
                return 0;
            }
            integral += weights[i] * v;
        }
        usize::from(integral <= threshold)
    })?;
    Ok(McEstimate::from_counts(counts[1], cfg.trials))
}

/// Sample mean and variance of `int f dnu` over independent realizations.
pub fn mc_integral_moments(mu: &SpectralMeasure, nu: &AtomicMeasure, cfg: &McConfig) -> Result<(f64, f64)> {
    let positions: Vec<f64> = nu.positions().collect();
    let weights: Vec<f64> = nu.weights().collect();
    let sampler = PointSampler::new(mu, &positions);
    let seed = cfg.master_seed;
    let samples: Vec<f64> = run_parallel(cfg, || {
        (0..cfg.trials)
            .into_par_iter()
            .map_init(Vec::new, |coeffs, j| {
                sampler.draw(&mut trial_rng(seed, j), coeffs);
                (0..sampler.len()).map(|i| weights[i] * sampler.value(coeffs, i)).sum::<f64>()
            })
            .collect()
    })?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(f: f64, w: f64) -> SpectralMeasure {
        SpectralMeasure::atomic(&[(f, w)]).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let p = |v: Vec<f64>| SamplePath { x0: 0.0, step: 1.0, values: v, seed_tag: 0 };
        assert!(persistence_indicator(&p(vec![0.0, 1.0, 2.0])));
        assert!(!persistence_indicator(&p(vec![1.0, -1e-12])));
        assert!(persistence_indicator(&p(vec![0.5])));
    }

    #[test]
    fn orthant_examples() {
        assert_eq!(orthant_probability(0.0).unwrap(), 0.25);
        assert_eq!(orthant_probability(1.0).unwrap(), 0.5);
        assert!((orthant_probability(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(orthant_probability(1.5).is_err());
    }

    #[test]
    fn single_frequency_rotation_identity() {
        let mu = atom(0.25, 0.5);
        let path = sample_path(&mu, -1.3, 0.25, 200, 42).unwrap();
        // Points j and j+4 are one unit apart.
        let r0 = path.values[0].powi(2) + path.values[4].powi(2);
        for j in 0..196 {
            let r = path.values[j].powi(2) + path.values[j + 4].powi(2);
            assert!((r - r0).abs() < 1e-12 * r0.max(1.0));
        }
    }

    #[test]
    fn sample_path_is_deterministic() {
        let mu = SpectralMeasure::uniform(0.25, 0.5, 2.0).unwrap();
        let a = sample_path(&mu, 0.0, 0.1, 50, 9).unwrap();
        let b = sample_path(&mu, 0.0, 0.1, 50, 9).unwrap();
        let c = sample_path(&mu, 0.0, 0.1, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert!(sample_path(&mu, 0.0, 0.1, 0, 9).is_err());
        assert_eq!(sample_path(&mu, 0.0, 0.1, 1, 9).unwrap().values.len(), 1);
    }

    #[test]
    fn variance_at_origin() {
        let mu = atom(0.25, 0.5);
        let trials = 100_000;
        let values: Vec<f64> = (0..trials)
            .map(|s| sample_path(&mu, 0.0, 1.0, 1, s).unwrap().values[0])
            .collect();
        let var = values.iter().map(|v| v * v).sum::<f64>() / trials as f64;
        // Var of the sample second moment of N(0,1) is 2 / trials.
        let se = (2.0 / trials as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn clopper_pearson_reference() {
        // With no successes the upper limit is 1 - (alpha/2)^{1/n}.
        let (lo, hi) = clopper_pearson(0, 10, 0.05);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-12, "{hi}");
        let (lo, hi) = clopper_pearson(5, 10, 0.05);
        assert!((lo - 0.187_086_3).abs() < 1e-6, "{lo}");
        assert!((hi - 0.812_913_7).abs() < 1e-6, "{hi}");
        let e = McEstimate::from_counts(10, 10);
        assert_eq!(e.ci_hi, 1.0);
        assert!(e.ci_lo <= e.p_hat);
    }

    #[test]
    fn trials_must_be_positive() {
        let mu = atom(0.3, 0.5);
        assert!(mc_persistence(&mu, 1.0, 0.01, &McConfig::new(0, 1)).is_err());
    }

    #[test]
    fn single_point_is_half() {
        let mu = SpectralMeasure::uniform(0.25, 0.5, 2.0).unwrap();
        let e = mc_persistence(&mu, 0.0, 0.01, &McConfig::new(40_000, 3)).unwrap();
        assert!((e.p_hat - 0.5).abs() < 3.0 * (0.25f64 / 40_000.0).sqrt());
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let mu = atom(0.3, 0.5);
        let base = McConfig::new(5_000, 11);
        let a = mc_persistence(&mu, 1.0, 0.01, &base.with_workers(1)).unwrap();
        let b = mc_persistence(&mu, 1.0, 0.01, &base.with_workers(3)).unwrap();
        let c = mc_persistence(&mu, 1.0, 0.01, &base).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn sweep_is_monotone_and_matches_single_runs() {
        let mu = SpectralMeasure::uniform(0.25, 0.5, 2.0).unwrap();
        let cfg = McConfig::new(3_000, 5);
        let lengths = [0.0, 0.4, 0.8, 1.2, 2.0];
        let sweep = mc_persistence_sweep(&mu, &lengths, 0.04, &cfg).unwrap();
        assert!(sweep.windows(2).all(|w| w[0].successes >= w[1].successes));
        for (l, e) in lengths.iter().zip(&sweep) {
            assert_eq!(mc_persistence(&mu, *l, 0.04, &cfg).unwrap(), *e);
        }
    }

    #[test]
    fn shifted_event_examples() {
        let mu = atom(0.3, 0.5);
        let nu = AtomicMeasure::new(vec![(0.0, 0.5), (1.0, 0.25), (2.0, 0.25)]).unwrap();
        let cfg = McConfig::new(20_000, 2);
        let free = mc_lemma_event(&mu, &nu, &ShiftFunction::zero(&nu), f64::INFINITY, &cfg).unwrap();
        assert!(free.p_hat <= 0.5 + 3.0 * (0.25f64 / 20_000.0).sqrt());

        let shifted = ShiftFunction::new(vec![0.0, 1.0, 2.0], vec![1e6; 3]).unwrap();
        assert_eq!(mc_lemma_event(&mu, &nu, &shifted, 0.0, &cfg).unwrap().successes, 0);

        let point = AtomicMeasure::new(vec![(0.0, 1.0)]).unwrap();
        let e = mc_lemma_event(&mu, &point, &ShiftFunction::zero(&point), f64::INFINITY, &cfg).unwrap();
        assert!((e.p_hat - 0.5).abs() < 3.0 * (0.25f64 / 20_000.0).sqrt());

        let wrong = ShiftFunction::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(mc_lemma_event(&mu, &nu, &wrong, 1.0, &cfg).is_err());
    }
}
