//! Command-line front end for `gap-persistence`.
//!
//! Every command renders into a byte buffer, so output is a pure function of
//! the arguments; `main` only writes it out and maps errors to exit codes.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use gap_persistence::dyadic::{assemble_with, persistence_upper_bound, AssemblyTrace, DEFAULT_CPP};
use gap_persistence::sampler::{default_step, last_grid_index, mc_persistence_sweep, sample_path, McConfig, McEstimate};
use gap_persistence::sharpness::{lower_bound, LowerBoundTrace};
use gap_persistence::toeplitz::{rho, toeplitz_spectrum};
use gap_persistence::{parse_measure, Error, SpectralMeasure};

pub mod output;

use output::{csv_float, sweep_svg, CsvTable};

/// Exit status for invalid input or an inapplicable request.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status when a numerical routine reports a defect.
pub const EXIT_DEFECT: u8 = 3;

const DEFAULT_TRIALS: u64 = 100_000;
const DEFAULT_TABLE_N: usize = 8;
const SWEEP_POINTS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Monte Carlo estimate of P{f >= 0 on [0, L]} on a grid
    Estimate,
    /// Assembled upper bound with its per-band trace
    Certify,
    /// Lower bound from the rho condition with constant C
    Lower,
    /// rho_n^2 for n = 0..=n
    Rho,
    /// Least Toeplitz eigenvalue for N = 0..=n
    Sigma,
    /// One sample path on [0, L]
    Sample,
    /// Estimates and bounds over several lengths, with a quadratic fit
    Sweep,
    /// Everything above as one JSON document
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "gap-persist", version, about = "Sign persistence of gapped stationary Gaussian processes")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Measure description (JSON)
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Interval length; `sweep` also takes a comma-separated list
    #[arg(long = "L", value_delimiter = ',', allow_negative_numbers = true)]
    pub length: Vec<f64>,
    /// Grid step for Monte Carlo and sampling
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gap used for the band decomposition (default: the measure's gap)
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Band-size constant c''
    #[arg(long, default_value_t = DEFAULT_CPP, allow_negative_numbers = true)]
    pub cpp: f64,
    /// Largest n (rho) or N (sigma)
    #[arg(long)]
    pub n: Option<usize>,
    /// Constant of the rho condition
    #[arg(long = "C", allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Support radius for the lower bound (default: the measure's)
    #[arg(long = "R", allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Integer-time process: only bands with a <= 1
    #[arg(long)]
    pub discrete: bool,
    /// Monte Carlo worker threads; results do not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Input rejected before or during a run (exit status 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Usage(msg.into()).into())
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_defect() => EXIT_DEFECT,
        _ => EXIT_VALIDATION,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    #[serde(rename = "L")]
    pub length: f64,
    pub step: f64,
    pub seed: u64,
    pub estimate: McEstimate,
    pub stderr: f64,
    /// The grid event contains the continuous one.
    pub grid_upper_approximation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub n: usize,
    pub rho2: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub length: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub upper_bound: f64,
    pub lower_bound_log10: Option<f64>,
}

/// Least-squares fit `log p_hat = b0 + b1 L + b2 L^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub step: f64,
    pub trials: u64,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub fit: Option<Fit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section<T> {
    Ok(T),
    Error(String),
}

impl<T> From<anyhow::Result<T>> for Section<T> {
    fn from(r: anyhow::Result<T>) -> Self {
        match r {
            Ok(v) => Section::Ok(v),
            Err(e) => Section::Error(format!("{e:#}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub measure: SpectralMeasure,
    pub gap_radius: f64,
    pub estimate: Section<EstimateOutput>,
    pub certify: Section<AssemblyTrace>,
    pub lower: Section<LowerBoundTrace>,
    pub rho: Section<Vec<RhoRow>>,
    pub sigma: Section<Vec<SigmaRow>>,
    pub sweep: Section<SweepOutput>,
}

impl Cli {
    fn measure(&self) -> anyhow::Result<SpectralMeasure> {
        let Some(path) = &self.measure else {
            return usage(format!("{:?} needs --measure", self.command));
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_measure(&text).context("spectral_measure")
    }

    fn single_length(&self) -> anyhow::Result<f64> {
        match self.length.as_slice() {
            [l] if l.is_finite() && *l >= 0.0 => Ok(*l),
            [l] => usage(format!("--L must be finite and nonnegative, got {l}")),
            [] => usage("--L is required"),
            _ => usage("--L takes a single value for this command"),
        }
    }

    fn sweep_lengths(&self) -> anyhow::Result<Vec<f64>> {
        let lengths = match self.length.as_slice() {
            [] => return usage("--L is required"),
            [max] => (0..SWEEP_POINTS).map(|i| max * i as f64 / (SWEEP_POINTS - 1) as f64).collect(),
            list => list.to_vec(),
        };
        if lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return usage("--L values must be finite and nonnegative");
        }
        Ok(lengths)
    }

    fn mc_config(&self) -> anyhow::Result<McConfig> {
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return usage("--trials must be positive");
        }
        let mut cfg = McConfig::new(trials, self.seed);
        if let Some(w) = self.workers {
            if w == 0 {
                return usage("--workers must be positive");
            }
            cfg = cfg.with_workers(w);
        }
        Ok(cfg)
    }

    fn step_for(&self, mu: &SpectralMeasure, length: f64) -> anyhow::Result<f64> {
        match self.step {
            Some(s) if s > 0.0 && s.is_finite() => Ok(s),
            Some(s) => usage(format!("--step must be positive, got {s}")),
            None => Ok(default_step(mu, length)),
        }
    }

    fn delta_for(&self, mu: &SpectralMeasure) -> f64 {
        self.delta.unwrap_or_else(|| mu.admissible_delta())
    }

    fn format(&self, default: Format, allowed: &[Format]) -> anyhow::Result<Format> {
        let f = self.format.unwrap_or(default);
        if !allowed.contains(&f) {
            return usage(format!("{:?} does not support --format {:?}", self.command, f).to_lowercase());
        }
        Ok(f)
    }
}

/// Runs one command and returns the rendered output.
pub fn run(cli: &Cli) -> anyhow::Result<Vec<u8>> {
    use Format::*;
    let text = match cli.command {
        Command::Estimate => {
            let format = cli.format(Csv, &[Csv, Json])?;
            let out = estimate(cli, &cli.measure()?)?;
            match format {
                Json => json(&out),
                _ => estimate_csv(&out),
            }
        }
        Command::Certify => {
            let format = cli.format(Json, &[Csv, Json])?;
            let trace = certify(cli, &cli.measure()?)?;
            match format {
                Csv => certify_csv(&trace),
                _ => json(&trace),
            }
        }
        Command::Lower => {
            let format = cli.format(Json, &[Csv, Json])?;
            let trace = lower(cli, cli.measure.as_ref().map(|_| cli.measure()).transpose()?.as_ref())?;
            match format {
                Csv => lower_csv(&trace),
                _ => json(&trace),
            }
        }
        Command::Rho => {
            let format = cli.format(Csv, &[Csv, Json])?;
            let rows = rho_table(cli, &cli.measure()?)?;
            match format {
                Json => json(&rows),
                _ => {
                    let mut csv = CsvTable::new(&["n", "rho2", "condition"]);
                    rows.iter().for_each(|r| csv.row(&[r.n.to_string(), csv_float(r.rho2), csv_float(r.condition)]));
                    csv.finish()
                }
            }
        }
        Command::Sigma => {
            let format = cli.format(Csv, &[Csv, Json])?;
            let rows = sigma_table(cli, &cli.measure()?)?;
            match format {
                Json => json(&rows),
                _ => {
                    let mut csv = CsvTable::new(&["N", "sigma2"]);
                    rows.iter().for_each(|r| csv.row(&[r.big_n.to_string(), csv_float(r.sigma2)]));
                    csv.finish()
                }
            }
        }
        Command::Sample => {
            let format = cli.format(Csv, &[Csv, Json])?;
            let mu = cli.measure()?;
            let length = cli.single_length()?;
            let step = cli.step_for(&mu, length)?;
            let path = sample_path(&mu, 0.0, step, last_grid_index(length, step) + 1, cli.seed).context("gp_sampler")?;
            match format {
                Json => json(&path),
                _ => {
                    let mut csv = CsvTable::new(&["x", "f"]);
                    path.values
                        .iter()
                        .enumerate()
                        .for_each(|(j, v)| csv.row(&[csv_float(path.point(j)), csv_float(*v)]));
                    csv.finish()
                }
            }
        }
        Command::Sweep => {
            let format = cli.format(Csv, &[Csv, Json, Svg])?;
            let out = sweep(cli, &cli.measure()?)?;
            match format {
                Json => json(&out),
                Svg => sweep_svg(&out),
                Csv => sweep_csv(&out),
            }
        }
        Command::Report => {
            cli.format(Json, &[Json])?;
            json(&report(cli)?)
        }
    };
    Ok(text.into_bytes())
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

pub fn estimate(cli: &Cli, mu: &SpectralMeasure) -> anyhow::Result<EstimateOutput> {
    let length = cli.single_length()?;
    let step = cli.step_for(mu, length)?;
    let cfg = cli.mc_config()?;
    let estimate = mc_persistence_sweep(mu, &[length], step, &cfg).context("gp_sampler")?.remove(0);
    Ok(EstimateOutput {
        length,
        step,
        seed: cli.seed,
        stderr: estimate.stderr(),
        estimate,
        grid_upper_approximation: true,
    })
}

fn estimate_csv(out: &EstimateOutput) -> String {
    let mut csv = CsvTable::new(&["L", "step", "trials", "successes", "p_hat", "stderr", "ci_lo", "ci_hi"]);
    let e = &out.estimate;
    csv.row(&[
        csv_float(out.length),
        csv_float(out.step),
        e.trials.to_string(),
        e.successes.to_string(),
        csv_float(e.p_hat),
        csv_float(out.stderr),
        csv_float(e.ci_lo),
        csv_float(e.ci_hi),
    ]);
    csv.finish()
}

pub fn certify(cli: &Cli, mu: &SpectralMeasure) -> anyhow::Result<AssemblyTrace> {
    let length = cli.single_length()?;
    let bound = assemble_with(mu, cli.delta_for(mu), length, cli.cpp, cli.discrete).context("dyadic_assembly")?;
    Ok(bound.trace())
}

fn certify_csv(trace: &AssemblyTrace) -> String {
    let mut csv = CsvTable::new(&[
        "k", "a", "n_a", "N", "m", "mass", "sigma", "energy", "energy_bound", "prob_bound", "flat_block_error", "checks_passed",
    ]);
    for b in &trace.bands {
        csv.row(&[
            b.k.to_string(),
            csv_float(b.a),
            b.n_a.to_string(),
            b.big_n.to_string(),
            b.m.to_string(),
            csv_float(b.mass),
            csv_float(b.sigma),
            csv_float(b.energy),
            csv_float(b.energy_bound),
            csv_float(b.prob_bound),
            csv_float(b.flat_block_error),
            b.checks_passed.to_string(),
        ]);
    }
    csv.finish()
}

pub fn lower(cli: &Cli, mu: Option<&SpectralMeasure>) -> anyhow::Result<LowerBoundTrace> {
    let Some(c) = cli.c else {
        return usage("lower needs --C");
    };
    let radius = match (cli.r, mu) {
        (Some(r), _) => r,
        (None, Some(mu)) => mu.support_radius(),
        (None, None) => return usage("lower needs --R or --measure"),
    };
    lower_bound(c, cli.single_length()?, radius).context("sharpness")
}

fn lower_csv(t: &LowerBoundTrace) -> String {
    let mut csv = CsvTable::new(&["C", "L", "R", "p0", "C_tilde", "K", "ln_bound", "log10_bound"]);
    csv.row(&[
        csv_float(t.c),
        csv_float(t.length),
        csv_float(t.radius),
        csv_float(t.p0),
        csv_float(t.c_tilde),
        csv_float(t.k),
        csv_float(t.ln_bound),
        csv_float(t.log10_bound),
    ]);
    csv.finish()
}

pub fn rho_table(cli: &Cli, mu: &SpectralMeasure) -> anyhow::Result<Vec<RhoRow>> {
    (0..=cli.n.unwrap_or(DEFAULT_TABLE_N))
        .map(|n| {
            let v = rho(mu, n).context("toeplitz")?;
            Ok(RhoRow { n, rho2: v.rho2, condition: v.condition })
        })
        .collect()
}

pub fn sigma_table(cli: &Cli, mu: &SpectralMeasure) -> anyhow::Result<Vec<SigmaRow>> {
    (0..=cli.n.unwrap_or(DEFAULT_TABLE_N))
        .map(|n| Ok(SigmaRow { big_n: n, sigma2: toeplitz_spectrum(mu, n).context("toeplitz")?.sigma2 }))
        .collect()
}

pub fn sweep(cli: &Cli, mu: &SpectralMeasure) -> anyhow::Result<SweepOutput> {
    let lengths = cli.sweep_lengths()?;
    let max = lengths.iter().copied().fold(0.0, f64::max);
    let step = cli.step_for(mu, max)?;
    let cfg = cli.mc_config()?;
    let estimates = mc_persistence_sweep(mu, &lengths, step, &cfg).context("gp_sampler")?;
    let delta = cli.delta_for(mu);
    let radius = cli.r.unwrap_or_else(|| mu.support_radius());
    let rows = lengths
        .iter()
        .zip(&estimates)
        .map(|(&length, e)| {
            let upper_bound = if length > 0.0 {
                persistence_upper_bound(mu, delta, length, cli.cpp, cli.discrete).context("dyadic_assembly")?
            } else {
                0.5
            };
            let lower_bound_log10 = match cli.c {
                Some(c) if length >= 1.0 => Some(lower_bound(c, length, radius).context("sharpness")?.log10_bound),
                _ => None,
            };
            Ok(SweepRow { length, p_hat: e.p_hat, stderr: e.stderr(), upper_bound, lower_bound_log10 })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let fit = fit_quadratic(&rows);
    Ok(SweepOutput { step, trials: cfg.trials, seed: cfg.master_seed, rows, fit })
}

/// Least squares for `log p_hat` against `1, L, L^2` over rows with `p_hat > 0`.
pub fn fit_quadratic(rows: &[SweepRow]) -> Option<Fit> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.p_hat > 0.0).map(|r| (r.length, r.p_hat.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(x, y) in &pts {
        let basis = [1.0, x, x * x];
        for i in 0..3 {
            atb[i] += basis[i] * y;
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&ata);
    if d.abs() < 1e-300 {
        return None;
    }
    // Cramer's rule.
    let b: Vec<f64> = (0..3)
        .map(|k| {
            let mut m = ata;
            for i in 0..3 {
                m[i][k] = atb[i];
            }
            det(&m) / d
        })
        .collect();
    Some(Fit { b0: b[0], b1: b[1], b2: b[2] })
}

fn sweep_csv(out: &SweepOutput) -> String {
    let mut csv = CsvTable::new(&["L", "p_hat", "stderr", "upper_bound", "lower_bound_log10"]);
    for r in &out.rows {
        csv.row(&[
            csv_float(r.length),
            csv_float(r.p_hat),
            csv_float(r.stderr),
            csv_float(r.upper_bound),
            r.lower_bound_log10.map(csv_float).unwrap_or_default(),
        ]);
    }
    match out.fit {
        Some(f) => csv.row(&["fit".into(), csv_float(f.b0), csv_float(f.b1), csv_float(f.b2), String::new()]),
        None => csv.row(&["fit".into(), String::new(), String::new(), String::new(), String::new()]),
    }
    csv.finish()
}

pub fn report(cli: &Cli) -> anyhow::Result<ReportOutput> {
    let mu = cli.measure()?;
    let length = cli.single_length()?;
    let table_cli = Cli { n: Some(cli.n.unwrap_or(DEFAULT_TABLE_N)), ..cli.clone() };
    let sweep_cli = Cli { length: vec![length], ..cli.clone() };
    Ok(ReportOutput {
        gap_radius: mu.gap_radius(),
        estimate: estimate(cli, &mu).into(),
        certify: certify(cli, &mu).into(),
        lower: lower(cli, Some(&mu)).into(),
        rho: rho_table(&table_cli, &mu).into(),
        sigma: sigma_table(&table_cli, &mu).into(),
        sweep: sweep(&sweep_cli, &mu).into(),
        measure: mu,
    })
}

pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}

/// Parses a sweep CSV back into rows and the fit.
pub fn parse_sweep_csv(text: &str) -> anyhow::Result<(Vec<SweepRow>, Option<Fit>)> {
    let mut lines = text.lines();
    if lines.next() != Some("L,p_hat,stderr,upper_bound,lower_bound_log10") {
        bail!("unexpected sweep header");
    }
    let mut rows = Vec::new();
    let mut fit = None;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            bail!("sweep row needs 5 fields: {line}");
        }
        let num = |s: &str| -> anyhow::Result<f64> { Ok(s.parse::<f64>()?) };
        if f[0] == "fit" {
            if !f[1].is_empty() {
                fit = Some(Fit { b0: num(f[1])?, b1: num(f[2])?, b2: num(f[3])? });
            }
            continue;
        }
        rows.push(SweepRow {
            length: num(f[0])?,
            p_hat: num(f[1])?,
            stderr: num(f[2])?,
            upper_bound: num(f[3])?,
            lower_bound_log10: if f[4].is_empty() { None } else { Some(num(f[4])?) },
        });
    }
    Ok((rows, fit))
}

/// Renders rows and fit exactly as the `sweep` command does.
pub fn render_sweep_csv(rows: &[SweepRow], fit: Option<Fit>) -> String {
    sweep_csv(&SweepOutput { step: 0.0, trials: 0, seed: 0, rows: rows.to_vec(), fit })
}
