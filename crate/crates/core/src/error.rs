use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed measure document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `delta` does not satisfy `mu([-delta, delta]) = 0`.
    #[error("delta = {delta} is not admissible: gap_radius = {gap_radius} (need mu([-delta, delta]) = 0)")]
    GapViolated { delta: f64, gap_radius: f64 },

    #[error("measure support [{lo}, {hi}] is outside the band ({band_lo}, {band_hi}]")]
    SupportOutsideBand {
        lo: f64,
        hi: f64,
        band_lo: f64,
        band_hi: f64,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("moment matrix too ill-conditioned at n = {n} (condition estimate {condition:e}, limit n <= {max_n})")]
    IllConditioned { n: usize, condition: f64, max_n: usize },

    #[error("band k = {k} has n_a = {n_a} < n_0 = {n0}; increase L to at least {min_length}")]
    BandTooShort {
        k: u32,
        n_a: usize,
        n0: usize,
        min_length: f64,
    },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    /// A certified inequality failed or a construction produced an impossible value.
    #[error("numerical defect: {0}")]
    Defect(String),
}

impl Error {
    /// Numerical defects are distinguished from input validation failures.
    pub fn is_defect(&self) -> bool {
        matches!(self, Error::Defect(_) | Error::NoConvergence { .. })
    }
}
