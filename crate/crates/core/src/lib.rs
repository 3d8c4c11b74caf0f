//! Sign persistence of stationary Gaussian processes with a spectral gap.
//!
//! Upper bounds come from per-band certificate polynomials assembled over a
//! dyadic decomposition of the spectrum; lower bounds from the regression
//! construction driven by `rho_n`. A Monte Carlo sampler checks both.

pub mod certificate;
pub mod dyadic;
pub mod error;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod sampler;
pub mod sharpness;
pub mod spectral;
pub mod toeplitz;

pub use certificate::{certify_band, AtomicMeasure, Certificate};
pub use dyadic::{assemble, plan_bands, AssembledBound, BandPlan};
pub use error::{Error, Result};
pub use poly::Polynomial;
pub use sampler::{mc_persistence, McConfig, McEstimate, SamplePath};
pub use spectral::{parse_measure, BandId, SpectralMeasure};
