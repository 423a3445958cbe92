//! Gaussianization flows with random rotations.
//!
//! The crate is organised around the pieces needed to study how fast iterative
//! Gaussianization converges:
//!
//! - [`rotations`]: Haar-distributed orthogonal matrices and covariance spectra.
//! - [`theory`]: closed-form Gaussian loss, the exact block update on covariances
//!   and evaluators for the layer-count and rate bounds.
//! - [`spline`]: the quantile-fitted rational-quadratic transform used per dimension.
//! - [`model`]: Gaussianization blocks, the iterative trainer and loss estimators.
//! - [`distributions`]: synthetic data with known densities and entropies.
//! - [`experiments`]: the measurement protocol and the scaling / spurious-projection
//!   experiments, emitting [`ConvergenceRecord`] rows.

pub mod distributions;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod rotations;
pub mod spline;
pub mod stats;
pub mod theory;

pub use distributions::{BimodalTarget, Histogram, ToyCase, ToyDistribution};
pub use error::{Error, Result};
pub use experiments::{ConvergenceRecord, RateMethod, ScalingFit, SpuriousResult};
pub use model::{Block, Dataset, GaussianizationModel, TrainConfig};
pub use rng::RngSeed;
pub use rotations::{HaarReflectors, OrthogonalMatrix, Spectrum, SpectrumCase};
pub use spline::{MonotoneTransform1D, SplineConfig, TieHandling};
pub use theory::{CovarianceState, ExactChain, TheoryBound};
