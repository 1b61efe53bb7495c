//! Numerical laboratory for uniform convergence of interpolators in
//! high-dimensional Gaussian linear regression.
//!
//! The crate covers the data model, minimum-norm and worst-case
//! interpolators, Gaussian widths and effective ranks, the generalization,
//! norm and risk bounds, covariance splits, Gaussian minimax tail checks and
//! the experiment drivers behind the `interp-lab` command line tool.

pub mod bounds;
pub mod cgmt;
pub mod complexity;
pub mod error;
pub mod experiments;
pub mod interpolators;
pub mod linalg;
pub mod model;
pub mod norms;
pub mod rng;
pub mod splitting;
pub mod stats;

pub use error::{LabError, Result};
pub use model::{
    empirical_loss, population_loss, sample_dataset, Basis, CovSplit, CovarianceModel, Dataset,
    DimLimits, ProblemSpec, SpectralGroup, Spectrum,
};
pub use norms::Norm;
