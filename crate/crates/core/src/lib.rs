//! Sampling-rate-distortion bounds for support recovery of sparse vectors
//! from random linear samples, with the numerical machinery needed to check
//! them: the scalar hypothesis test behind the thresholding estimator,
//! Monte Carlo simulation of the random source, and free-probability
//! spectral limits of the projected sampling matrices.

pub mod bounds;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod freeprob;
mod gauss;
pub mod hypothesis;
pub mod io;
pub mod linalg;
pub mod math;
pub mod quadrature;
pub mod simulation;

pub use distribution::{DistributionSpec, EntropyPower, SparsityConfig};
pub use error::{Error, Result};
pub use hypothesis::{MixtureModel, ThresholdSet};
