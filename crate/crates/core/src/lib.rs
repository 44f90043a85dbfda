//! Nonparametric Bayesian decompounding of discretely observed compound
//! Poisson processes.
//!
//! Modules follow the pipeline: [`model`] (jump densities and their
//! convolution algebra), [`simulate`] (paths and increments), [`likelihood`]
//! (increment density and likelihoods), [`prior`] (intensity prior and
//! truncated Dirichlet-process location mixture), [`posterior`]
//! (data-augmentation MCMC), [`metrics`] (Hellinger, Kullback–Leibler and
//! V-discrepancy at jump, increment and path level) and [`cli`].

pub mod cli;
pub mod error;
mod fftgrid;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod posterior;
pub mod prior;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use likelihood::{DensityConfig, IncrementDensity};
pub use model::{CppModel, Grid, NormalMixture};
pub use rng::RngStream;
pub use simulate::{IncrementSample, SamplePath};
