//! Adaptive stratification for unbiased Monte Carlo integration over `[0,1]^s`.
//!
//! A preliminary sample trains a variance-minimizing partition tree whose
//! leaves become the strata of a second, independent stratified sample.
//!
//! Module map:
//! - [`geometry`]: axis-aligned rectangles with exact rational volumes.
//! - [`stats`]: streaming moments and replicate RMSE summaries.
//! - [`tree`]: learning partitions from a preliminary sample.
//! - [`estimators`]: plain MC, Haber order one, adaptive and oracle stratification.
//! - [`oracle`]: closed-form criteria and predicted convergence rates.
//! - [`integrands`]: test integrands and the logistic-regression evidence integrand.
//! - [`data`]: dataset loading and synthetic fixtures.
//! - [`bench`]: RMSE sweeps, CSV output and slope fitting.
//! - [`replicate`]: seed derivation and (optionally parallel) replicate execution.

pub mod bench;
pub mod data;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod integrands;
pub mod oracle;
pub mod replicate;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use estimators::EstimateReport;
pub use geometry::{Rectangle, SplitPair};
pub use integrands::IntegrandSpec;
pub use tree::{Partition, SampleBatch};
