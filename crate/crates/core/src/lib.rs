//! Resampling penalization for model selection among histogram regression
//! estimators.
//!
//! The crate computes exact closed-form resampling penalties for the
//! classical exchangeable weight schemes, their Monte-Carlo counterparts,
//! Mallows' `C_p`, V-fold penalties and cross-validation, and provides a
//! simulation harness measuring how close each selector gets to the oracle.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod histogram;
pub mod penalties;
pub mod quadrature;
pub mod selection;
pub mod simbench;
pub mod weights;

pub use error::{Error, Result};
pub use histogram::{CellStats, Dataset, Partition, Regressogram, RegressionTruth};
pub use weights::{FoldAssignment, WeightScheme};
