//! Histogram models on `[0, 1]`: partitions, datasets, per-cell sufficient
//! statistics, regressogram fits and their losses against a known truth.

mod dataset;
mod partition;
mod regressogram;
mod stats;
mod truth;

pub use dataset::Dataset;
pub use partition::Partition;
pub use regressogram::{empirical_risk, excess_loss, fit_regressogram, Regressogram};
pub use stats::CellStats;
pub use truth::{CellTruth, NoiseLevel, RegressionTruth, Signal};
