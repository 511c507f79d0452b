//! Simulation experiments and the replication engine.

pub mod experiments;
pub mod runner;
pub mod seeds;

use std::f64::consts::PI;

pub use experiments::{
    gen_dataset, model_collection, parse_procedure, sample_dataset, CollectionRule, ExperimentConfig, ExperimentName,
    NamedProcedure, Procedure,
};
pub use runner::{
    oracle_losses, ratio_of_means, run_benchmark, BenchmarkResult, Estimate, LossDecomposition, OracleLosses,
    ProcedureSummary, ReplicationSamples,
};

/// Donoho–Johnstone HeaviSine: `4 sin(4 pi x) - sgn(x - 0.3) - sgn(0.72 - x)`.
pub fn heavisine(x: f64) -> f64 {
    4.0 * (4.0 * PI * x).sin() - sgn(x - 0.3) - sgn(0.72 - x)
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavisine_values() {
        assert!((heavisine(0.3) - (4.0 * (1.2 * PI).sin() - 1.0)).abs() < 1e-12);
        assert!((heavisine(0.72) - (4.0 * (2.88 * PI).sin() - 1.0)).abs() < 1e-12);
        assert!((heavisine(0.3 - 1e-12) - heavisine(0.3 + 1e-12)).abs() > 1.9);
        assert!((heavisine(0.5 - 1e-9) - heavisine(0.5 + 1e-9)).abs() < 1e-6);
    }
}
