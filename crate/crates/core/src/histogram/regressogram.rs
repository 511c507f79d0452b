use super::truth::QUAD_TOL;
use super::{CellStats, Dataset, Partition, RegressionTruth};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Least-squares histogram estimator: the mean response on every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressogram {
    pub partition: Partition,
    /// Cell means; `NaN` where the cell is empty.
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
}

impl Regressogram {
    pub fn is_defined(&self) -> bool {
        self.defined.iter().all(|&d| d)
    }

    pub fn predict(&self, x: f64) -> Option<f64> {
        let cell = self.partition.locate(x);
        self.defined[cell].then(|| self.values[cell])
    }
}

pub fn fit_regressogram(partition: &Partition, stats: &CellStats) -> Regressogram {
    debug_assert_eq!(partition.dim(), stats.dim());
    let defined: Vec<bool> = stats.counts().iter().map(|&c| c > 0).collect();
    let values = (0..stats.dim())
        .map(|l| stats.mean(l).unwrap_or(f64::NAN))
        .collect();
    Regressogram {
        partition: partition.clone(),
        values,
        defined,
    }
}

/// `(1/n) sum_i (y_i - fit(x_i))^2`.
pub fn empirical_risk(fit: &Regressogram, dataset: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (&x, &y) in dataset.x().iter().zip(dataset.y()) {
        let cell = fit.partition.locate(x);
        if !fit.defined[cell] {
            return Err(Error::UndefinedCell { cell });
        }
        total += (y - fit.values[cell]).powi(2);
    }
    Ok(total / dataset.len() as f64)
}

/// `E[(fit(X) - s(X))^2]` under the uniform design, by per-cell quadrature.
/// An undefined fit has infinite loss.
pub fn excess_loss(truth: &RegressionTruth, fit: &Regressogram) -> f64 {
    if !fit.is_defined() {
        return f64::INFINITY;
    }
    let jumps = truth.signal.jumps();
    (0..fit.partition.dim())
        .map(|cell| {
            let (a, b) = fit.partition.bounds(cell);
            let v = fit.values[cell];
            integrate(|t| (v - truth.s(t)).powi(2), a, b, &jumps, QUAD_TOL)
        })
        .sum()
}
