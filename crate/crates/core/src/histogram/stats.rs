use super::{Dataset, Partition};

/// Per-cell sufficient statistics of a dataset on a partition.
///
/// `centered_ss[l]` is `sum (y_i - mean_l)^2` over the cell, computed in a
/// second pass. Every penalty only needs `count * sum_y2 - sum_y^2`, which
/// equals `count * centered_ss` whatever centering constant is used.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    n: usize,
    counts: Vec<usize>,
    sum_y: Vec<f64>,
    sum_y2: Vec<f64>,
    centered_ss: Vec<f64>,
}

impl CellStats {
    pub fn from_data(dataset: &Dataset, partition: &Partition) -> Self {
        let cells: Vec<usize> = dataset.x().iter().map(|&x| partition.locate(x)).collect();
        Self::from_cells(partition.dim(), &cells, dataset.y())
    }

    /// Builds the statistics from precomputed cell indices.
    pub fn from_cells(dim: usize, cells: &[usize], y: &[f64]) -> Self {
        debug_assert_eq!(cells.len(), y.len());
        let mut counts = vec![0usize; dim];
        let mut sum_y = vec![0.0; dim];
        let mut sum_y2 = vec![0.0; dim];
        for (&c, &v) in cells.iter().zip(y) {
            counts[c] += 1;
            sum_y[c] += v;
            sum_y2[c] += v * v;
        }
        let mut centered_ss = vec![0.0; dim];
        for (&c, &v) in cells.iter().zip(y) {
            let d = v - sum_y[c] / counts[c] as f64;
            centered_ss[c] += d * d;
        }
        Self {
            n: y.len(),
            counts,
            sum_y,
            sum_y2,
            centered_ss,
        }
    }

    /// Number of observations the statistics were built from.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, cell: usize) -> usize {
        self.counts[cell]
    }

    pub fn sum_y(&self) -> &[f64] {
        &self.sum_y
    }

    pub fn sum_y2(&self) -> &[f64] {
        &self.sum_y2
    }

    pub fn centered_ss(&self) -> &[f64] {
        &self.centered_ss
    }

    pub fn min_count(&self) -> usize {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    /// `count * sum (y - c)^2 - (sum (y - c))^2` for the cell, independent of `c`.
    pub fn spread(&self, cell: usize) -> f64 {
        self.counts[cell] as f64 * self.centered_ss[cell]
    }

    pub fn mean(&self, cell: usize) -> Option<f64> {
        (self.counts[cell] > 0).then(|| self.sum_y[cell] / self.counts[cell] as f64)
    }

    /// Empirical risk of the regressogram on the data the statistics came
    /// from; `None` if some cell is empty.
    pub fn empirical_risk(&self) -> Option<f64> {
        if self.min_count() == 0 {
            return None;
        }
        Some(self.centered_ss.iter().sum::<f64>() / self.n as f64)
    }
}
