//! Penalty functions: closed-form and Monte-Carlo resampling penalties,
//! Mallows' `C_p`, the expectation of the ideal penalty, V-fold penalties.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::delta_ideal;
use crate::error::{Error, Result};
use crate::histogram::{CellStats, CellTruth, Dataset, Partition, RegressionTruth};
use crate::weights::{FoldAssignment, ResamplingConstants, WeightScheme};

/// Which penalty to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    RpClosed { scheme: WeightScheme },
    RpMonteCarlo { scheme: WeightScheme, draws: usize },
    Mallows,
    /// Simulation only: needs the true regression function and noise level.
    ExpectedIdeal { truth: RegressionTruth },
    VFoldPen { v: usize },
}

/// A penalty together with its overpenalization factor.
///
/// The effective constant is `c_over_cw * C_W` for resampling penalties,
/// `c_over_cw * (V - 1)` for V-fold penalties and `c_over_cw` for Mallows
/// and the expected ideal penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub c_over_cw: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, c_over_cw: f64) -> Self {
        Self { kind, c_over_cw }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_over_cw >= 0.0 && self.c_over_cw.is_finite()) {
            return Err(Error::InvalidArgument(format!("overpenalization {} must be >= 0", self.c_over_cw)));
        }
        match &self.kind {
            PenaltyKind::RpMonteCarlo { draws, .. } if *draws < 2 => {
                Err(Error::InvalidArgument("Monte-Carlo penalty needs at least 2 draws".into()))
            }
            PenaltyKind::VFoldPen { v } if *v < 2 => Err(Error::InvalidArgument("V-fold penalty needs V >= 2".into())),
            _ => Ok(()),
        }
    }

    /// The multiplicative constant `C` for a sample of size `n`.
    pub fn constant(&self, n: usize) -> Result<f64> {
        let base = match &self.kind {
            PenaltyKind::RpClosed { scheme } | PenaltyKind::RpMonteCarlo { scheme, .. } => scheme.c_w(n)?,
            PenaltyKind::VFoldPen { v } => *v as f64 - 1.0,
            PenaltyKind::Mallows | PenaltyKind::ExpectedIdeal { .. } => 1.0,
        };
        Ok(self.c_over_cw * base)
    }
}

/// Closed-form resampling penalty with constant `c`:
/// `(c/n) sum_l (R1 + R2)(n, k_l) * k_l * css_l / (k_l (k_l - 1))` over cells
/// with `k_l >= 2`, `css_l` the centered sum of squares of the cell.
pub fn rp_penalty_closed(stats: &CellStats, scheme: &WeightScheme, c: f64) -> Result<f64> {
    let n = stats.n();
    if !scheme.is_exchangeable() {
        return Err(Error::NoClosedForm(scheme.label()));
    }
    scheme.validate(n)?;
    let mut total = 0.0;
    for cell in 0..stats.dim() {
        let k = stats.count(cell);
        if k >= 2 {
            total += scheme.r_sum(n, k)? * cell_factor(stats, cell);
        }
    }
    Ok(c * total / n as f64)
}

/// Same as [`rp_penalty_closed`] with `R1 + R2` read from a table.
pub fn rp_penalty_tabulated(stats: &CellStats, table: &ResamplingConstants, c: f64) -> Result<f64> {
    let n = stats.n();
    if table.n() != n {
        return Err(Error::InvalidArgument(format!("table built for n = {}, data has n = {n}", table.n())));
    }
    let mut total = 0.0;
    for cell in 0..stats.dim() {
        let k = stats.count(cell);
        if k >= 2 {
            total += table.r_sum(k) * cell_factor(stats, cell);
        }
    }
    Ok(c * total / n as f64)
}

/// `spread / (k (k - 1))`, the unbiased within-cell variance estimate.
fn cell_factor(stats: &CellStats, cell: usize) -> f64 {
    let k = stats.count(cell) as f64;
    stats.spread(cell) / (k * (k - 1.0))
}

/// Monte-Carlo resampling penalty with its jackknife standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McPenalty {
    pub value: f64,
    pub std_error: f64,
    /// Non-empty cells whose resampled weight was zero in every draw; their
    /// conditional term is set to 0.
    pub degenerate_cells: Vec<usize>,
}

impl McPenalty {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_cells.is_empty()
    }
}

/// Draws `draws` weight vectors from `scheme` and averages the resampled
/// penalty, conditioning each cell's first term on a positive cell weight.
pub fn rp_penalty_mc<R: Rng + ?Sized>(
    dataset: &Dataset,
    partition: &Partition,
    scheme: &WeightScheme,
    c: f64,
    draws: usize,
    rng: &mut R,
) -> Result<McPenalty> {
    let n = dataset.len();
    scheme.validate(n)?;
    let mut buf = vec![0.0; n];
    let mut err = None;
    let weights = (0..draws).map(|_| {
        if let Err(e) = scheme.sample_into(&mut buf, rng) {
            err = Some(e);
        }
        buf.clone()
    });
    let out = rp_penalty_from_weights(dataset, partition, weights, c);
    match err {
        Some(e) => Err(e),
        None => out,
    }
}

/// Monte-Carlo penalty from an explicit sequence of weight vectors.
pub fn rp_penalty_from_weights<I>(dataset: &Dataset, partition: &Partition, weights: I, c: f64) -> Result<McPenalty>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    let n = dataset.len();
    let dim = partition.dim();
    let cells: Vec<usize> = dataset.x().iter().map(|&x| partition.locate(x)).collect();
    let stats = CellStats::from_cells(dim, &cells, dataset.y());
    let nf = n as f64;

    // per draw and cell: first term (NaN when the cell weight is 0) and second term
    let mut t1: Vec<f64> = Vec::new();
    let mut t2: Vec<f64> = Vec::new();
    let mut sw = vec![0.0; dim];
    let mut swy = vec![0.0; dim];
    let mut draws = 0usize;
    for w in weights {
        let w = w.as_ref();
        if w.len() != n {
            return Err(Error::InvalidArgument(format!("weight vector of length {} for n = {n}", w.len())));
        }
        sw.iter_mut().for_each(|v| *v = 0.0);
        swy.iter_mut().for_each(|v| *v = 0.0);
        for ((&cell, &wi), &yi) in cells.iter().zip(w).zip(dataset.y()) {
            sw[cell] += wi;
            swy[cell] += wi * yi;
        }
        for cell in 0..dim {
            let k = stats.count(cell);
            if k == 0 {
                t1.push(f64::NAN);
                t2.push(0.0);
                continue;
            }
            let p_hat = k as f64 / nf;
            if sw[cell] > 0.0 {
                let beta = stats.sum_y()[cell] / k as f64;
                let d2 = (swy[cell] / sw[cell] - beta).powi(2);
                let w_bar = sw[cell] / k as f64;
                t1.push(p_hat * d2);
                t2.push(p_hat * w_bar * d2);
            } else {
                t1.push(f64::NAN);
                t2.push(0.0);
            }
        }
        draws += 1;
    }
    if draws < 2 {
        return Err(Error::InvalidArgument("Monte-Carlo penalty needs at least 2 draws".into()));
    }

    let mut sum1 = vec![0.0; dim];
    let mut pos = vec![0usize; dim];
    let mut sum2 = vec![0.0; dim];
    for b in 0..draws {
        for cell in 0..dim {
            let v = t1[b * dim + cell];
            if !v.is_nan() {
                sum1[cell] += v;
                pos[cell] += 1;
            }
            sum2[cell] += t2[b * dim + cell];
        }
    }
    let bf = draws as f64;
    let estimate = |s1: &dyn Fn(usize) -> (f64, usize), s2: &dyn Fn(usize) -> f64, m: f64| -> f64 {
        let mut total = 0.0;
        for cell in 0..dim {
            let (a, cnt) = s1(cell);
            if cnt > 0 {
                total += a / cnt as f64;
            }
            total += s2(cell) / m;
        }
        c * total
    };
    let value = estimate(&|l| (sum1[l], pos[l]), &|l| sum2[l], bf);

    let mut loo = Vec::with_capacity(draws);
    for b in 0..draws {
        let row = &t1[b * dim..(b + 1) * dim];
        let row2 = &t2[b * dim..(b + 1) * dim];
        loo.push(estimate(
            &|l| {
                if row[l].is_nan() {
                    (sum1[l], pos[l])
                } else {
                    (sum1[l] - row[l], pos[l] - 1)
                }
            },
            &|l| sum2[l] - row2[l],
            bf - 1.0,
        ));
    }
    let mean_loo = loo.iter().sum::<f64>() / bf;
    let var = loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>() * (bf - 1.0) / bf;

    let degenerate_cells = (0..dim).filter(|&l| stats.count(l) > 0 && pos[l] == 0).collect();
    Ok(McPenalty { value, std_error: var.sqrt(), degenerate_cells })
}

/// Residual variance of the regular `floor(n/2)`-cell regressogram,
/// `RSS / (n - floor(n/2))`.
pub fn estimate_sigma2(dataset: &Dataset) -> Result<f64> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidDataset("variance estimation needs n >= 2".into()));
    }
    let d = n / 2;
    let stats = CellStats::from_data(dataset, &Partition::regular(d));
    let rss: f64 = stats.centered_ss().iter().sum();
    Ok(rss / (n - d) as f64)
}

/// `c_ov * 2 sigma2 D / n`.
pub fn mallows_penalty(dim: usize, sigma2: f64, n: usize, c_ov: f64) -> f64 {
    c_ov * 2.0 * sigma2 * dim as f64 / n as f64
}

/// `c_ov (1/n) sum_l (2 + delta(n, p_l)) sigma_l^2` with `p_l` the cell width
/// and `sigma_l^2` the conditional variance of `Y` around the cell mean.
pub fn expected_ideal_penalty(truth: &RegressionTruth, partition: &Partition, n: usize, c_ov: f64) -> f64 {
    expected_ideal_from_cells(&truth.cell_truth(partition), n, c_ov)
}

pub fn expected_ideal_from_cells(cells: &CellTruth, n: usize, c_ov: f64) -> f64 {
    let mut total = 0.0;
    for cell in 0..cells.prob.len() {
        let var = cells.residual_var(cell);
        if var == 0.0 {
            continue;
        }
        total += (2.0 + delta_ideal(n, cells.prob[cell])) * var;
    }
    c_ov * total / n as f64
}

/// Leave-fold-out bookkeeping shared by the V-fold penalty and V-fold CV.
///
/// Removing fold `J` only changes the cells hit by `B_J`, so each fold costs
/// `O(|B_J|)` after one pass over the data.
struct FoldSweep<'a> {
    cells: &'a [usize],
    y: &'a [f64],
    full: CellStats,
    members: Vec<Vec<usize>>,
    held: Vec<usize>,
    held_sum: Vec<f64>,
    touched: Vec<usize>,
}

/// `val_sse = sum_{i in B_J} (y_i - b_l(i))^2` and
/// `shift = sum_l k_l (mean_l - b_l)^2`, with `b` the fit without `B_J`.
struct FoldTerms {
    val_sse: f64,
    shift: f64,
    size: usize,
}

impl<'a> FoldSweep<'a> {
    fn new(dim: usize, cells: &'a [usize], y: &'a [f64], folds: &FoldAssignment) -> Result<Self> {
        if folds.n() != cells.len() {
            return Err(Error::InvalidArgument(format!(
                "fold assignment for {} points, data has {}",
                folds.n(),
                cells.len()
            )));
        }
        let full = CellStats::from_cells(dim, cells, y);
        if let Some(cell) = full.counts().iter().position(|&k| k == 0) {
            return Err(Error::UntrainableFold { fold: 0, cell });
        }
        let mut members = vec![Vec::new(); folds.v()];
        for (i, &f) in folds.fold_of().iter().enumerate() {
            members[f].push(i);
        }
        Ok(Self { cells, y, full, members, held: vec![0; dim], held_sum: vec![0.0; dim], touched: Vec::new() })
    }

    fn fold(&mut self, j: usize) -> Result<FoldTerms> {
        self.touched.clear();
        for &i in &self.members[j] {
            let c = self.cells[i];
            if self.held[c] == 0 {
                self.touched.push(c);
            }
            self.held[c] += 1;
            self.held_sum[c] += self.y[i];
        }
        let full = &self.full;
        let (held, held_sum) = (&self.held, &self.held_sum);
        let untrainable = self.touched.iter().copied().filter(|&c| held[c] == full.count(c)).min();
        let fit = |c: usize| (full.sum_y()[c] - held_sum[c]) / (full.count(c) - held[c]) as f64;
        let mut terms = FoldTerms { val_sse: 0.0, shift: 0.0, size: self.members[j].len() };
        if untrainable.is_none() {
            for &i in &self.members[j] {
                terms.val_sse += (self.y[i] - fit(self.cells[i])).powi(2);
            }
            for &c in &self.touched {
                let k = full.count(c) as f64;
                terms.shift += k * (full.sum_y()[c] / k - fit(c)).powi(2);
            }
        }
        for &c in &self.touched {
            self.held[c] = 0;
            self.held_sum[c] = 0.0;
        }
        match untrainable {
            Some(cell) => Err(Error::UntrainableFold { fold: j, cell }),
            None => Ok(terms),
        }
    }
}

/// V-fold penalty `c (1/V) sum_J [P_n gamma(s^(-J)) - P_n^(-J) gamma(s^(-J))]`.
pub fn vfold_penalty(dataset: &Dataset, partition: &Partition, folds: &FoldAssignment, c: f64) -> Result<f64> {
    let cells: Vec<usize> = dataset.x().iter().map(|&x| partition.locate(x)).collect();
    vfold_penalty_cells(partition.dim(), &cells, dataset.y(), folds, c)
}

pub(crate) fn vfold_penalty_cells(dim: usize, cells: &[usize], y: &[f64], folds: &FoldAssignment, c: f64) -> Result<f64> {
    let mut sweep = FoldSweep::new(dim, cells, y, folds)?;
    let n = cells.len();
    let css: f64 = sweep.full.centered_ss().iter().sum();
    let mut total = 0.0;
    for j in 0..folds.v() {
        let t = sweep.fold(j)?;
        let all_sse = css + t.shift;
        let train_sse = all_sse - t.val_sse;
        total += all_sse / n as f64 - train_sse / (n - t.size) as f64;
    }
    Ok(c * total / folds.v() as f64)
}

/// V-fold cross-validation criterion `(1/V) sum_J P_n^(B_J) gamma(s^(-J))`.
pub fn vfcv_criterion(dataset: &Dataset, partition: &Partition, folds: &FoldAssignment) -> Result<f64> {
    let cells: Vec<usize> = dataset.x().iter().map(|&x| partition.locate(x)).collect();
    vfcv_criterion_cells(partition.dim(), &cells, dataset.y(), folds)
}

pub(crate) fn vfcv_criterion_cells(dim: usize, cells: &[usize], y: &[f64], folds: &FoldAssignment) -> Result<f64> {
    let mut sweep = FoldSweep::new(dim, cells, y, folds)?;
    let mut total = 0.0;
    for j in 0..folds.v() {
        let t = sweep.fold(j)?;
        total += t.val_sse / t.size as f64;
    }
    Ok(total / folds.v() as f64)
}
