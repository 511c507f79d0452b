//! Replication engine: oracle losses, selection by each procedure, and the
//! oracle-ratio accuracy indices.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::experiments::{gen_dataset_stream, ExperimentConfig, NamedProcedure, Procedure};
use super::seeds::{stream_rng, DATA_STREAM, PROCEDURE_STREAM};
use crate::error::{Error, Result};
use crate::histogram::{excess_loss, fit_regressogram, CellStats, CellTruth, Dataset, RegressionTruth};
use crate::penalties::{
    estimate_sigma2, expected_ideal_from_cells, mallows_penalty, rp_penalty_mc, rp_penalty_tabulated,
    vfcv_criterion_cells, vfold_penalty_cells, PenaltyKind,
};
use crate::selection::{argmin_tiebreak, ModelCollection, MIN_CELL_COUNT};
use crate::weights::{FoldAssignment, ResamplingConstants};

/// Largest tolerated fraction of replications without an admissible model.
pub const MAX_DROP_FRACTION: f64 = 0.01;

/// Per-model excess losses and the oracle among them.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleLosses {
    /// `+inf` for models with an empty cell.
    pub losses: Vec<f64>,
    pub oracle_index: usize,
    pub oracle_loss: f64,
}

/// Excess loss of every model by quadrature, and the oracle.
pub fn oracle_losses(truth: &RegressionTruth, collection: &ModelCollection, dataset: &Dataset) -> Result<OracleLosses> {
    let losses: Vec<f64> = collection
        .models()
        .iter()
        .map(|p| excess_loss(truth, &fit_regressogram(p, &CellStats::from_data(dataset, p))))
        .collect();
    let oracle_index = argmin_tiebreak(&losses, &collection.dims()).ok_or(Error::NoAdmissibleModel)?;
    Ok(OracleLosses { oracle_loss: losses[oracle_index], oracle_index, losses })
}

/// Split of one fitted model's loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossDecomposition {
    /// `l(s, s_m)`
    pub bias: f64,
    /// `sum_l p_l (beta_l - beta_hat_l)^2`
    pub p1: f64,
    /// `sum_l p_hat_l (beta_l - beta_hat_l)^2`
    pub p2: f64,
}

impl LossDecomposition {
    /// `None` when some cell is empty.
    pub fn new(truth: &CellTruth, stats: &CellStats) -> Option<Self> {
        let n = stats.n() as f64;
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        for cell in 0..stats.dim() {
            let d2 = (truth.mean[cell] - stats.mean(cell)?).powi(2);
            p1 += truth.prob[cell] * d2;
            p2 += stats.count(cell) as f64 / n * d2;
        }
        Some(Self { bias: truth.total_bias(), p1, p2 })
    }

    pub fn excess_loss(&self) -> f64 {
        self.bias + self.p1
    }
}

/// Accuracy indices of one procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcedureSummary {
    pub procedure: String,
    /// `mean(loss of selected) / mean(oracle loss)`
    pub c_or: f64,
    /// Delta-method standard error of `c_or`.
    pub c_or_se: f64,
    /// Standard deviation of `loss / mean(oracle loss)` over `sqrt(N)`.
    pub c_or_se_naive: f64,
    /// `mean(loss of selected / oracle loss)`
    pub c_path_or: f64,
    pub c_path_or_se: f64,
    pub mean_dim: f64,
    pub n_dropped: usize,
}

/// Per-replication values behind the summaries, in replication order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplicationSamples {
    /// `loss[j][i]`: loss of procedure `j` on kept replication `i`.
    pub loss: Vec<Vec<f64>>,
    pub oracle: Vec<Vec<f64>>,
    pub dim: Vec<Vec<usize>>,
    pub replication: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub summaries: Vec<ProcedureSummary>,
    pub samples: ReplicationSamples,
    pub n_dropped: usize,
    pub paired: bool,
}

/// Point estimate and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    if a.len() < 2 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// `mean(x) / mean(y)` with its delta-method standard error.
pub fn ratio_of_means(x: &[f64], y: &[f64]) -> Estimate {
    let (mx, my) = (mean(x), mean(y));
    let r = mx / my;
    let var = (cov(x, x) - 2.0 * r * cov(x, y) + r * r * cov(y, y)) / (my * my * x.len() as f64);
    Estimate { value: r, se: var.max(0.0).sqrt() }
}

fn mean_se(v: &[f64]) -> Estimate {
    Estimate { value: mean(v), se: (cov(v, v) / v.len() as f64).sqrt() }
}

impl BenchmarkResult {
    pub fn summary(&self, procedure: &str) -> Option<&ProcedureSummary> {
        self.summaries.iter().find(|s| s.procedure == procedure)
    }

    fn index(&self, procedure: &str) -> Result<usize> {
        self.summaries
            .iter()
            .position(|s| s.procedure == procedure)
            .ok_or_else(|| Error::InvalidArgument(format!("procedure {procedure} was not run")))
    }

    /// `C_or(a) - C_or(b)` with its standard error. Paired runs use the
    /// per-replication differences; unpaired runs combine independent errors.
    pub fn paired_difference(&self, a: &str, b: &str) -> Result<Estimate> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        if !self.paired {
            let (sa, sb) = (&self.summaries[ia], &self.summaries[ib]);
            return Ok(Estimate { value: sa.c_or - sb.c_or, se: sa.c_or_se.hypot(sb.c_or_se) });
        }
        let la = &self.samples.loss[ia];
        let lb = &self.samples.loss[ib];
        let d: Vec<f64> = la.iter().zip(lb).map(|(x, y)| x - y).collect();
        Ok(ratio_of_means(&d, &self.samples.oracle[ia]))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["procedure", "c_or", "c_or_se", "c_path_or", "c_path_or_se", "mean_dim", "n_dropped"])?;
        for s in &self.summaries {
            w.write_record([
                s.procedure.clone(),
                s.c_or.to_string(),
                s.c_or_se.to_string(),
                s.c_path_or.to_string(),
                s.c_path_or_se.to_string(),
                s.mean_dim.to_string(),
                s.n_dropped.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything that does not depend on the replication.
struct Plan {
    collection: ModelCollection,
    dims: Vec<usize>,
    cell_truth: Vec<CellTruth>,
    procedures: Vec<NamedProcedure>,
    /// Per procedure: tabulated resampling constants, for closed-form penalties.
    tables: Vec<Option<ResamplingConstants>>,
    /// Per procedure: expected ideal penalty of every model.
    eideal: Vec<Option<Vec<f64>>>,
}

impl Plan {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let collection = config.model_collection()?;
        let procedures = config.parsed_procedures()?;
        let cell_truth: Vec<CellTruth> =
            collection.models().par_iter().map(|p| config.truth.cell_truth(p)).collect();
        let mut tables = Vec::new();
        let mut eideal = Vec::new();
        for p in &procedures {
            let (table, ideal) = match &p.procedure {
                Procedure::Penalized(spec) => match &spec.kind {
                    PenaltyKind::RpClosed { scheme } => (Some(ResamplingConstants::new(scheme, config.n)?), None),
                    PenaltyKind::ExpectedIdeal { truth } => {
                        let cells: Vec<CellTruth> = if *truth == config.truth {
                            cell_truth.clone()
                        } else {
                            collection.models().iter().map(|m| truth.cell_truth(m)).collect()
                        };
                        let v = cells.iter().map(|c| expected_ideal_from_cells(c, config.n, spec.c_over_cw)).collect();
                        (None, Some(v))
                    }
                    _ => (None, None),
                },
                _ => (None, None),
            };
            tables.push(table);
            eideal.push(ideal);
        }
        Ok(Self { dims: collection.dims(), collection, cell_truth, procedures, tables, eideal })
    }
}

/// One dataset evaluated on every model.
struct Evaluated {
    dataset: Dataset,
    cells: Vec<Vec<usize>>,
    stats: Vec<CellStats>,
    loss: Vec<f64>,
    admissible: Vec<bool>,
    oracle: usize,
}

impl Evaluated {
    fn new(plan: &Plan, dataset: Dataset) -> Option<Self> {
        let m = plan.collection.len();
        let mut cells = Vec::with_capacity(m);
        let mut stats = Vec::with_capacity(m);
        let mut loss = Vec::with_capacity(m);
        let mut admissible = Vec::with_capacity(m);
        for (i, p) in plan.collection.models().iter().enumerate() {
            let c: Vec<usize> = dataset.x().iter().map(|&x| p.locate(x)).collect();
            let s = CellStats::from_cells(p.dim(), &c, dataset.y());
            loss.push(LossDecomposition::new(&plan.cell_truth[i], &s).map_or(f64::INFINITY, |d| d.excess_loss()));
            admissible.push(s.min_count() >= MIN_CELL_COUNT);
            cells.push(c);
            stats.push(s);
        }
        if !admissible.iter().any(|&a| a) {
            return None;
        }
        let oracle = argmin_tiebreak(&loss, &plan.dims)?;
        Some(Self { dataset, cells, stats, loss, admissible, oracle })
    }

    fn select<R: Rng + ?Sized>(&self, plan: &Plan, j: usize, rng: &mut R) -> Result<usize> {
        let n = self.dataset.len();
        let m = plan.collection.len();
        let y = self.dataset.y();
        let mut crit = vec![f64::INFINITY; m];
        match &plan.procedures[j].procedure {
            Procedure::Oracle => return Ok(self.oracle),
            Procedure::Penalized(spec) => {
                let c = spec.constant(n)?;
                let sigma2 = match spec.kind {
                    PenaltyKind::Mallows => estimate_sigma2(&self.dataset)?,
                    _ => 0.0,
                };
                let folds = match spec.kind {
                    PenaltyKind::VFoldPen { v } => Some(FoldAssignment::random(n, v, rng)?),
                    _ => None,
                };
                for i in (0..m).filter(|&i| self.admissible[i]) {
                    let stats = &self.stats[i];
                    let pen = match &spec.kind {
                        PenaltyKind::RpClosed { .. } => {
                            rp_penalty_tabulated(stats, plan.tables[j].as_ref().expect("table built"), c)?
                        }
                        PenaltyKind::RpMonteCarlo { scheme, draws } => {
                            let partition = &plan.collection.models()[i];
                            rp_penalty_mc(&self.dataset, partition, scheme, c, *draws, rng)?.value
                        }
                        PenaltyKind::Mallows => mallows_penalty(plan.dims[i], sigma2, n, spec.c_over_cw),
                        PenaltyKind::ExpectedIdeal { .. } => plan.eideal[j].as_ref().expect("penalties built")[i],
                        PenaltyKind::VFoldPen { .. } => {
                            let folds = folds.as_ref().expect("folds drawn");
                            match vfold_penalty_cells(plan.dims[i], &self.cells[i], y, folds, c) {
                                Ok(v) => v,
                                Err(Error::UntrainableFold { .. }) => continue,
                                Err(e) => return Err(e),
                            }
                        }
                    };
                    crit[i] = stats.empirical_risk().expect("admissible models have no empty cell") + pen;
                }
            }
            Procedure::Vfcv { .. } | Procedure::LooCv => {
                let folds = match plan.procedures[j].procedure {
                    Procedure::Vfcv { v } => FoldAssignment::random(n, v, rng)?,
                    _ => FoldAssignment::singletons(n)?,
                };
                for i in (0..m).filter(|&i| self.admissible[i]) {
                    match vfcv_criterion_cells(plan.dims[i], &self.cells[i], y, &folds) {
                        Ok(v) => crit[i] = v,
                        Err(Error::UntrainableFold { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        argmin_tiebreak(&crit, &plan.dims).ok_or(Error::NoAdmissibleModel)
    }
}

/// Outcome of one replication: per procedure `(loss, oracle loss, dim)`.
type RepOutcome = Option<Vec<(f64, f64, usize)>>;

fn run_replication(config: &ExperimentConfig, plan: &Plan, rep: u64) -> Result<RepOutcome> {
    let k = plan.procedures.len();
    let mut shared = None;
    if config.paired {
        match Evaluated::new(plan, gen_dataset_stream(config, rep, DATA_STREAM)) {
            Some(e) => shared = Some(e),
            None => return Ok(None),
        }
    }
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let own;
        let eval = match &shared {
            Some(e) => e,
            None => {
                let tag = DATA_STREAM.wrapping_add(1 + j as u64);
                match Evaluated::new(plan, gen_dataset_stream(config, rep, tag)) {
                    Some(e) => {
                        own = e;
                        &own
                    }
                    None => return Ok(None),
                }
            }
        };
        let mut rng = stream_rng(config.base_seed, rep, PROCEDURE_STREAM + j as u64);
        let sel = match eval.select(plan, j, &mut rng) {
            Ok(s) => s,
            Err(Error::NoAdmissibleModel) => return Ok(None),
            Err(e) => return Err(e),
        };
        out.push((eval.loss[sel], eval.loss[eval.oracle], plan.dims[sel]));
    }
    Ok(Some(out))
}

/// Runs every replication of the experiment in parallel. The result only
/// depends on the configuration, not on the number of threads.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkResult> {
    config.validate()?;
    let plan = Plan::new(config)?;
    let outcomes = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(config, &plan, rep))
        .collect::<Result<Vec<_>>>()?;

    let k = plan.procedures.len();
    let mut samples = ReplicationSamples {
        loss: vec![Vec::new(); k],
        oracle: vec![Vec::new(); k],
        dim: vec![Vec::new(); k],
        replication: Vec::new(),
    };
    let mut dropped = 0;
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        let Some(rows) = outcome else {
            dropped += 1;
            continue;
        };
        samples.replication.push(rep as u64);
        for (j, (loss, oracle, dim)) in rows.into_iter().enumerate() {
            samples.loss[j].push(loss);
            samples.oracle[j].push(oracle);
            samples.dim[j].push(dim);
        }
    }
    let total = config.replications;
    if dropped as f64 > MAX_DROP_FRACTION * total as f64 || samples.replication.is_empty() {
        return Err(Error::TooManyDroppedReplications { dropped, total });
    }

    let summaries = plan
        .procedures
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let loss = &samples.loss[j];
            let oracle = &samples.oracle[j];
            let c_or = ratio_of_means(loss, oracle);
            let mo = mean(oracle);
            let scaled: Vec<f64> = loss.iter().map(|l| l / mo).collect();
            let ratios: Vec<f64> = loss.iter().zip(oracle).map(|(l, o)| l / o).collect();
            let path = mean_se(&ratios);
            ProcedureSummary {
                procedure: p.token.clone(),
                c_or: c_or.value,
                c_or_se: c_or.se,
                c_or_se_naive: mean_se(&scaled).se,
                c_path_or: path.value,
                c_path_or_se: path.se,
                mean_dim: samples.dim[j].iter().sum::<usize>() as f64 / samples.dim[j].len() as f64,
                n_dropped: dropped,
            }
        })
        .collect();
    Ok(BenchmarkResult { summaries, samples, n_dropped: dropped, paired: config.paired })
}
