//! Model filtering, penalized selection and cross-validation selectors.

use rand::Rng;

use crate::error::{Error, Result};
use crate::histogram::{CellStats, Dataset, Partition};
use crate::penalties::{
    estimate_sigma2, expected_ideal_penalty, mallows_penalty, rp_penalty_closed, rp_penalty_mc, vfcv_criterion_cells,
    vfold_penalty_cells, PenaltyKind, PenaltySpec,
};
use crate::weights::FoldAssignment;

/// Default minimal number of observations per cell.
pub const MIN_CELL_COUNT: usize = 3;

/// Absolute tolerance under which criterion values count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCollection {
    models: Vec<Partition>,
    labels: Vec<String>,
}

impl ModelCollection {
    pub fn new(models: Vec<Partition>, labels: Vec<String>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("empty model collection".into()));
        }
        if models.len() != labels.len() {
            return Err(Error::InvalidArgument("one label per model required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate model label {dup}")));
        }
        Ok(Self { models, labels })
    }

    /// Labels each model by its position.
    pub fn from_partitions(models: Vec<Partition>) -> Result<Self> {
        let labels = (0..models.len()).map(|i| format!("m{i}")).collect();
        Self::new(models, labels)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[Partition] {
        &self.models
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> Vec<usize> {
        self.models.iter().map(Partition::dim).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub selected: usize,
    /// Criterion per model, `+inf` where the model is not admissible.
    pub criterion: Vec<f64>,
    /// `true` where the model survived filtering.
    pub admissible: Vec<bool>,
    /// Penalty per model (`+inf` where not admissible); zero for CV.
    pub penalty: Vec<f64>,
}

/// `true` for models whose every cell holds at least `threshold` points.
pub fn filter_models(collection: &ModelCollection, dataset: &Dataset, threshold: usize) -> Result<Vec<bool>> {
    let mask: Vec<bool> = collection
        .models()
        .iter()
        .map(|p| CellStats::from_data(dataset, p).min_count() >= threshold)
        .collect();
    if mask.iter().any(|&m| m) {
        Ok(mask)
    } else {
        Err(Error::NoAdmissibleModel)
    }
}

/// Index of the smallest finite value; values within [`TIE_TOL`] of the
/// minimum are tied and resolved by smallest dimension, then smallest index.
pub fn argmin_tiebreak(values: &[f64], dims: &[usize]) -> Option<usize> {
    let min = values.iter().copied().filter(|v| v.is_finite()).min_by(f64::total_cmp)?;
    (0..values.len())
        .filter(|&i| values[i].is_finite() && values[i] - min <= TIE_TOL)
        .min_by_key(|&i| (dims[i], i))
}

/// Penalized empirical risk minimization over the models with at least
/// [`MIN_CELL_COUNT`] points per cell.
///
/// `rng` drives Monte-Carlo draws and V-fold penalty folds; closed-form
/// penalties do not touch it.
pub fn select_penalized<R: Rng + ?Sized>(
    dataset: &Dataset,
    collection: &ModelCollection,
    spec: &PenaltySpec,
    rng: &mut R,
) -> Result<SelectionResult> {
    spec.validate()?;
    let n = dataset.len();
    let admissible = filter_models(collection, dataset, MIN_CELL_COUNT)?;
    let c = spec.constant(n)?;
    let sigma2 = match spec.kind {
        PenaltyKind::Mallows => estimate_sigma2(dataset)?,
        _ => 0.0,
    };
    let folds = match spec.kind {
        PenaltyKind::VFoldPen { v } => Some(FoldAssignment::random(n, v, rng)?),
        _ => None,
    };

    let mut criterion = vec![f64::INFINITY; collection.len()];
    let mut penalty = vec![f64::INFINITY; collection.len()];
    for (m, partition) in collection.models().iter().enumerate() {
        if !admissible[m] {
            continue;
        }
        let cells: Vec<usize> = dataset.x().iter().map(|&x| partition.locate(x)).collect();
        let stats = CellStats::from_cells(partition.dim(), &cells, dataset.y());
        let risk = stats.empirical_risk().ok_or(Error::NoAdmissibleModel)?;
        let pen = match &spec.kind {
            PenaltyKind::RpClosed { scheme } => rp_penalty_closed(&stats, scheme, c)?,
            PenaltyKind::RpMonteCarlo { scheme, draws } => {
                rp_penalty_mc(dataset, partition, scheme, c, *draws, rng)?.value
            }
            PenaltyKind::Mallows => mallows_penalty(partition.dim(), sigma2, n, spec.c_over_cw),
            PenaltyKind::ExpectedIdeal { truth } => expected_ideal_penalty(truth, partition, n, spec.c_over_cw),
            PenaltyKind::VFoldPen { .. } => {
                let folds = folds.as_ref().expect("folds drawn above");
                match vfold_penalty_cells(partition.dim(), &cells, dataset.y(), folds, c) {
                    Ok(v) => v,
                    Err(Error::UntrainableFold { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
        };
        penalty[m] = pen;
        criterion[m] = risk + pen;
    }
    let admissible: Vec<bool> = criterion.iter().map(|v| v.is_finite()).collect();
    let selected = argmin_tiebreak(&criterion, &collection.dims()).ok_or(Error::NoAdmissibleModel)?;
    Ok(SelectionResult { selected, criterion, admissible, penalty })
}

/// V-fold cross-validation: minimizes the mean held-out risk. Models that
/// fail filtering or leave a cell empty on some training set are skipped.
pub fn select_vfcv(dataset: &Dataset, collection: &ModelCollection, folds: &FoldAssignment) -> Result<SelectionResult> {
    if folds.n() != dataset.len() {
        return Err(Error::InvalidArgument("fold assignment does not match the dataset".into()));
    }
    let filtered = filter_models(collection, dataset, MIN_CELL_COUNT)?;
    let mut criterion = vec![f64::INFINITY; collection.len()];
    for (m, partition) in collection.models().iter().enumerate() {
        if !filtered[m] {
            continue;
        }
        let cells: Vec<usize> = dataset.x().iter().map(|&x| partition.locate(x)).collect();
        match vfcv_criterion_cells(partition.dim(), &cells, dataset.y(), folds) {
            Ok(v) => criterion[m] = v,
            Err(Error::UntrainableFold { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let admissible: Vec<bool> = criterion.iter().map(|v| v.is_finite()).collect();
    let selected = argmin_tiebreak(&criterion, &collection.dims()).ok_or(Error::NoAdmissibleModel)?;
    let penalty = admissible.iter().map(|&a| if a { 0.0 } else { f64::INFINITY }).collect();
    Ok(SelectionResult { selected, criterion, admissible, penalty })
}
