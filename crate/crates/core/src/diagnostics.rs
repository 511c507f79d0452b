//! Second-order bias of the ideal penalty and of resampling penalties.
//!
//! Writing the expectation of a penalty on one cell as
//! `(2 + delta) sigma^2 / n`, `delta_ideal(n, p)` is the term for the ideal
//! penalty and `delta_penw(k)` the term for a resampling penalty given a
//! cell count `k`. Empty cells follow the conventions where the estimator
//! contributes `p sigma^2` to the loss and `sigma^2 / n` to the empirical
//! part, which gives
//!
//! `delta(n, p) = sum_{k>=1} P(k) (1 + np/k) + P(0) (np + 1) - 2`,
//! `P = Bin(n, p)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::weights::einv::{OccupancyLaw, DEFAULT_TAIL_TOL};
use crate::weights::{ResamplingConstants, WeightScheme};

fn binomial_pmf(n: usize, p: f64) -> (usize, Vec<f64>) {
    let (start, pmf) = OccupancyLaw::Binomial { n: n as u64, p }.pmf_table(DEFAULT_TAIL_TOL);
    (start as usize, pmf)
}

/// Exact `delta(n, p)` for the ideal penalty.
pub fn delta_ideal(n: usize, p: f64) -> f64 {
    let np = n as f64 * p;
    let (start, pmf) = binomial_pmf(n, p);
    let mut total = 0.0;
    for (i, &w) in pmf.iter().enumerate() {
        let k = start + i;
        total += if k == 0 { w * (np + 1.0) } else { w * (1.0 + np / k as f64) };
    }
    total - 2.0
}

/// `delta_penw` at cell count `k`: `C_W (R1 + R2) - 2`, or `-2` when `k = 1`.
pub fn delta_penw(scheme: &WeightScheme, n: usize, k: usize) -> Result<f64> {
    if k >= 2 {
        Ok(scheme.c_w(n)? * scheme.r_sum(n, k)? - 2.0)
    } else if k == 1 {
        scheme.validate(n)?;
        Ok(-2.0)
    } else {
        Err(Error::InvalidArgument("cell count must be at least 1".into()))
    }
}

/// `E[delta_penw(n p_hat) | p_hat > 0]` with `n p_hat ~ Bin(n, p)`.
pub fn delta_penw_bar(scheme: &WeightScheme, n: usize, p: f64) -> Result<f64> {
    let table = ResamplingConstants::new(scheme, n)?;
    Ok(delta_penw_bar_table(&table, p))
}

pub fn delta_penw_bar_table(table: &ResamplingConstants, p: f64) -> f64 {
    let (start, pmf) = binomial_pmf(table.n(), p);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &w) in pmf.iter().enumerate() {
        let k = start + i;
        if k >= 1 {
            num += w * table.delta_penw(k);
            den += w;
        }
    }
    num / den
}

/// The six schemes compared in the curve output, with their column names.
pub fn curve_schemes(n: usize) -> Vec<(&'static str, WeightScheme)> {
    vec![
        ("efr", WeightScheme::efron(n)),
        ("rad", WeightScheme::rademacher()),
        ("poi", WeightScheme::poisson()),
        ("rho2", WeightScheme::Rho { q: n / 2 }),
        ("rho4", WeightScheme::Rho { q: (n / 4).max(1) }),
        ("loo", WeightScheme::Loo),
    ]
}

/// `delta_ideal` and `delta_penw_bar` for several schemes on a grid of `np`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCurve {
    pub n: usize,
    pub np_grid: Vec<usize>,
    pub delta_ideal: Vec<f64>,
    /// `(column name, values on the grid)`
    pub delta_penw: Vec<(String, Vec<f64>)>,
}

impl DeltaCurve {
    pub fn compute(n: usize, np_grid: &[usize], schemes: &[(&str, WeightScheme)]) -> Result<Self> {
        if let Some(&bad) = np_grid.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::InvalidArgument(format!("grid point {bad} outside 1..={n}")));
        }
        let p = |k: usize| k as f64 / n as f64;
        let delta_ideal = np_grid.par_iter().map(|&k| delta_ideal(n, p(k))).collect();
        let mut delta_penw = Vec::with_capacity(schemes.len());
        for (name, scheme) in schemes {
            let table = ResamplingConstants::new(scheme, n)?;
            let values = np_grid.par_iter().map(|&k| delta_penw_bar_table(&table, p(k))).collect();
            delta_penw.push((name.to_string(), values));
        }
        Ok(Self { n, np_grid: np_grid.to_vec(), delta_ideal, delta_penw })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["np".to_string(), "delta_ideal".to_string()];
        header.extend(self.delta_penw.iter().map(|(name, _)| format!("delta_{name}")));
        w.write_record(&header)?;
        for (i, k) in self.np_grid.iter().enumerate() {
            let mut row = vec![k.to_string(), self.delta_ideal[i].to_string()];
            row.extend(self.delta_penw.iter().map(|(_, v)| v[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sign of `delta_penw_bar - delta_ideal` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Above,
    Below,
    Equal,
}

impl Sign {
    fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Above
        } else if v < 0.0 {
            Sign::Below
        } else {
            Sign::Equal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingRow {
    pub np: usize,
    pub delta_ideal: f64,
    /// `(scheme, delta_penw_bar, sign of delta_penw_bar - delta_ideal)`
    pub schemes: Vec<(String, f64, Sign)>,
}

/// Exact curves for the six reference schemes and the sign of each one's
/// deviation from the ideal penalty, per grid point.
pub fn ordering_report(n: usize, np_grid: &[usize]) -> Result<Vec<OrderingRow>> {
    let curve = DeltaCurve::compute(n, np_grid, &curve_schemes(n))?;
    Ok(curve
        .np_grid
        .iter()
        .enumerate()
        .map(|(i, &np)| OrderingRow {
            np,
            delta_ideal: curve.delta_ideal[i],
            schemes: curve
                .delta_penw
                .iter()
                .map(|(name, v)| (name.clone(), v[i], Sign::of(v[i] - curve.delta_ideal[i])))
                .collect(),
        })
        .collect())
}

/// Number of grid points where each scheme lies above the ideal curve.
pub fn count_above(rows: &[OrderingRow]) -> Vec<(String, usize, usize)> {
    let Some(first) = rows.first() else { return Vec::new() };
    first
        .schemes
        .iter()
        .enumerate()
        .map(|(j, (name, _, _))| {
            let above = rows.iter().filter(|r| r.schemes[j].2 == Sign::Above).count();
            (name.clone(), above, rows.len())
        })
        .collect()
}
