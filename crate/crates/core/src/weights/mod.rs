//! Exchangeable resampling weights, their constants `C_W`, `R1` and `R2`,
//! and weight-vector samplers.

pub mod einv;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use einv::{einv_of, OccupancyLaw};

/// Assignment of the indices `0..n` to `v` non-empty folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    v: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn new(v: usize, fold_of: Vec<usize>) -> Result<Self> {
        if v < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {v}")));
        }
        let mut sizes = vec![0usize; v];
        for &f in &fold_of {
            if f >= v {
                return Err(Error::InvalidArgument(format!("fold index {f} out of range for {v} folds")));
            }
            sizes[f] += 1;
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("fold {j} is empty")));
        }
        Ok(Self { v, fold_of })
    }

    /// Uniformly random split into `v` blocks whose sizes differ by at most one.
    pub fn random<R: Rng + ?Sized>(n: usize, v: usize, rng: &mut R) -> Result<Self> {
        check_folds(n, v)?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut fold_of = vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            fold_of[i] = pos % v;
        }
        Self::new(v, fold_of)
    }

    /// Consecutive index blocks of near-equal size.
    pub fn contiguous(n: usize, v: usize) -> Result<Self> {
        check_folds(n, v)?;
        Self::new(v, (0..n).map(|i| i * v / n).collect())
    }

    /// One fold per observation.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::new(n, (0..n).collect())
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }
}

fn check_folds(n: usize, v: usize) -> Result<()> {
    if v < 2 || v > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} points into {v} folds")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum WeightScheme {
    /// Bootstrap with `m` draws: `(m/n) W` is multinomial.
    Efron { m: usize },
    /// `p W_i` iid Bernoulli(p).
    Rademacher { p: f64 },
    /// `mu W_i` iid Poisson(mu).
    Poisson { mu: f64 },
    /// `W_i = (n/q) 1{i in I}`, `I` a uniform subset of size `q`.
    Rho { q: usize },
    /// Leave-one-out, same law as `Rho { q: n - 1 }`.
    Loo,
    /// V-fold subsampling: `W_i = V/(V-1) 1{i not in B_J}`, `J` uniform.
    VFold { folds: FoldAssignment },
}

impl WeightScheme {
    pub fn efron(n: usize) -> Self {
        WeightScheme::Efron { m: n }
    }

    pub fn rademacher() -> Self {
        WeightScheme::Rademacher { p: 0.5 }
    }

    pub fn poisson() -> Self {
        WeightScheme::Poisson { mu: 1.0 }
    }

    pub fn rho_half(n: usize) -> Self {
        WeightScheme::Rho { q: n / 2 }
    }

    pub fn label(&self) -> String {
        match self {
            WeightScheme::Efron { m } => format!("Efr({m})"),
            WeightScheme::Rademacher { p } => format!("Rad({p})"),
            WeightScheme::Poisson { mu } => format!("Poi({mu})"),
            WeightScheme::Rho { q } => format!("Rho({q})"),
            WeightScheme::Loo => "Loo".to_string(),
            WeightScheme::VFold { folds } => format!("VFold({})", folds.v()),
        }
    }

    pub fn is_exchangeable(&self) -> bool {
        !matches!(self, WeightScheme::VFold { .. })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = n >= 1
            && match self {
                WeightScheme::Efron { m } => *m >= 1,
                WeightScheme::Rademacher { p } => *p > 0.0 && *p < 1.0,
                WeightScheme::Poisson { mu } => *mu > 0.0 && mu.is_finite(),
                WeightScheme::Rho { q } => *q >= 1 && *q <= n,
                WeightScheme::Loo => n >= 2,
                WeightScheme::VFold { folds } => folds.n() == n,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScheme(format!("{} is not valid for n = {n}", self.label())))
        }
    }

    /// Normalizing constant `C_W`.
    ///
    /// For V-fold subsampling this returns 1; the V-fold penalty carries its
    /// own constant.
    pub fn c_w(&self, n: usize) -> Result<f64> {
        self.validate(n)?;
        let nf = n as f64;
        Ok(match self {
            WeightScheme::Efron { m } => *m as f64 / nf,
            WeightScheme::Rademacher { p } => p / (1.0 - p),
            WeightScheme::Poisson { mu } => *mu,
            WeightScheme::Rho { q } => {
                if *q == n {
                    return Err(Error::InvalidScheme("C_W is undefined for Rho(q = n)".into()));
                }
                *q as f64 / (nf - *q as f64)
            }
            WeightScheme::Loo => nf - 1.0,
            WeightScheme::VFold { .. } => 1.0,
        })
    }

    fn check_count(&self, n: usize, k: usize) -> Result<()> {
        self.validate(n)?;
        if !self.is_exchangeable() {
            return Err(Error::NoClosedForm(self.label()));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cell count {k} outside 1..={n}")));
        }
        Ok(())
    }

    /// `R1(n, k/n)` for a cell holding `k` observations.
    pub fn r1(&self, n: usize, k: usize) -> Result<f64> {
        self.check_count(n, k)?;
        let (nf, kf) = (n as f64, k as f64);
        Ok(match *self {
            WeightScheme::Efron { m } => {
                let e = einv_of(OccupancyLaw::Binomial { n: m as u64, p: kf / nf });
                nf / m as f64 * e * (1.0 - 1.0 / kf)
            }
            WeightScheme::Rademacher { p } => einv_of(OccupancyLaw::Binomial { n: k as u64, p }) / p - 1.0,
            WeightScheme::Poisson { mu } => einv_of(OccupancyLaw::Poisson { mu: kf * mu }) / mu * (1.0 - 1.0 / kf),
            WeightScheme::Rho { q } => {
                let e = einv_of(OccupancyLaw::Hypergeometric { n: n as u64, r: k as u64, q: q as u64 });
                nf / q as f64 * e - 1.0
            }
            WeightScheme::Loo => {
                if k >= 2 {
                    kf / (nf * (kf - 1.0))
                } else {
                    0.0
                }
            }
            WeightScheme::VFold { .. } => unreachable!(),
        })
    }

    /// `R2(n, k/n)` for a cell holding `k` observations.
    pub fn r2(&self, n: usize, k: usize) -> Result<f64> {
        self.check_count(n, k)?;
        let (nf, kf) = (n as f64, k as f64);
        Ok(match *self {
            WeightScheme::Efron { m } => nf / m as f64 * (1.0 - 1.0 / kf),
            WeightScheme::Rademacher { p } => 1.0 / p - 1.0,
            WeightScheme::Poisson { mu } => (1.0 - 1.0 / kf) / mu,
            WeightScheme::Rho { q } => nf / q as f64 - 1.0,
            WeightScheme::Loo => 1.0 / (nf - 1.0),
            WeightScheme::VFold { .. } => unreachable!(),
        })
    }

    pub fn r_sum(&self, n: usize, k: usize) -> Result<f64> {
        Ok(self.r1(n, k)? + self.r2(n, k)?)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut w = vec![0.0; n];
        self.sample_into(&mut w, rng)?;
        Ok(w)
    }

    /// Fills `w` with one draw of the weight vector for `n = w.len()`.
    pub fn sample_into<R: Rng + ?Sized>(&self, w: &mut [f64], rng: &mut R) -> Result<()> {
        let n = w.len();
        self.validate(n)?;
        match self {
            WeightScheme::Efron { m } => {
                let mut counts = vec![0u32; n];
                for _ in 0..*m {
                    counts[rng.random_range(0..n)] += 1;
                }
                let scale = n as f64 / *m as f64;
                for (wi, c) in w.iter_mut().zip(counts) {
                    *wi = c as f64 * scale;
                }
            }
            WeightScheme::Rademacher { p } => {
                let inv = 1.0 / p;
                for wi in w.iter_mut() {
                    *wi = if rng.random::<f64>() < *p { inv } else { 0.0 };
                }
            }
            WeightScheme::Poisson { mu } => {
                let law = Poisson::new(*mu).map_err(|e| Error::InvalidScheme(e.to_string()))?;
                for wi in w.iter_mut() {
                    *wi = law.sample(rng) / mu;
                }
            }
            WeightScheme::Rho { q } => fill_subset(w, *q, rng),
            WeightScheme::Loo => fill_subset(w, n - 1, rng),
            WeightScheme::VFold { folds } => {
                let v = folds.v();
                let j = rng.random_range(0..v);
                let keep = v as f64 / (v as f64 - 1.0);
                for (wi, &f) in w.iter_mut().zip(folds.fold_of()) {
                    *wi = if f == j { 0.0 } else { keep };
                }
            }
        }
        Ok(())
    }
}

/// `C_W` and `R1 + R2` tabulated for every cell count `k = 1..=n` of one
/// exchangeable scheme, so that repeated penalty evaluations cost `O(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplingConstants {
    scheme: WeightScheme,
    n: usize,
    c_w: f64,
    r_sum: Vec<f64>,
}

impl ResamplingConstants {
    pub fn new(scheme: &WeightScheme, n: usize) -> Result<Self> {
        if !scheme.is_exchangeable() {
            return Err(Error::NoClosedForm(scheme.label()));
        }
        let c_w = scheme.c_w(n)?;
        let mut r_sum = vec![0.0; n + 1];
        for (k, slot) in r_sum.iter_mut().enumerate().skip(1) {
            *slot = scheme.r_sum(n, k)?;
        }
        Ok(Self { scheme: scheme.clone(), n, c_w, r_sum })
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    /// `R1 + R2` at cell count `k` (`1 <= k <= n`).
    pub fn r_sum(&self, k: usize) -> f64 {
        self.r_sum[k]
    }

    /// `C_W (R1 + R2) - 2` for `k >= 2` and `-2` for `k = 1`, where the
    /// penalty term vanishes.
    pub fn delta_penw(&self, k: usize) -> f64 {
        if k >= 2 {
            self.c_w * self.r_sum[k] - 2.0
        } else {
            -2.0
        }
    }
}

/// `w_i = (n/q) 1{i in I}` with `I` drawn by a partial Fisher–Yates shuffle.
fn fill_subset<R: Rng + ?Sized>(w: &mut [f64], q: usize, rng: &mut R) {
    let n = w.len();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..q {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    w.iter_mut().for_each(|v| *v = 0.0);
    let level = n as f64 / q as f64;
    for &i in &idx[..q] {
        w[i] = level;
    }
}
