//! Exact `e_inv(Z) = E[Z] * E[1/Z | Z > 0]` for binomial, hypergeometric and
//! Poisson occupancy laws, plus the analytic brackets it must satisfy.
//!
//! Probabilities are never formed from factorials: the mass function is
//! walked outward from the mode with the ratio `pmf(k+1)/pmf(k)`, which
//! keeps every weight in `(0, 1]` and avoids overflow for large `n`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass below which an infinite-support sum is truncated.
pub const DEFAULT_TAIL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum OccupancyLaw {
    Binomial { n: u64, p: f64 },
    /// `q` draws without replacement from `n` items of which `r` are marked.
    Hypergeometric { n: u64, r: u64, q: u64 },
    Poisson { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EinvQuery {
    pub law: OccupancyLaw,
    pub tolerance: f64,
}

impl EinvQuery {
    pub fn new(law: OccupancyLaw) -> Self {
        Self { law, tolerance: DEFAULT_TAIL_TOL }
    }
}

impl OccupancyLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OccupancyLaw::Binomial { n, p } => n >= 1 && p > 0.0 && p <= 1.0,
            OccupancyLaw::Hypergeometric { n, r, q } => n >= r && r >= 1 && n >= q && q >= 1,
            OccupancyLaw::Poisson { mu } => mu > 0.0 && mu.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid occupancy law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            OccupancyLaw::Binomial { n, p } => n as f64 * p,
            OccupancyLaw::Hypergeometric { n, r, q } => q as f64 * r as f64 / n as f64,
            OccupancyLaw::Poisson { mu } => mu,
        }
    }

    fn support(&self) -> (u64, u64) {
        match *self {
            OccupancyLaw::Binomial { n, .. } => (0, n),
            OccupancyLaw::Hypergeometric { n, r, q } => ((q + r).saturating_sub(n), r.min(q)),
            OccupancyLaw::Poisson { .. } => (0, u64::MAX),
        }
    }

    fn mode(&self) -> u64 {
        let (lo, hi) = self.support();
        let m = match *self {
            OccupancyLaw::Binomial { n, p } => ((n + 1) as f64 * p).floor() as u64,
            OccupancyLaw::Hypergeometric { n, r, q } => {
                (((q + 1) as f64 * (r + 1) as f64) / (n + 2) as f64).floor() as u64
            }
            OccupancyLaw::Poisson { mu } => mu.floor() as u64,
        };
        m.clamp(lo, hi)
    }

    /// `pmf(k + 1) / pmf(k)` for `k` and `k + 1` in the support.
    fn ratio(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            OccupancyLaw::Binomial { n, p } => (n as f64 - kf) / (kf + 1.0) * (p / (1.0 - p)),
            OccupancyLaw::Hypergeometric { n, r, q } => {
                let (n, r, q) = (n as f64, r as f64, q as f64);
                (r - kf) * (q - kf) / ((kf + 1.0) * (n - r - q + kf + 1.0))
            }
            OccupancyLaw::Poisson { mu } => mu / (kf + 1.0),
        }
    }

    /// The mass function on its numerically relevant support, normalized to
    /// sum to one. Returns the first support point and the masses.
    pub fn pmf_table(&self, tail_tol: f64) -> (u64, Vec<f64>) {
        if let OccupancyLaw::Binomial { n, p } = *self {
            if p >= 1.0 {
                return (n, vec![1.0]);
            }
        }
        let (lo, hi) = self.support();
        let mode = self.mode();

        let mut down = Vec::new();
        let mut w = 1.0;
        let mut k = mode;
        while k > lo {
            w /= self.ratio(k - 1);
            if w == 0.0 || !w.is_finite() {
                break;
            }
            down.push(w);
            k -= 1;
        }
        let start = mode - down.len() as u64;

        let mut up = vec![1.0];
        let mut total: f64 = down.iter().sum::<f64>() + 1.0;
        let mut w = 1.0;
        let mut k = mode;
        while k < hi {
            let r = self.ratio(k);
            w *= r;
            if w == 0.0 {
                break;
            }
            up.push(w);
            total += w;
            k += 1;
            // past the mode the ratios decrease, so the tail is dominated by
            // a geometric series with the next ratio
            let next = self.ratio(k);
            if hi == u64::MAX && next < 1.0 && w * next / (1.0 - next) < tail_tol * total {
                break;
            }
        }

        let mut table: Vec<f64> = down.into_iter().rev().collect();
        table.extend(up);
        let norm: f64 = table.iter().sum();
        table.iter_mut().for_each(|v| *v /= norm);
        (start, table)
    }
}

/// Exact `e_inv = E[Z] E[Z^{-1} | Z > 0]` of the law.
pub fn einv(query: &EinvQuery) -> f64 {
    let (start, pmf) = query.law.pmf_table(query.tolerance);
    let mut inv = 0.0;
    let mut positive = 0.0;
    for (i, &w) in pmf.iter().enumerate() {
        let k = start + i as u64;
        if k >= 1 {
            inv += w / k as f64;
            positive += w;
        }
    }
    query.law.mean() * inv / positive
}

pub fn einv_of(law: OccupancyLaw) -> f64 {
    einv(&EinvQuery::new(law))
}

/// Which analytic bracket a check comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    /// `min(3.2, 1 + 5.1 (np)^{-1/4}) >= e_inv(B(n,p)) >= 1 - exp(-np)` for `np >= 1`.
    BinomialGeneral,
    /// `2 + 3e-4 >= e_inv(B(n,1/2)) >= 1{n >= 3}`.
    BinomialHalf,
    /// `e_inv(H(n,r,q)) >= 1 - 1{r <= n-q} exp(-qr/n)`.
    HypergeometricLower,
    /// `1 + kappa3(eps) (n/q) sqrt(ln r / r)` upper bound under its side condition.
    HypergeometricUpper,
    /// `q = floor(n/2)`: at most 14.3, and at most 3 when `r >= 26`.
    HypergeometricHalf,
    /// `q = n - 1`: closed-form identity.
    HypergeometricLooIdentity,
    /// `q = n - 1`: bracket around the identity.
    HypergeometricLooBracket,
    /// `n >= r >= n - q + 1 >= 2`.
    HypergeometricLpo,
    /// Poisson bracket.
    Poisson,
}

impl BoundFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BoundFamily::BinomialGeneral => "binomial np>=1",
            BoundFamily::BinomialHalf => "binomial p=1/2",
            BoundFamily::HypergeometricLower => "hypergeometric lower",
            BoundFamily::HypergeometricUpper => "hypergeometric upper(eps)",
            BoundFamily::HypergeometricHalf => "hypergeometric q=n/2",
            BoundFamily::HypergeometricLooIdentity => "hypergeometric q=n-1 identity",
            BoundFamily::HypergeometricLooBracket => "hypergeometric q=n-1 bracket",
            BoundFamily::HypergeometricLpo => "hypergeometric lpo",
            BoundFamily::Poisson => "poisson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub family: BoundFamily,
    pub law: OccupancyLaw,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Absolute slack allowed on either side (rounding only).
    pub tolerance: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(family: BoundFamily, law: OccupancyLaw, value: f64, lower: f64, upper: f64, tolerance: f64) -> Self {
        let pass = value >= lower - tolerance && value <= upper + tolerance;
        Self { family, law, value, lower, upper, tolerance, pass }
    }

    /// Distance to the nearest bound; negative on failure.
    pub fn margin(&self) -> f64 {
        (self.value - self.lower).min(self.upper - self.value)
    }
}

/// Rounding slack for inequality brackets, some of which are attained exactly.
const ROUNDING: f64 = 1e-12;
/// Tolerance of the exact `q = n - 1` identity.
pub const LOO_IDENTITY_TOL: f64 = 1e-12;
/// `eps` values at which the general hypergeometric upper bound is tested.
pub const HYPER_UPPER_EPS: [f64; 6] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9];

/// `e_inv(H(n, r, n-1))` in closed form.
pub fn loo_einv_closed_form(n: u64, r: u64) -> f64 {
    let (nf, rf) = (n as f64, r as f64);
    let inner = if r >= 2 { (nf - 1.0) * rf / (nf * (rf - 1.0)) } else { 0.0 };
    1.0 + (inner - 1.0) / nf
}

/// Every bracket that applies to `law`, evaluated at the exact value.
pub fn bound_checks(law: OccupancyLaw) -> Vec<BoundCheck> {
    let value = einv_of(law);
    bound_checks_for_value(law, value)
}

pub fn bound_checks_for_value(law: OccupancyLaw, value: f64) -> Vec<BoundCheck> {
    let mut out = Vec::new();
    match law {
        OccupancyLaw::Binomial { n, p } => {
            let np = n as f64 * p;
            if np >= 1.0 {
                let upper = 3.2f64.min(1.0 + 5.1 * np.powf(-0.25));
                let lower = 1.0 - (-np).exp();
                out.push(BoundCheck::new(BoundFamily::BinomialGeneral, law, value, lower, upper, ROUNDING));
            }
            if p == 0.5 {
                let lower = if n >= 3 { 1.0 } else { 0.0 };
                out.push(BoundCheck::new(BoundFamily::BinomialHalf, law, value, lower, 2.0 + 3e-4, ROUNDING));
            }
        }
        OccupancyLaw::Hypergeometric { n, r, q } => {
            let (nf, rf, qf) = (n as f64, r as f64, q as f64);
            let lower = if r <= n - q { 1.0 - (-qf * rf / nf).exp() } else { 1.0 };
            out.push(BoundCheck::new(BoundFamily::HypergeometricLower, law, value, lower, f64::INFINITY, ROUNDING));

            if r >= 2 {
                let side = 2.0 * rf / (2.0 + (3.0 * (rf + 1.0) * rf.ln()).sqrt());
                for eps in HYPER_UPPER_EPS {
                    if nf / qf <= (1.0 - eps) * side {
                        let kappa3 = 0.9 + 1.4 / (eps * eps);
                        let upper = 1.0 + kappa3 * nf / qf * (rf.ln() / rf).sqrt();
                        out.push(BoundCheck::new(
                            BoundFamily::HypergeometricUpper,
                            law,
                            value,
                            f64::NEG_INFINITY,
                            upper,
                            ROUNDING,
                        ));
                    }
                }
            }

            if n >= 2 && q == n / 2 {
                out.push(BoundCheck::new(BoundFamily::HypergeometricHalf, law, value, f64::NEG_INFINITY, 14.3, ROUNDING));
                if r >= 26 {
                    out.push(BoundCheck::new(BoundFamily::HypergeometricHalf, law, value, f64::NEG_INFINITY, 3.0, ROUNDING));
                }
            }

            if n >= 2 && q == n - 1 {
                let exact = loo_einv_closed_form(n, r);
                out.push(BoundCheck::new(
                    BoundFamily::HypergeometricLooIdentity,
                    law,
                    value,
                    exact,
                    exact,
                    LOO_IDENTITY_TOL,
                ));
                let upper = if r >= 2 { 1.0 + 1.0 / (nf * (rf - 1.0)) } else { 1.0 };
                let lower = if r == 1 { 1.0 - 1.0 / nf } else { 1.0 };
                out.push(BoundCheck::new(BoundFamily::HypergeometricLooBracket, law, value, lower, upper, ROUNDING));
            }

            if q < n && r > n - q {
                // n^{n-q} / (n (n-1) ... (q+1)), a product of n - q factors n/j
                let log_ratio: f64 = ((q + 1)..=n).map(|j| (nf / j as f64).ln()).sum();
                let upper = rf / (rf - nf + qf) * log_ratio.exp();
                out.push(BoundCheck::new(BoundFamily::HypergeometricLpo, law, value, 1.0, upper, ROUNDING));
            }
        }
        OccupancyLaw::Poisson { mu } => {
            let cap = if mu > 2.0 {
                1.0 + 2.0 * (1.0 + (-3.0f64).exp()) / (mu - 2.0)
            } else {
                f64::INFINITY
            };
            let upper = (2.0 - 2.0 * (-2.0 * mu).exp()).min(cap);
            let lower = if mu < 1.61 { 1.0 - (-mu).exp() } else { 1.0 };
            out.push(BoundCheck::new(BoundFamily::Poisson, law, value, lower, upper, ROUNDING));
        }
    }
    out
}

/// Parameter grid for [`verify_einv_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct EinvGrid {
    /// Binomial sizes; for each, `p = j/n` for `j = 1..=n` plus `p = 1/2`.
    pub binomial_n: Vec<u64>,
    /// Hypergeometric: every admissible `(n, r, q)` with `n <= max`.
    pub hypergeometric_max_n: u64,
    pub poisson_mu: Vec<f64>,
}

impl Default for EinvGrid {
    fn default() -> Self {
        Self {
            binomial_n: (3..=200).collect(),
            hypergeometric_max_n: 200,
            poisson_mu: (1..=500).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

impl EinvGrid {
    pub fn binomial_laws(&self) -> Vec<OccupancyLaw> {
        let mut laws = Vec::new();
        for &n in &self.binomial_n {
            for j in 1..=n {
                laws.push(OccupancyLaw::Binomial { n, p: j as f64 / n as f64 });
            }
            if n % 2 == 1 {
                laws.push(OccupancyLaw::Binomial { n, p: 0.5 });
            }
        }
        laws
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FamilySummary {
    pub checked: usize,
    pub failed: usize,
    /// Smallest distance to a bound over all checks of the family.
    pub min_margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EinvReport {
    pub families: BTreeMap<BoundFamily, FamilySummary>,
    pub failures: Vec<BoundCheck>,
}

impl EinvReport {
    fn absorb(&mut self, checks: impl IntoIterator<Item = BoundCheck>) {
        for c in checks {
            let entry = self.families.entry(c.family).or_insert(FamilySummary {
                min_margin: f64::INFINITY,
                ..Default::default()
            });
            entry.checked += 1;
            entry.min_margin = entry.min_margin.min(c.margin());
            if !c.pass {
                entry.failed += 1;
                self.failures.push(c);
            }
        }
    }

    fn merge(mut self, other: EinvReport) -> EinvReport {
        for (family, s) in other.families {
            let entry = self.families.entry(family).or_insert(FamilySummary {
                min_margin: f64::INFINITY,
                ..Default::default()
            });
            entry.checked += s.checked;
            entry.failed += s.failed;
            entry.min_margin = entry.min_margin.min(s.min_margin);
        }
        self.failures.extend(other.failures);
        self
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn total_checks(&self) -> usize {
        self.families.values().map(|s| s.checked).sum()
    }
}

/// Evaluates every applicable bracket on the grid. Failures are collected,
/// never raised. The result does not depend on the thread count.
pub fn verify_einv_bounds(grid: &EinvGrid) -> EinvReport {
    let mut report = EinvReport::default();
    for law in grid.binomial_laws() {
        report.absorb(bound_checks(law));
    }
    let hyper = (1..=grid.hypergeometric_max_n)
        .into_par_iter()
        .map(|n| {
            let mut part = EinvReport::default();
            for r in 1..=n {
                for q in 1..=n {
                    part.absorb(bound_checks(OccupancyLaw::Hypergeometric { n, r, q }));
                }
            }
            part
        })
        .collect::<Vec<_>>();
    for part in hyper {
        report = report.merge(part);
    }
    for &mu in &grid.poisson_mu {
        report.absorb(bound_checks(OccupancyLaw::Poisson { mu }));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_binomial() {
        assert_eq!(einv_of(OccupancyLaw::Binomial { n: 17, p: 1.0 }), 1.0);
    }

    #[test]
    fn bernoulli() {
        let v = einv_of(OccupancyLaw::Binomial { n: 1, p: 0.3 });
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn loo_case_small() {
        let v = einv_of(OccupancyLaw::Hypergeometric { n: 10, r: 1, q: 9 });
        assert!((v - 0.9).abs() < 1e-14);
        let v = einv_of(OccupancyLaw::Hypergeometric { n: 50, r: 20, q: 49 });
        let exact = 1.0 + (49.0 * 20.0 / (50.0 * 19.0) - 1.0) / 50.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn pmf_table_sums_to_one_and_has_right_mean() {
        for law in [
            OccupancyLaw::Binomial { n: 2048, p: 0.01 },
            OccupancyLaw::Hypergeometric { n: 200, r: 37, q: 150 },
            OccupancyLaw::Poisson { mu: 700.0 },
            OccupancyLaw::Poisson { mu: 1e-3 },
        ] {
            let (start, pmf) = law.pmf_table(DEFAULT_TAIL_TOL);
            let total: f64 = pmf.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(i, w)| (start + i as u64) as f64 * w).sum();
            assert!((mean - law.mean()).abs() < 1e-9 * law.mean().max(1.0), "{law:?}: {mean}");
        }
    }

    #[test]
    fn hypergeometric_support_respected() {
        // r + q > n forces at least r + q - n marked items in the draw
        let (start, pmf) = OccupancyLaw::Hypergeometric { n: 10, r: 7, q: 8 }.pmf_table(DEFAULT_TAIL_TOL);
        assert_eq!(start, 5);
        assert_eq!(pmf.len(), 3);
    }

    #[test]
    fn spot_bounds() {
        let v = einv_of(OccupancyLaw::Binomial { n: 100, p: 0.5 });
        assert!((1.0..=2.0003).contains(&v));
        let v = einv_of(OccupancyLaw::Poisson { mu: 5.0 });
        let upper = (2.0 - 2.0 * (-10.0f64).exp()).min(1.0 + 2.0 * (1.0 + (-3.0f64).exp()) / 3.0);
        assert!(v >= 1.0 && v <= upper);
        assert!(bound_checks(OccupancyLaw::Poisson { mu: 5.0 }).iter().all(|c| c.pass));
    }

    #[test]
    fn validation() {
        assert!(OccupancyLaw::Binomial { n: 0, p: 0.5 }.validate().is_err());
        assert!(OccupancyLaw::Binomial { n: 3, p: 0.0 }.validate().is_err());
        assert!(OccupancyLaw::Hypergeometric { n: 5, r: 6, q: 1 }.validate().is_err());
        assert!(OccupancyLaw::Poisson { mu: 0.0 }.validate().is_err());
        assert!(OccupancyLaw::Hypergeometric { n: 5, r: 5, q: 5 }.validate().is_ok());
    }
}
