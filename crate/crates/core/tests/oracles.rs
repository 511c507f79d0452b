//! Independent oracles for the numerical kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use respen::diagnostics::{delta_ideal, delta_penw, delta_penw_bar};
use respen::histogram::{excess_loss, fit_regressogram, NoiseLevel, Signal};
use respen::penalties::{estimate_sigma2, rp_penalty_closed, rp_penalty_from_weights};
use respen::selection::{filter_models, ModelCollection, MIN_CELL_COUNT};
use respen::weights::einv::{einv_of, OccupancyLaw};
use respen::{CellStats, Dataset, Error, Partition, RegressionTruth, WeightScheme};

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `E[Z] E[1/Z | Z > 0]` by summing a pmf given in log space over its support.
fn brute_einv(support: impl Iterator<Item = u64>, ln_pmf: impl Fn(u64) -> f64) -> f64 {
    let (mut mass, mut inv, mut mean) = (0.0, 0.0, 0.0);
    for k in support {
        let w = ln_pmf(k).exp();
        mean += w * k as f64;
        if k > 0 {
            mass += w;
            inv += w / k as f64;
        }
    }
    mean * inv / mass
}

fn brute_binomial(n: u64, p: f64) -> f64 {
    if p == 1.0 {
        return 1.0;
    }
    brute_einv(0..=n, |k| ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln())
}

fn brute_hypergeometric(n: u64, r: u64, q: u64) -> f64 {
    let lo = (q + r).saturating_sub(n);
    brute_einv(lo..=r.min(q), |k| ln_choose(r, k) + ln_choose(n - r, q - k) - ln_choose(n, q))
}

fn brute_poisson(mu: f64) -> f64 {
    let top = (mu + 40.0 * mu.sqrt() + 60.0) as u64;
    brute_einv(0..=top, |k| k as f64 * mu.ln() - mu - ln_gamma(k as f64 + 1.0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn einv_matches_log_space_pmf_summation() {
    for n in [1u64, 2, 3, 7, 20, 57, 100, 200, 1000] {
        for p in [0.001, 0.01, 0.1, 0.3, 0.5, 0.77, 0.99, 1.0] {
            let law = OccupancyLaw::Binomial { n, p };
            let got = einv_of(law);
            let want = brute_binomial(n, p);
            assert!(rel(got, want) < 1e-10, "{law:?}: {got} vs {want}");
        }
    }
    for n in [2u64, 5, 10, 33, 100, 200] {
        for r in [1, 2, n / 3 + 1, n / 2, n - 1, n] {
            for q in [1, 2, n / 2, n - 1, n] {
                if r == 0 || q == 0 || r > n || q > n {
                    continue;
                }
                let law = OccupancyLaw::Hypergeometric { n, r, q };
                let (got, want) = (einv_of(law), brute_hypergeometric(n, r, q));
                assert!(rel(got, want) < 1e-10, "{law:?}: {got} vs {want}");
            }
        }
    }
    for mu in [0.05, 0.1, 0.5, 1.0, 3.0, 7.5, 20.0, 50.0, 300.0] {
        let (got, want) = (einv_of(OccupancyLaw::Poisson { mu }), brute_poisson(mu));
        assert!(rel(got, want) < 1e-10, "Poisson({mu}): {got} vs {want}");
    }
}

#[test]
fn poisson_three_by_direct_summation() {
    // iterative pmf, accumulated until the terms underflow
    let mu: f64 = 3.0;
    let mut w = (-mu).exp();
    let (mut mass, mut inv) = (0.0, 0.0);
    for k in 1..200 {
        w *= mu / k as f64;
        mass += w;
        inv += w / k as f64;
    }
    let want = mu * inv / mass;
    assert!(rel(einv_of(OccupancyLaw::Poisson { mu }), want) < 1e-13);
}

#[test]
fn rho_r1_through_hypergeometric_oracle() {
    let r1 = WeightScheme::Rho { q: 5 }.r1(10, 4).unwrap();
    assert!((r1 - (2.0 * brute_hypergeometric(10, 4, 5) - 1.0)).abs() < 1e-12);
}

/// Composite 3-point Gauss–Legendre on `[a, b]` with `m` panels; never
/// evaluates at the panel edges, where the signal may jump.
fn gauss3(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let r = (0.6f64).sqrt() * 0.5 * h;
    (0..m)
        .map(|i| {
            let c = a + (i as f64 + 0.5) * h;
            (5.0 * f(c - r) + 8.0 * f(c) + 5.0 * f(c + r)) * h / 18.0
        })
        .sum()
}

#[test]
fn excess_loss_against_composite_gauss() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sin = RegressionTruth::new(Signal::Sin, NoiseLevel::Constant { sigma: 1.0 });
    let hs = RegressionTruth::new(Signal::HeaviSine, NoiseLevel::Constant { sigma: 1.0 });
    for (truth, parts) in [
        (&sin, vec![Partition::regular(2), Partition::regular(7), Partition::two_halves(3, 5)]),
        (&hs, vec![Partition::regular(4), Partition::regular(16), Partition::two_halves(2, 8)]),
    ] {
        for p in parts {
            let n = 300;
            let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let y: Vec<f64> = x.iter().map(|&x| truth.s(x) + rng.sample::<f64, _>(StandardNormal)).collect();
            let d = Dataset::new(x, y).unwrap();
            let fit = fit_regressogram(&p, &CellStats::from_data(&d, &p));
            // integrate cell by cell, splitting at the signal's jumps
            let mut knots: Vec<f64> = p.breakpoints().to_vec();
            knots.extend(truth.signal.jumps());
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            let mut want = 0.0;
            for w in knots.windows(2) {
                let cell = p.locate(0.5 * (w[0] + w[1]));
                let b = fit.values[cell];
                want += gauss3(|t| (truth.s(t) - b).powi(2), w[0], w[1], 2000);
            }
            let got = excess_loss(truth, &fit);
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }
}

#[test]
fn two_cell_sine_loss_with_true_means() {
    let truth = RegressionTruth::new(Signal::Sin, NoiseLevel::Constant { sigma: 1.0 });
    let p = Partition::regular(2);
    let ct = truth.cell_truth(&p);
    // each half has mean 2/pi; integral of sin^2 over [0, 1] is 1/2
    let want = 0.5 - 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
    assert!((ct.total_bias() - want).abs() < 1e-10);
}

/// Binomial pmf table by `ln_gamma`.
fn binom_pmf(n: usize, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if p == 1.0 {
                return if k == n { 1.0 } else { 0.0 };
            }
            (ln_choose(n as u64, k as u64) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
        })
        .collect()
}

#[test]
fn delta_ideal_by_independent_summation() {
    for n in [10usize, 50, 200] {
        for np in [1.0, 2.5, 10.0, 30.0, n as f64].into_iter().filter(|&np| np <= n as f64) {
            let p = np / n as f64;
            let pmf = binom_pmf(n, p);
            let mut want = pmf[0] * (np + 1.0) - 2.0;
            for (k, w) in pmf.iter().enumerate().skip(1) {
                want += w * (1.0 + np / k as f64);
            }
            assert!((delta_ideal(n, p) - want).abs() < 1e-10, "n={n} np={np}");
        }
    }
}

#[test]
fn delta_ideal_monte_carlo() {
    let (n, p) = (200u64, 0.05);
    let np = n as f64 * p;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bin = Binomial::new(n, p).unwrap();
    let draws = 2_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        let k = bin.sample(&mut rng);
        let v = if k == 0 { np + 1.0 } else { 1.0 + np / k as f64 } - 2.0;
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / draws as f64;
    let se = ((sum2 / draws as f64 - mean * mean) / draws as f64).sqrt();
    assert!((delta_ideal(n as usize, p) - mean).abs() < 4.0 * se, "{mean} +- {se}");
}

#[test]
fn delta_penw_bar_monte_carlo() {
    let (n, p) = (200usize, 0.25);
    let scheme = WeightScheme::Rho { q: n / 2 };
    let table: Vec<f64> = (1..=n).map(|k| delta_penw(&scheme, n, k).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bin = Binomial::new(n as u64, p).unwrap();
    let (mut sum, mut sum2, mut m) = (0.0, 0.0, 0usize);
    for _ in 0..200_000 {
        let k = bin.sample(&mut rng) as usize;
        if k == 0 {
            continue;
        }
        let v = table[k - 1];
        sum += v;
        sum2 += v * v;
        m += 1;
    }
    let mean = sum / m as f64;
    let se = ((sum2 / m as f64 - mean * mean) / m as f64).sqrt();
    let got = delta_penw_bar(&scheme, n, p).unwrap();
    assert!((got - mean).abs() < 4.0 * se + 1e-12, "{got} vs {mean} +- {se}");
}

#[test]
fn sparse_partition_is_filtered() {
    let collection = ModelCollection::from_partitions(vec![Partition::regular(100)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trials = 2000;
    let mut filtered = 0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let d = Dataset::new(x, vec![0.0; 200]).unwrap();
        match filter_models(&collection, &d, MIN_CELL_COUNT) {
            Ok(mask) => assert!(mask[0]),
            Err(e) => {
                assert!(matches!(e, Error::NoAdmissibleModel));
                filtered += 1;
            }
        }
    }
    // 100 cells of expected count 2: P(all >= 3) is far below 1e-3
    assert!(filtered as f64 / trials as f64 > 0.999);
}

#[test]
fn sigma2_concentrates_like_chi_square() {
    // Two points per cell of the n/2-cell partition, so RSS / (n - n/2) is
    // exactly chi-square with n/2 degrees of freedom over n/2.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, reps) = (1000, 400);
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let mut inside = 0;
    let mut sum = 0.0;
    for _ in 0..reps {
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let s2 = estimate_sigma2(&Dataset::new(x.clone(), y).unwrap()).unwrap();
        sum += s2;
        if (0.8..=1.2).contains(&s2) {
            inside += 1;
        }
    }
    assert!(inside as f64 / reps as f64 >= 0.99, "{inside}/{reps}");
    let mean = sum / reps as f64;
    let se = (2.0 / (n / 2) as f64).sqrt() / (reps as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * se, "{mean}");
}

#[test]
fn sigma2_under_random_design_counts_empty_cells() {
    // Empty cells keep their degree of freedom in the denominator, so the
    // estimator overshoots by E[#empty cells] / (n - n/2) on average.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, reps) = (1000usize, 400);
    let d = n / 2;
    let mut sum = 0.0;
    let mut bias = 0.0;
    for _ in 0..reps {
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let nonempty = CellStats::from_data(&Dataset::new(x.clone(), vec![0.0; n]).unwrap(), &Partition::regular(d))
            .counts()
            .iter()
            .filter(|&&k| k > 0)
            .count();
        bias += (n - nonempty) as f64 / (n - d) as f64;
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        sum += estimate_sigma2(&Dataset::new(x, y).unwrap()).unwrap();
    }
    let (mean, want) = (sum / reps as f64, bias / reps as f64);
    let se = (2.0 * want / (n - d) as f64).sqrt() / (reps as f64).sqrt();
    assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want}");
}

/// Full enumeration of Rademacher(1/2) weights gives the exact resampling
/// expectation. It sits below the closed form by `(C/n) 2^{1-k} css/(k-1)`
/// per cell: a cell with no weight drops its resampled-fit term entirely.
#[test]
fn rademacher_enumeration_against_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(4..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let d = Dataset::new(x, y).unwrap();
        let p = Partition::regular(rng.random_range(1..=3));
        let all: Vec<Vec<f64>> =
            (0..1u32 << n).map(|m| (0..n).map(|i| if m >> i & 1 == 1 { 2.0 } else { 0.0 }).collect()).collect();
        let exact = rp_penalty_from_weights(&d, &p, &all, 1.0).unwrap().value;
        let stats = CellStats::from_data(&d, &p);
        let closed = rp_penalty_closed(&stats, &WeightScheme::rademacher(), 1.0).unwrap();
        let mut gap = 0.0;
        for l in 0..p.dim() {
            let k = stats.count(l);
            if k >= 2 {
                let ys: Vec<f64> = d.x().iter().zip(d.y()).filter(|(&xi, _)| p.locate(xi) == l).map(|(_, &yi)| yi).collect();
                let m = ys.iter().sum::<f64>() / k as f64;
                let css: f64 = ys.iter().map(|v| (v - m).powi(2)).sum();
                gap += 2.0 * 0.5f64.powi(k as i32) * css / (k - 1) as f64 / n as f64;
            }
        }
        assert!((closed - gap - exact).abs() < 1e-12 * closed.max(1.0), "{closed} - {gap} vs {exact}");
    }
}
