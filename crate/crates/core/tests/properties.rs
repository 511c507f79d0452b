use proptest::prelude::*;

use respen::histogram::{empirical_risk, excess_loss, fit_regressogram, NoiseLevel, Signal};
use respen::penalties::{mallows_penalty, rp_penalty_closed, rp_penalty_from_weights, rp_penalty_tabulated, vfold_penalty};
use respen::simbench::LossDecomposition;
use respen::weights::ResamplingConstants;
use respen::{CellStats, Dataset, FoldAssignment, Partition, RegressionTruth, WeightScheme};

fn data(max_n: usize) -> impl Strategy<Value = Dataset> {
    (4..=max_n)
        .prop_flat_map(|n| (prop::collection::vec(0.0..1.0f64, n), prop::collection::vec(-5.0..5.0f64, n)))
        .prop_map(|(x, y)| Dataset::new(x, y).unwrap())
}

fn schemes(n: usize) -> Vec<WeightScheme> {
    vec![
        WeightScheme::efron(n),
        WeightScheme::rademacher(),
        WeightScheme::poisson(),
        WeightScheme::Rho { q: n / 2 },
        WeightScheme::Loo,
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn penalty_ignores_per_cell_shifts(d in data(40), dim in 1usize..6, shift in prop::collection::vec(-50.0..50.0f64, 6)) {
        let p = Partition::regular(dim);
        let y: Vec<f64> = d.x().iter().zip(d.y()).map(|(&x, &y)| y + shift[p.locate(x)]).collect();
        let shifted = Dataset::new(d.x().to_vec(), y).unwrap();
        let (a, b) = (CellStats::from_data(&d, &p), CellStats::from_data(&shifted, &p));
        for s in schemes(d.len()) {
            let (pa, pb) = (rp_penalty_closed(&a, &s, 1.0).unwrap(), rp_penalty_closed(&b, &s, 1.0).unwrap());
            prop_assert!(close(pa, pb, 1e-9), "{:?}: {} vs {}", s, pa, pb);
        }
    }

    #[test]
    fn penalty_is_nonnegative(d in data(40), dim in 1usize..8) {
        let stats = CellStats::from_data(&d, &Partition::regular(dim));
        for s in schemes(d.len()) {
            prop_assert!(rp_penalty_closed(&stats, &s, s.c_w(d.len()).unwrap()).unwrap() >= 0.0);
        }
        prop_assert!(mallows_penalty(dim, 0.7, d.len(), 1.0) >= 0.0);
    }

    #[test]
    fn penalty_is_linear_in_c(d in data(40), dim in 1usize..6, c1 in 0.0..10.0f64, c2 in 0.0..10.0f64) {
        let stats = CellStats::from_data(&d, &Partition::regular(dim));
        for s in schemes(d.len()) {
            let f = |c| rp_penalty_closed(&stats, &s, c).unwrap();
            prop_assert!(close(f(c1 + c2), f(c1) + f(c2), 1e-12));
            prop_assert!(close(f(3.0 * c1), 3.0 * f(c1), 1e-12));
        }
    }

    #[test]
    fn rho_n_minus_one_is_loo(d in data(40), dim in 1usize..6) {
        let n = d.len();
        let stats = CellStats::from_data(&d, &Partition::regular(dim));
        let rho = rp_penalty_closed(&stats, &WeightScheme::Rho { q: n - 1 }, 1.0).unwrap();
        let loo = rp_penalty_closed(&stats, &WeightScheme::Loo, 1.0).unwrap();
        prop_assert!(close(rho, loo, 1e-12), "{} vs {}", rho, loo);
    }

    #[test]
    fn tabulated_matches_direct(d in data(40), dim in 1usize..6) {
        let n = d.len();
        let stats = CellStats::from_data(&d, &Partition::regular(dim));
        for s in schemes(n) {
            let table = ResamplingConstants::new(&s, n).unwrap();
            let a = rp_penalty_closed(&stats, &s, 2.0).unwrap();
            let b = rp_penalty_tabulated(&stats, &table, 2.0).unwrap();
            prop_assert!(close(a, b, 1e-13));
        }
    }

    #[test]
    fn loo_enumeration_is_exact(d in data(30), dim in 1usize..5) {
        let n = d.len();
        let p = Partition::regular(dim);
        let w = n as f64 / (n - 1) as f64;
        let vectors: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 0.0 } else { w }).collect()).collect();
        let mc = rp_penalty_from_weights(&d, &p, &vectors, (n - 1) as f64).unwrap();
        let closed = rp_penalty_closed(&CellStats::from_data(&d, &p), &WeightScheme::Loo, (n - 1) as f64).unwrap();
        prop_assert!(close(mc.value, closed, 1e-10), "{} vs {}", mc.value, closed);
    }

    #[test]
    fn singleton_vfold_is_loo(d in data(40), dim in 1usize..5) {
        let n = d.len();
        let p = Partition::regular(dim);
        let stats = CellStats::from_data(&d, &p);
        prop_assume!(stats.min_count() >= 2);
        let folds = FoldAssignment::singletons(n).unwrap();
        let v = vfold_penalty(&d, &p, &folds, (n - 1) as f64).unwrap();
        let loo = rp_penalty_closed(&stats, &WeightScheme::Loo, (n - 1) as f64).unwrap();
        prop_assert!(close(v, loo, 1e-10), "{} vs {}", v, loo);
    }

    #[test]
    fn regressogram_minimizes_empirical_risk(d in data(40), dim in 1usize..6, bump in -1.0..1.0f64, cell in 0usize..6) {
        let p = Partition::regular(dim);
        let fit = fit_regressogram(&p, &CellStats::from_data(&d, &p));
        prop_assume!(fit.is_defined());
        let mut other = fit.clone();
        other.values[cell % dim] += bump;
        let (best, alt) = (empirical_risk(&fit, &d).unwrap(), empirical_risk(&other, &d).unwrap());
        prop_assert!(best <= alt + 1e-12);
    }

    #[test]
    fn loss_splits_into_bias_and_estimation(d in data(60), dim in 1usize..8, hs in any::<bool>()) {
        let signal = if hs { Signal::HeaviSine } else { Signal::Sin };
        let truth = RegressionTruth::new(signal, NoiseLevel::Constant { sigma: 1.0 });
        let p = Partition::regular(dim);
        let stats = CellStats::from_data(&d, &p);
        let fit = fit_regressogram(&p, &stats);
        prop_assume!(fit.is_defined());
        let loss = excess_loss(&truth, &fit);
        let parts = LossDecomposition::new(&truth.cell_truth(&p), &stats).unwrap();
        prop_assert!(parts.bias >= 0.0 && parts.p1 >= 0.0 && parts.p2 >= 0.0);
        prop_assert!(loss >= parts.bias - 1e-12);
        prop_assert!((loss - parts.excess_loss()).abs() < 1e-8, "{} vs {}", loss, parts.excess_loss());
    }
}
