mod common;

use ambistop::commitment::{commitment_plan, commitment_value, PlanKind};
use ambistop::{AmbiguityInterval, BayesBenchmark};
use common::{asymmetric, c0, case2};
use proptest::prelude::*;

fn interval(lo: f64, hi: f64) -> AmbiguityInterval {
    AmbiguityInterval::from_bounds(lo, hi).unwrap()
}

/// Minimiser of the plan's value over nature's beliefs, by grid search.
fn grid_argmin(line: ambistop::Cond, lo: f64, hi: f64) -> (f64, f64) {
    (0..=1000)
        .map(|i| lo + (hi - lo) * i as f64 / 1000.0)
        .map(|p| (p, line.at(p)))
        .fold((lo, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

#[test]
fn c0_examples() {
    let s = c0();
    let b = BayesBenchmark::new(&s);
    let grid_min = |lo: f64, hi: f64| (0..=1000).map(|i| b.phi_star(lo + (hi - lo) * i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
    assert!((commitment_value(&interval(0.6, 0.8), &s) - b.phi_star(0.6)).abs() < 1e-12);
    assert!((commitment_value(&interval(0.6, 0.8), &s) - grid_min(0.6, 0.8)).abs() < 1e-12);
    assert!((commitment_value(&interval(0.2, 0.3), &s) - b.phi_star(0.3)).abs() < 1e-12);
    let mid = commitment_value(&interval(0.3, 0.7), &s);
    assert!((mid - 0.790).abs() < 1e-3);
    assert!(mid <= grid_min(0.3, 0.7) + 1e-12);
}

#[test]
fn singleton_follows_bayes_plan() {
    let plan = commitment_plan(&AmbiguityInterval::new(0.65, 0.0).unwrap(), &c0());
    assert_eq!(plan.kind, PlanKind::BayesPlanAt(0.65));
}

#[test]
fn case2_mixes_action_with_experimentation() {
    let s = case2();
    let b = BayesBenchmark::new(&s);
    let i = interval(b.p_r_B * 0.8, (b.p_r_B * 1.1).min(0.99));
    let plan = commitment_plan(&i, &s);
    let d = b.phi_prime(b.p_r_B);
    let expected = -d / (s.du_r() - d);
    match plan.kind {
        PlanKind::MixActionVsExperiment { xi } => assert!((xi - expected).abs() < 1e-14 && 0.0 < xi && xi < 1.0),
        k => panic!("unexpected plan {k:?}"),
    }
    assert!(plan.line.slope().abs() < 1e-12);
    assert!((plan.value - b.phi_star(b.p_r_B)).abs() < 1e-12);
}

#[test]
fn high_cost_hedges() {
    let s = c0().with_cost(0.6);
    let plan = commitment_plan(&interval(0.3, 0.7), &s);
    assert_eq!(plan.kind, PlanKind::MixActions { rho: 0.5 });
    assert_eq!(plan.p_min, 0.5);
    assert!(plan.line.slope().abs() < 1e-15);
}

proptest! {
    /// The plan is a saddle: nature's best reply to it is `p_min`, and no
    /// belief in the interval has a lower Bayesian value.
    #[test]
    fn saddle_and_lower_bound(which in 0usize..4, a in 0.02f64..0.98, b in 0.02f64..0.98) {
        let s = [c0(), case2(), asymmetric(), c0().with_cost(0.7)][which];
        let (lo, hi) = (a.min(b), a.max(b));
        let i = interval(lo, hi);
        let plan = commitment_plan(&i, &s);
        let bench = BayesBenchmark::new(&s);
        let (_, worst) = grid_argmin(plan.line, lo, hi);
        prop_assert!((plan.line.at(plan.p_min) - worst).abs() < 1e-9);
        prop_assert!((plan.line.at(plan.p_min) - plan.value).abs() < 1e-9);
        for k in 0..=200 {
            let p = lo + (hi - lo) * k as f64 / 200.0;
            prop_assert!(plan.value <= bench.phi_star(p) + 1e-12);
        }
        prop_assert!((plan.value - bench.phi_star(plan.p_min)).abs() < 1e-12);
    }
}
