mod common;

use ambistop::bayesian::{self, phi, phi_prime, BayesAction, BayesBenchmark, Case};
use ambistop::model::{bayes_update, drift_time, llr, p_lower, sigmoid, AmbiguityInterval};
use ambistop::numerics::dopri;
use ambistop::PayoffSpec;
use common::{asymmetric, bayes_value_iteration, c0, case2};
use proptest::prelude::*;

#[test]
fn log_odds_examples() {
    assert_eq!(llr(0.5), 0.0);
    assert_eq!(sigmoid(0.0), 0.5);
    assert!((llr(0.9) - 9f64.ln()).abs() < 1e-14);
    assert!((sigmoid(llr(0.9)) - 0.9).abs() < 1e-15);
    assert!((p_lower(0.476, 2.0) - 0.1095).abs() < 1e-4);
    assert!((p_lower(0.7, 2.0) - 0.2400).abs() < 1e-4);
    assert_eq!(p_lower(0.5, 0.0), 0.5);
}

#[test]
fn update_matches_integrated_law_of_motion() {
    let s = c0();
    let t = 2f64.ln();
    let closed = bayes_update(0.5, t, &s).unwrap();
    assert!((closed - 1.0 / 3.0).abs() < 1e-15);
    let ys = dopri(|_, y: &[f64; 1]| [s.eta(y[0])], 0.0, [0.5], &[t], 1e-12, 1e-14).unwrap();
    assert!((ys[0][0] - closed).abs() < 1e-10);
    assert_eq!(bayes_update(1.0, 5.0, &s).unwrap(), 1.0);
    assert_eq!(bayes_update(0.5, 0.0, &s).unwrap(), 0.5);
    assert!((drift_time(0.5, 1.0 / 3.0, &s).unwrap() - t).abs() < 1e-14);
    assert_eq!(drift_time(0.4, 0.4, &s).unwrap(), 0.0);
}

#[test]
fn stopping_payoff_examples() {
    let sp = c0().stopping_payoffs();
    assert_eq!((sp.p_hat, sp.rho_hat, sp.u_hat), (0.5, 0.5, 0.5));
    let a = asymmetric().stopping_payoffs();
    assert!((a.rho_hat - 1.0 / 3.0).abs() < 1e-15);
    let s = asymmetric();
    let mixed: Vec<f64> = (0..=10).map(|i| s.u_rho(a.rho_hat, i as f64 / 10.0)).collect();
    assert!(mixed.iter().all(|v| (v - mixed[0]).abs() < 1e-14));
}

#[test]
fn boundary_examples() {
    let b = BayesBenchmark::new(&c0());
    assert!((b.p_l_B - 0.1).abs() < 1e-15);
    assert_eq!(b.c_bar, 0.5);
    assert!((b.p_r_B - 0.838).abs() < 1e-3);
    assert!((b.p_star - 0.476).abs() < 1e-3);
    assert_eq!(b.case, Case::Case1);
    assert!((b.phi(b.p_l_B) - 0.9).abs() < 1e-12);
    assert!((b.phi(0.476) - 0.790).abs() < 1e-3);
    assert_eq!(b.phi_star(1.0), 1.0);
    assert!((bayesian::left_boundary(&c0().with_cost(0.25)).unwrap() - 0.25).abs() < 1e-15);
    assert!(bayesian::left_boundary(&c0().with_cost(1e-9)).unwrap() < 1e-8);
    assert!(bayesian::left_boundary(&c0().with_cost(0.5)).is_err());
    let hi = BayesBenchmark::new(&c0().with_cost(0.5));
    assert_eq!((hi.case, hi.p_l_B), (Case::NoExperimentation, 0.5));
}

#[test]
fn minimiser_found_by_grid_scan() {
    let b = BayesBenchmark::new(&c0());
    let grid = common::llr_grid(llr(0.2), llr(0.8), 100_001);
    let best = grid.iter().copied().min_by(|x, y| b.phi(*x).total_cmp(&b.phi(*y))).unwrap();
    assert!((best - b.p_star).abs() < 1e-4);
    assert!(b.phi_prime(b.p_star).abs() < 1e-9);
}

#[test]
fn case_classification() {
    assert_eq!(BayesBenchmark::new(&case2()).case, Case::Case2);
    let b = BayesBenchmark::new(&case2());
    assert!(b.phi_prime(b.p_star) < 0.0);
    assert_eq!(b.p_star, b.p_r_B);
    let steep = BayesBenchmark::new(&PayoffSpec::new(5.0, 0.0, 0.0, 1.0, 0.1, 1.0).unwrap());
    assert_eq!(steep.case, Case::Case1);
}

#[test]
fn phi_examples_and_derivative() {
    let s = c0();
    assert_eq!(phi(0.4, 0.4, 0.77, &s).unwrap(), 0.77);
    let b = BayesBenchmark::new(&s);
    assert!((phi(0.5, 0.1, 0.9, &s).unwrap() - b.phi(0.5)).abs() < 1e-15);
    for i in 1..50 {
        let p = 0.1 + 0.85 * i as f64 / 50.0;
        let h = 1e-6;
        let fd = (b.phi(p + h) - b.phi(p - h)) / (2.0 * h);
        assert!((fd - b.phi_prime(p)).abs() < 1e-7, "p = {p}");
    }
}

/// The Bayesian value must match discrete-time value iteration for several
/// specs, including the Case-2 and asymmetric ones.
#[test]
fn value_matches_value_iteration() {
    for s in [c0(), c0().with_cost(0.05), c0().with_cost(0.3), asymmetric(), case2()] {
        let b = BayesBenchmark::new(&s);
        let (ps, v) = bayes_value_iteration(&s, 2000, 1e-3);
        let gap = ps.iter().zip(&v).map(|(&p, &x)| (x - b.phi_star(p)).abs()).fold(0.0, f64::max);
        assert!(gap < 2e-3, "{s:?}: gap {gap}");
    }
}

#[test]
fn right_boundary_matches_value_iteration() {
    let s = c0();
    let b = BayesBenchmark::new(&s);
    let (ps, v) = bayes_value_iteration(&s, 2000, 1e-3);
    // First grid belief above one half where stopping with r is optimal.
    let first = ps.iter().zip(&v).find(|(&p, &x)| p > 0.5 && (x - s.u_r(p)).abs() < 1e-12).unwrap().0;
    assert!((first - b.p_r_B).abs() < 5e-3, "{first} vs {}", b.p_r_B);
}

#[test]
fn convexity_and_pasting() {
    for s in [c0(), asymmetric(), case2()] {
        let b = BayesBenchmark::new(&s);
        let n = 1000;
        let ps: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let slopes: Vec<f64> = ps.windows(2).map(|w| (b.phi_star(w[1]) - b.phi_star(w[0])) / (w[1] - w[0])).collect();
        assert!(slopes.windows(2).all(|d| d[1] >= d[0] - 1e-9));
        assert!((b.phi(b.p_l_B) - s.u_l(b.p_l_B)).abs() < 1e-7);
        assert!((b.phi_prime(b.p_l_B * (1.0 + 1e-12)) - s.du_l()).abs() < 1e-7);
        assert!((b.phi(b.p_r_B) - s.u_r(b.p_r_B)).abs() < 1e-7);
    }
}

/// Where the zero-length plan meets `U_l` away from the boundary, it crosses
/// from below with a strictly larger slope.
#[test]
fn slope_gap_positive_right_of_left_boundary() {
    let s = c0();
    let b = BayesBenchmark::new(&s);
    for i in 1..=200 {
        let p = b.p_l_B + (0.999 - b.p_l_B) * i as f64 / 200.0;
        let slope = phi_prime(p, p, s.u_l(p), &s).unwrap();
        assert!(slope - s.du_l() > 0.0, "p = {p}");
    }
}

#[test]
fn bayesian_ode_residual() {
    let s = c0();
    let mut rng = 12345u64;
    let mut uni = || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let q = 0.05 + 0.5 * uni();
        let p = q + (0.95 - q) * uni();
        let v0 = s.u_l(q) + 0.2 * (uni() - 0.5);
        let h = 1e-6;
        let f = |x: f64| phi(x, q, v0, &s).unwrap();
        let d = (f(p + h) - f(p - h)) / (2.0 * h);
        // 0 = -c + lambda p (u_r^R - V) + eta(p) V'
        let res = -s.c + s.lambda * p * (s.u_r_R - f(p)) + s.eta(p) * d;
        assert!(res.abs() < 1e-8, "p={p}, q={q}: {res}");
    }
}

#[test]
fn bayes_actions() {
    let b = BayesBenchmark::new(&c0());
    assert_eq!(b.action(0.05), BayesAction::StopL);
    assert_eq!(b.action(0.5), BayesAction::Experiment);
    assert_eq!(b.action(0.9), BayesAction::StopR);
}

proptest! {
    #[test]
    fn update_composes(p in 0.001f64..0.999, t in 0.0f64..5.0, u in 0.0f64..5.0) {
        let s = c0();
        let two = bayes_update(bayes_update(p, t, &s).unwrap(), u, &s).unwrap();
        let one = bayes_update(p, t + u, &s).unwrap();
        prop_assert!((two - one).abs() < 1e-12);
    }

    #[test]
    fn drift_times_add(a in 0.01f64..0.99, x in 0.01f64..1.0, y in 0.01f64..1.0) {
        let s = c0();
        let b = a * x.max(y);
        let c = b * x.min(y);
        let lhs = drift_time(a, b, &s).unwrap() + drift_time(b, c, &s).unwrap();
        prop_assert!((lhs - drift_time(a, c, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn width_is_invariant(p_bar in 0.01f64..0.99, delta in 0.0f64..6.0, t in 0.0f64..8.0) {
        let s = c0();
        let i = AmbiguityInterval::new(p_bar, delta).unwrap().updated(t, &s).unwrap();
        let (lo, hi) = i.bounds();
        let w = llr(bayes_update(p_bar, t, &s).unwrap()) - llr(bayes_update(p_lower(p_bar, delta), t, &s).unwrap());
        prop_assert!((w - delta).abs() < 1e-12);
        if hi < 1.0 - 1e-6 && lo > 1e-6 {
            prop_assert!((llr(hi) - llr(lo) - delta).abs() < 1e-9);
        }
    }

    #[test]
    fn hedge_is_flat_and_minimal(urr in 0.5f64..3.0, ulr in -1.0f64..0.4, url in -1.0f64..0.4, ull in 0.5f64..3.0) {
        let s = PayoffSpec::new(urr, ulr, url, ull, 0.1, 1.0).unwrap();
        let sp = s.stopping_payoffs();
        let slope = s.cond_rho(sp.rho_hat).slope();
        prop_assert!(slope.abs() < 1e-12);
        let n = 10_000;
        let min = (0..=n).map(|i| s.u_max(i as f64 / n as f64)).fold(s.u_max(sp.p_hat), f64::min);
        prop_assert!((s.u_max(sp.p_hat) - min).abs() < 1e-12);
    }

    #[test]
    fn boundaries_ordered(c in 0.01f64..0.49, lambda in 0.2f64..5.0) {
        let s = PayoffSpec::symmetric(1.0, c * lambda, lambda).unwrap();
        let b = BayesBenchmark::new(&s);
        prop_assert!(b.p_l_B < b.p_star && b.p_star <= b.p_r_B);
        // Near c_bar the minimiser can sit at the right boundary even with symmetric payoffs.
        prop_assert_eq!(b.p_star == b.p_r_B, b.case == Case::Case2);
        prop_assert!((b.p_l_B - c).abs() < 1e-12);
    }
}
