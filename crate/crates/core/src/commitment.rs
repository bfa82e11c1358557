//! Maxmin commitment plan over a prior interval. The value is the lowest
//! Bayesian value in the interval; when the minimiser sits on a kink of
//! `Phi*` the plan randomizes so that nature cannot exploit it.

use serde::{Deserialize, Serialize};

use crate::bayesian::{BayesBenchmark, Case};
use crate::model::{AmbiguityInterval, Cond, PayoffSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlanKind {
    /// Follow the Bayesian plan for the belief `p`.
    BayesPlanAt(f64),
    /// Take r with probability `xi`, otherwise start Bayesian experimentation.
    MixActionVsExperiment { xi: f64 },
    /// Stop at once, taking r with probability `rho`.
    MixActions { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitmentPlan {
    pub value: f64,
    pub p_min: f64,
    pub kind: PlanKind,
    /// Conditional payoffs of the plan; its value under nature's belief `p` is `line.at(p)`.
    pub line: Cond,
}

pub fn commitment_value(interval: &AmbiguityInterval, spec: &PayoffSpec) -> f64 {
    let b = BayesBenchmark::new(spec);
    let (lo, hi) = interval.bounds();
    b.phi_star(b.p_star.clamp(lo, hi))
}

pub fn commitment_plan(interval: &AmbiguityInterval, spec: &PayoffSpec) -> CommitmentPlan {
    plan_with(&BayesBenchmark::new(spec), interval)
}

pub fn plan_with(b: &BayesBenchmark, interval: &AmbiguityInterval) -> CommitmentPlan {
    let spec = &b.spec;
    let (lo, hi) = interval.bounds();
    let p_min = b.p_star.clamp(lo, hi);
    let value = b.phi_star(p_min);
    let star_inside = interval.delta > 0.0 && lo <= b.p_star && b.p_star <= hi;
    let (kind, line) = match b.case {
        Case::Case2 if star_inside => {
            let d = b.phi_prime(b.p_r_B);
            let xi = -d / (spec.du_r() - d);
            (PlanKind::MixActionVsExperiment { xi }, spec.cond_r().mix(&b.tangent(b.p_r_B), xi))
        }
        Case::NoExperimentation if star_inside => {
            let rho = spec.stopping_payoffs().rho_hat;
            (PlanKind::MixActions { rho }, spec.cond_rho(rho))
        }
        _ => (PlanKind::BayesPlanAt(p_min), bayes_line(b, p_min)),
    };
    CommitmentPlan { value, p_min, kind, line }
}

fn bayes_line(b: &BayesBenchmark, p: f64) -> Cond {
    let spec = &b.spec;
    if !b.experiments() {
        return if spec.u_l(p) >= spec.u_r(p) { spec.cond_l() } else { spec.cond_r() };
    }
    if p <= b.p_l_B {
        spec.cond_l()
    } else if p < b.p_r_B {
        b.tangent(p)
    } else {
        spec.cond_r()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0_endpoints_and_interior() {
        let s = PayoffSpec::symmetric(1.0, 0.1, 1.0).unwrap();
        let b = BayesBenchmark::new(&s);
        let v = |lo, hi| commitment_value(&AmbiguityInterval::from_bounds(lo, hi).unwrap(), &s);
        assert!((v(0.6, 0.8) - b.phi_star(0.6)).abs() < 1e-12);
        assert!((v(0.2, 0.3) - b.phi_star(0.3)).abs() < 1e-12);
        assert!((v(0.3, 0.7) - b.phi_at_p_star).abs() < 1e-12);
    }

    #[test]
    fn singleton_is_bayes_plan() {
        let s = PayoffSpec::symmetric(1.0, 0.1, 1.0).unwrap();
        let plan = commitment_plan(&AmbiguityInterval::new(0.4, 0.0).unwrap(), &s);
        assert_eq!(plan.kind, PlanKind::BayesPlanAt(0.4));
    }
}
