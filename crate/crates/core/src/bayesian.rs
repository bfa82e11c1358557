//! Bayesian benchmark: closed-form value of experimenting until the left
//! boundary, both stopping boundaries and the Case 1 / Case 2 split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bisect_belief, llr, odds, Cond, PayoffSpec};

/// Cut on `Phi'(p_r^B)` separating an interior minimiser from a corner one.
pub const CASE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    Case1,
    Case2,
    NoExperimentation,
}

/// Value of experimenting from `p` until the belief reaches `p_stop`, then
/// collecting `stop_value`.
pub fn phi(p: f64, p_stop: f64, stop_value: f64, spec: &PayoffSpec) -> Result<f64> {
    check_order(p, p_stop)?;
    let k = spec.c_over_lambda();
    let tau = (llr(p) - llr(p_stop)) / spec.lambda;
    let drift_share = p - (1.0 - p) * odds(p_stop);
    Ok(drift_share * (spec.u_r_R - k) + (1.0 - p) / (1.0 - p_stop) * stop_value - (1.0 - p) * spec.c * tau)
}

/// `d phi / dp` with the stopping point held fixed.
pub fn phi_prime(p: f64, p_stop: f64, stop_value: f64, spec: &PayoffSpec) -> Result<f64> {
    check_order(p, p_stop)?;
    let k = spec.c_over_lambda();
    Ok((spec.u_r_R - k - stop_value) / (1.0 - p_stop) + k * ((odds(p) / odds(p_stop)).ln() - 1.0 / p))
}

pub fn phi_second(p: f64, spec: &PayoffSpec) -> f64 {
    spec.c_over_lambda() * (1.0 / (p * (1.0 - p)) + 1.0 / (p * p))
}

fn check_order(p: f64, p_stop: f64) -> Result<()> {
    if !(0.0 < p_stop && p_stop <= p && p < 1.0) {
        return Err(Error::Domain(format!("phi needs 0 < p_stop <= p < 1, got p={p}, p_stop={p_stop}")));
    }
    Ok(())
}

/// `p_l^B = c / (lambda (u_r^R - u_l^R))`.
pub fn left_boundary(spec: &PayoffSpec) -> Result<f64> {
    if spec.c >= spec.c_bar() {
        return Err(Error::NoExperimentation);
    }
    Ok(spec.c / (spec.lambda * spec.delta_R()))
}

pub fn right_boundary_and_cbar(spec: &PayoffSpec) -> Result<(f64, f64)> {
    let b = BayesBenchmark::new(spec);
    match b.case {
        Case::NoExperimentation => Err(Error::NoExperimentation),
        _ => Ok((b.p_r_B, b.c_bar)),
    }
}

pub fn p_star_and_case(spec: &PayoffSpec) -> (f64, Case) {
    let b = BayesBenchmark::new(spec);
    (b.p_star, b.case)
}

/// `(Phi(p), Phi*(p))`.
pub fn value_function(p: f64, spec: &PayoffSpec) -> (f64, f64) {
    let b = BayesBenchmark::new(spec);
    (b.phi(p), b.phi_star(p))
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesBenchmark {
    pub spec: PayoffSpec,
    pub p_l_B: f64,
    pub p_r_B: f64,
    pub c_bar: f64,
    pub p_star: f64,
    pub case: Case,
    pub phi_at_p_star: f64,
}

impl BayesBenchmark {
    #[allow(non_snake_case)]
    pub fn new(spec: &PayoffSpec) -> Self {
        let c_bar = spec.c_bar();
        let p_hat = spec.stopping_payoffs().p_hat;
        let Ok(p_l_B) = left_boundary(spec) else {
            return BayesBenchmark {
                spec: *spec,
                p_l_B: p_hat,
                p_r_B: p_hat,
                c_bar,
                p_star: p_hat,
                case: Case::NoExperimentation,
                phi_at_p_star: spec.u_l(p_hat),
            };
        };
        let mut b = BayesBenchmark {
            spec: *spec,
            p_l_B,
            p_r_B: f64::NAN,
            c_bar,
            p_star: f64::NAN,
            case: Case::Case1,
            phi_at_p_star: f64::NAN,
        };
        // Phi - U_r is positive at p_hat when c < c_bar and negative near 1.
        let hi = 1.0 - 1e-9;
        let p_r_B = match bisect_belief(|p| b.phi(p) - spec.u_r(p), p_hat.max(p_l_B), hi) {
            Ok(p) => p,
            Err(_) => {
                return BayesBenchmark { p_l_B: p_hat, p_r_B: p_hat, p_star: p_hat, case: Case::NoExperimentation, phi_at_p_star: spec.u_l(p_hat), ..b };
            }
        };
        b.p_r_B = p_r_B;
        if b.phi_prime(p_r_B) > CASE_TOL {
            b.p_star = bisect_belief(|p| b.phi_prime(p), p_l_B, p_r_B).unwrap_or(p_r_B);
            b.case = Case::Case1;
        } else {
            b.p_star = p_r_B;
            b.case = Case::Case2;
        }
        b.phi_at_p_star = b.phi(b.p_star);
        b
    }

    pub fn experiments(&self) -> bool {
        self.case != Case::NoExperimentation
    }

    /// Value of the "experiment until `p_l^B`, then take l" plan; `U_l` at or
    /// below the boundary.
    pub fn phi(&self, p: f64) -> f64 {
        if !self.experiments() || p <= self.p_l_B {
            return self.spec.u_l(p);
        }
        phi(p, self.p_l_B, self.spec.u_l(self.p_l_B), &self.spec).unwrap_or(f64::NAN)
    }

    pub fn phi_prime(&self, p: f64) -> f64 {
        if !self.experiments() || p <= self.p_l_B {
            return self.spec.du_l();
        }
        phi_prime(p, self.p_l_B, self.spec.u_l(self.p_l_B), &self.spec).unwrap_or(f64::NAN)
    }

    pub fn phi_second(&self, p: f64) -> f64 {
        if !self.experiments() || p <= self.p_l_B {
            return 0.0;
        }
        phi_second(p, &self.spec)
    }

    /// `Phi* = max(Phi, U_r)`, or the stopping payoff `U` when experimentation never pays.
    pub fn phi_star(&self, p: f64) -> f64 {
        if !self.experiments() {
            return self.spec.u_max(p);
        }
        self.phi(p).max(self.spec.u_r(p))
    }

    /// Conditional values of the tangent to `Phi` at `p`, i.e. the payoff of
    /// following the Bayesian experimentation plan started at `p`.
    pub fn tangent(&self, p: f64) -> Cond {
        let (v, d) = (self.phi(p), self.phi_prime(p));
        Cond::new(v + (1.0 - p) * d, v - p * d)
    }

    /// Bayesian policy: stop with l, experiment, or stop with r.
    pub fn action(&self, p: f64) -> BayesAction {
        if !self.experiments() {
            return if self.spec.u_l(p) >= self.spec.u_r(p) { BayesAction::StopL } else { BayesAction::StopR };
        }
        if p <= self.p_l_B {
            BayesAction::StopL
        } else if p < self.p_r_B {
            BayesAction::Experiment
        } else {
            BayesAction::StopR
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BayesAction {
    StopL,
    Experiment,
    StopR,
}
