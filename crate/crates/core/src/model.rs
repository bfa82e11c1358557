//! Belief arithmetic, payoff primitives and the deterministic belief drift
//! shared by every solver.
//!
//! Beliefs are probabilities of state R. Interval geometry is done in
//! log-odds so that the ambiguity width stays exactly constant under updating.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// Tolerance for comparisons against region boundaries, in log-odds.
pub const EPS_B: f64 = 1e-10;

/// Log-odds `ln(p/(1-p))`; returns `-inf`/`+inf` at the endpoints.
pub fn llr(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        (p / (1.0 - p)).ln()
    }
}

/// Inverse of [`llr`].
pub fn sigmoid(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// Two-state value: payoff `r` in state R and `l` in state L. Its expected
/// value is affine in the belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cond {
    pub r: f64,
    pub l: f64,
}

impl Cond {
    pub const fn new(r: f64, l: f64) -> Self {
        Cond { r, l }
    }

    pub const fn flat(v: f64) -> Self {
        Cond { r: v, l: v }
    }

    pub fn at(&self, p: f64) -> f64 {
        p * self.r + (1.0 - p) * self.l
    }

    pub fn slope(&self) -> f64 {
        self.r - self.l
    }

    pub fn mix(&self, other: &Cond, w: f64) -> Cond {
        Cond::new(w * self.r + (1.0 - w) * other.r, w * self.l + (1.0 - w) * other.l)
    }

    /// Minimum over beliefs in `[lo, hi]` and the minimising belief
    /// (`hi` when the value is flat).
    pub fn min_over(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (a, b) = (self.at(lo), self.at(hi));
        if a < b {
            (a, lo)
        } else {
            (b, hi)
        }
    }
}

/// Payoffs `u_a^w` for action `a` in state `w`, flow cost and arrival rate.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub u_r_R: f64,
    pub u_l_R: f64,
    pub u_r_L: f64,
    pub u_l_L: f64,
    pub c: f64,
    pub lambda: f64,
}

/// Where the two stopping payoff lines cross and how to hedge between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingPayoffs {
    pub p_hat: f64,
    pub u_hat: f64,
    pub rho_hat: f64,
}

#[allow(non_snake_case)]
impl PayoffSpec {
    pub fn new(u_r_R: f64, u_l_R: f64, u_r_L: f64, u_l_L: f64, c: f64, lambda: f64) -> Result<Self> {
        let s = PayoffSpec { u_r_R, u_l_R, u_r_L, u_l_L, c, lambda };
        s.validate()?;
        Ok(s)
    }

    /// Symmetric payoffs: `delta` for the right action, zero otherwise.
    pub fn symmetric(delta: f64, c: f64, lambda: f64) -> Result<Self> {
        Self::new(delta, 0.0, 0.0, delta, c, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.u_r_R, self.u_l_R, self.u_r_L, self.u_l_L, self.c, self.lambda];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite parameter".into()));
        }
        let checks = [
            (self.u_r_R > self.u_l_R, "u_r_R > u_l_R"),
            (self.u_l_L > self.u_r_L, "u_l_L > u_r_L"),
            (self.u_r_R > self.u_r_L, "u_r_R > u_r_L"),
            (self.u_l_R < self.u_l_L, "u_l_R < u_l_L"),
            (self.c > 0.0, "c > 0"),
            (self.lambda > 0.0, "lambda > 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidSpec(format!("requires {what}")));
            }
        }
        Ok(())
    }

    pub fn with_cost(&self, c: f64) -> Self {
        PayoffSpec { c, ..*self }
    }

    /// `|u_l^R - u_l^L|`
    pub fn delta_l(&self) -> f64 {
        (self.u_l_R - self.u_l_L).abs()
    }

    /// `|u_r^R - u_r^L|`
    pub fn delta_r(&self) -> f64 {
        (self.u_r_R - self.u_r_L).abs()
    }

    /// Gain from the right action in state R.
    pub fn delta_R(&self) -> f64 {
        self.u_r_R - self.u_l_R
    }

    /// Gain from the right action in state L.
    pub fn delta_L(&self) -> f64 {
        self.u_l_L - self.u_r_L
    }

    pub fn c_over_lambda(&self) -> f64 {
        self.c / self.lambda
    }

    pub fn cond_l(&self) -> Cond {
        Cond::new(self.u_l_R, self.u_l_L)
    }

    pub fn cond_r(&self) -> Cond {
        Cond::new(self.u_r_R, self.u_r_L)
    }

    /// Conditional payoff of stopping with action r with probability `rho`.
    pub fn cond_rho(&self, rho: f64) -> Cond {
        self.cond_r().mix(&self.cond_l(), rho)
    }

    pub fn u_l(&self, p: f64) -> f64 {
        self.cond_l().at(p)
    }

    pub fn u_r(&self, p: f64) -> f64 {
        self.cond_r().at(p)
    }

    pub fn u_rho(&self, rho: f64, p: f64) -> f64 {
        self.cond_rho(rho).at(p)
    }

    /// Best immediate payoff `max(U_l, U_r)`.
    pub fn u_max(&self, p: f64) -> f64 {
        self.u_l(p).max(self.u_r(p))
    }

    pub fn du_l(&self) -> f64 {
        self.u_l_R - self.u_l_L
    }

    pub fn du_r(&self) -> f64 {
        self.u_r_R - self.u_r_L
    }

    pub fn stopping_payoffs(&self) -> StoppingPayoffs {
        let (dl, dr) = (self.delta_l(), self.delta_r());
        let p_hat = (self.u_l_L - self.u_r_L) / (dl + dr);
        StoppingPayoffs { p_hat, u_hat: self.u_l(p_hat), rho_hat: dl / (dl + dr) }
    }

    /// Bayesian cost threshold above which no experimentation occurs.
    pub fn c_bar(&self) -> f64 {
        let (a, b) = (self.delta_R(), self.delta_L());
        self.lambda * a * b / (a + b)
    }

    /// Cost threshold below which randomized stopping persists for any ambiguity.
    pub fn c_lower(&self) -> f64 {
        self.delta_r() / (self.delta_r() + self.delta_l()) * self.c_bar()
    }

    /// Law of motion absent news: `dp/dt = -lambda p (1-p)`.
    pub fn eta(&self, p: f64) -> f64 {
        -self.lambda * p * (1.0 - p)
    }

    /// Conditional value of experimenting for `tau` and then collecting `cont`
    /// unless a breakthrough (worth `u_r^R`) arrives first.
    pub fn experiment_for(&self, cont: Cond, tau: f64) -> Cond {
        let e = (-self.lambda * tau).exp();
        Cond::new(
            (1.0 - e) * (self.u_r_R - self.c / self.lambda) + e * cont.r,
            cont.l - self.c * tau,
        )
    }
}

/// Posterior after `t` units of unsuccessful experimentation.
pub fn bayes_update(p: f64, t: f64, spec: &PayoffSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("negative duration {t}")));
    }
    if p <= 0.0 || p >= 1.0 {
        return Ok(p);
    }
    let e = (-spec.lambda * t).exp();
    Ok(p * e / (p * e + 1.0 - p))
}

/// Time for a belief to drift from `p` down to `p_target`.
pub fn drift_time(p: f64, p_target: f64, spec: &PayoffSpec) -> Result<f64> {
    if p_target > p {
        return Err(Error::Domain(format!("target {p_target} lies above {p}")));
    }
    if p == p_target {
        return Ok(0.0);
    }
    Ok((llr(p) - llr(p_target)) / spec.lambda)
}

/// Prior set indexed by its upper belief and log-odds width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityInterval {
    pub p_bar: f64,
    pub delta: f64,
}

impl AmbiguityInterval {
    pub fn new(p_bar: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_bar) || !(delta >= 0.0) {
            return Err(Error::Domain(format!("bad interval p_bar={p_bar}, delta={delta}")));
        }
        Ok(AmbiguityInterval { p_bar, delta })
    }

    pub fn from_bounds(p_lower: f64, p_upper: f64) -> Result<Self> {
        if !(0.0 < p_lower && p_lower <= p_upper && p_upper < 1.0) {
            return Err(Error::Domain(format!("bad bounds [{p_lower}, {p_upper}]")));
        }
        Self::new(p_upper, (llr(p_upper) - llr(p_lower)).max(0.0))
    }

    /// Interval whose log-odds midpoint is `theta`.
    pub fn centered(theta: f64, delta: f64) -> Result<Self> {
        Self::new(sigmoid(llr(theta) + 0.5 * delta), delta)
    }

    pub fn p_lower(&self) -> f64 {
        p_lower(self.p_bar, self.delta)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.p_lower(), self.p_bar)
    }

    /// Both endpoints after `t` units of unsuccessful experimentation.
    pub fn updated(&self, t: f64, spec: &PayoffSpec) -> Result<Self> {
        Self::new(bayes_update(self.p_bar, t, spec)?, self.delta)
    }
}

/// Lower belief of the set whose upper belief is `p_bar`.
pub fn p_lower(p_bar: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return p_bar;
    }
    sigmoid(llr(p_bar) - delta)
}

/// Upper belief whose lower belief is `p_lo`.
pub fn p_upper_of(p_lo: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return p_lo;
    }
    sigmoid(llr(p_lo) + delta)
}

/// Bisection of `f(p)` in log-odds between beliefs `lo` and `hi` to `EPS_B`.
pub fn bisect_belief<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<f64> {
    numerics::bisect(|z| f(sigmoid(z)), llr(lo), llr(hi), EPS_B).map(sigmoid)
}

/// First sign change of `f(p)` scanning `n` steps over log-odds `[z_lo, z_hi]`.
pub fn first_root_llr<F: FnMut(f64) -> f64>(mut f: F, z_lo: f64, z_hi: f64, n: usize) -> Result<f64> {
    numerics::first_root(|z| f(sigmoid(z)), z_lo, z_hi, n, EPS_B).map(sigmoid)
}
