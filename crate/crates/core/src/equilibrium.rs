//! Intrapersonal equilibrium with randomized stopping.
//!
//! The state is the upper belief `p̄` of the current prior set. Going right
//! from zero the policy is: stop with l; experiment as a Bayesian would;
//! stop at a Poisson rate (flat value `V̂`); experiment until the mixing
//! band is reached; stop with r. Above the intermediate-cost threshold the
//! last experimentation band is replaced by an immediate hedged stop.

use serde::{Deserialize, Serialize};

use crate::bayesian::{BayesBenchmark, Case};
use crate::error::{Error, Result};
use crate::model::{first_root_llr, llr, p_lower, p_upper_of, sigmoid, Cond, PayoffSpec, EPS_B};

/// Ambiguity width (log-odds) above which the prior set is treated as `[0, 1]`.
pub const KNIGHTIAN_CAP: f64 = 50.0;

/// Boundary searches stop at this log-odds level (beliefs within 1e-13 of one).
const Z_MAX: f64 = 30.0;
const SCAN_STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CostRegime {
    /// `c <= c_lower`: randomized stopping for every ambiguity level.
    Low,
    /// `c_lower < c < c_bar`; `above_delta_c` selects the hedged variant.
    Intermediate { above_delta_c: bool },
    /// `c >= c_bar`: no experimentation.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    StopL,
    Bayes,
    /// Case 2 only: the atom at `p2`.
    Atom,
    Mixing,
    Experiment,
    Hedge,
    StopR,
}

impl Region {
    pub fn number(self) -> u8 {
        match self {
            Region::StopL => 1,
            Region::Bayes | Region::Atom => 2,
            Region::Mixing => 3,
            Region::Experiment | Region::Hedge => 4,
            Region::StopR => 5,
        }
    }
}

/// Stopping atom `m`, stopping rate `nu`, probability `rho` of action r given
/// a stop (`None` when the policy never stops there) and nature's belief `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub m: f64,
    pub nu: f64,
    pub rho: Option<f64>,
    pub pi: f64,
    pub region: Region,
}

/// The affine map `p -> V(p, p̄)` over the current prior set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSegment {
    pub p_lower: f64,
    pub p_upper: f64,
    pub v_at_lower: f64,
    pub v_at_upper: f64,
    pub cond: Cond,
}

impl ValueSegment {
    pub fn at(&self, p: f64) -> f64 {
        self.cond.at(p)
    }

    pub fn min(&self) -> f64 {
        self.v_at_lower.min(self.v_at_upper)
    }
}

/// Roots `u1 < u2` of `(u_r^R - u)(u_l^L - u) = (c/lambda) delta_l`.
pub fn u_roots(spec: &PayoffSpec) -> (f64, f64) {
    let mid = 0.5 * (spec.u_r_R + spec.u_l_L);
    let half = 0.5 * (spec.u_r_R - spec.u_l_L);
    let disc = (half * half + spec.c_over_lambda() * spec.delta_l()).sqrt();
    (mid - disc, mid + disc)
}

/// Flat value of the mixing band, the solution of
/// `V' = (V - u1)(V - u2) / (delta_l p (1-p))` through `(p0, v0)`.
///
/// Stored as `V = u1 + (u2 - u1) / (1 + e^s)` with `s` affine in log-odds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VHat {
    pub u1: f64,
    pub u2: f64,
    pub p0: f64,
    pub v0: f64,
    k_exp: f64,
    s0: f64,
    spec: PayoffSpec,
}

impl VHat {
    pub fn new(spec: &PayoffSpec, p0: f64, v0: f64) -> Result<Self> {
        let (u1, u2) = u_roots(spec);
        if !(u1 < v0 && v0 < u2) {
            return Err(Error::Domain(format!("boundary value {v0} outside ({u1}, {u2})")));
        }
        Ok(VHat { u1, u2, p0, v0, k_exp: (u2 - u1) / spec.delta_l(), s0: ((u2 - v0) / (v0 - u1)).ln(), spec: *spec })
    }

    fn s(&self, p: f64) -> f64 {
        self.s0 + self.k_exp * (llr(p) - llr(self.p0))
    }

    pub fn value(&self, p: f64) -> f64 {
        self.u1 + (self.u2 - self.u1) * sigmoid(-self.s(p))
    }

    pub fn deriv(&self, p: f64) -> f64 {
        let v = self.value(p);
        (v - self.u1) * (v - self.u2) / (self.spec.delta_l() * p * (1.0 - p))
    }

    /// Integration constant `C` of the form `V = (C u1 + X u2)/(X + C)`, `X = ((1-p)/p)^((u2-u1)/delta_l)`.
    pub fn c_coef(&self) -> f64 {
        (self.s0 - self.k_exp * llr(self.p0)).exp()
    }

    /// Belief at which the band value equals `v`.
    pub fn inverse(&self, v: f64) -> Option<f64> {
        if !(self.u1 < v && v < self.u2) {
            return None;
        }
        let s = llr((self.u2 - v) / (self.u2 - self.u1));
        Some(sigmoid(llr(self.p0) + (s - self.s0) / self.k_exp))
    }

    /// Stopping rate keeping nature indifferent.
    pub fn nu(&self, p: f64) -> f64 {
        self.spec.lambda * (self.spec.u_r_R - self.value(p)) / self.spec.delta_l()
    }

    /// Nature's belief keeping the decision maker indifferent: `U_l(pi) = V̂`.
    pub fn pi(&self, p: f64) -> f64 {
        (self.spec.u_l_L - self.value(p)) / self.spec.delta_l()
    }
}

/// Stationary solution for the prior set `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knightian {
    pub hedged: bool,
    pub u_tilde: f64,
    pub nu_tilde: f64,
    pub p_tilde: f64,
    pub rho_hat: f64,
}

impl Knightian {
    pub fn point(&self) -> PolicyPoint {
        if self.hedged {
            PolicyPoint { m: 1.0, nu: 0.0, rho: Some(self.rho_hat), pi: self.p_tilde, region: Region::Hedge }
        } else {
            PolicyPoint { m: 0.0, nu: self.nu_tilde, rho: Some(0.0), pi: self.p_tilde, region: Region::Mixing }
        }
    }

    pub fn value(&self) -> f64 {
        self.u_tilde
    }
}

pub fn knightian(spec: &PayoffSpec) -> Knightian {
    let sp = spec.stopping_payoffs();
    if spec.c >= spec.c_lower() {
        return Knightian { hedged: true, u_tilde: sp.u_hat, nu_tilde: 0.0, p_tilde: sp.p_hat, rho_hat: sp.rho_hat };
    }
    let (u1, _) = u_roots(spec);
    Knightian {
        hedged: false,
        u_tilde: u1,
        nu_tilde: spec.lambda * (spec.u_r_R - u1) / spec.delta_l(),
        p_tilde: (spec.u_l_L - u1) / spec.delta_l(),
        rho_hat: sp.rho_hat,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub spec: PayoffSpec,
    pub delta: f64,
    pub bayes: BayesBenchmark,
    pub case: Case,
    pub regime: CostRegime,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub u1: f64,
    pub u2: f64,
    pub c_coef: f64,
    pub v_dstar: f64,
    pub p_dstar: f64,
    pub m_atom_p2: f64,
    pub delta_c: f64,
    /// Whether the mixing band `(p2, p3)` is non-empty.
    pub mixing: bool,
    /// Region 4 is the immediate hedged stop `(1, 0, rho_hat)`.
    pub hedge_band: bool,
    pub knightian: Option<Knightian>,
    pub vhat: Option<VHat>,
    /// Conditional values collected when the state reaches `p3` from the right.
    pub cont3: Cond,
}

pub fn solve(spec: &PayoffSpec, delta: f64) -> Result<EquilibriumSolution> {
    solve_with_cap(spec, delta, KNIGHTIAN_CAP)
}

pub fn solve_with_cap(spec: &PayoffSpec, delta: f64, cap: f64) -> Result<EquilibriumSolution> {
    spec.validate()?;
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("ambiguity width must be non-negative, got {delta}")));
    }
    let b = BayesBenchmark::new(spec);
    let sp = spec.stopping_payoffs();
    let (u1, u2) = u_roots(spec);
    let mut sol = EquilibriumSolution {
        spec: *spec,
        delta,
        bayes: b,
        case: b.case,
        regime: CostRegime::High,
        p1: sp.p_hat,
        p2: sp.p_hat,
        p3: sp.p_hat,
        p4: p_upper_of(sp.p_hat, delta),
        u1,
        u2,
        c_coef: f64::NAN,
        v_dstar: sp.u_hat,
        p_dstar: sp.p_hat,
        m_atom_p2: 0.0,
        delta_c: 0.0,
        mixing: false,
        hedge_band: true,
        knightian: None,
        vhat: None,
        cont3: spec.cond_rho(sp.rho_hat),
    };
    if delta > cap {
        sol.knightian = Some(knightian(spec));
        sol.regime = regime_of(spec, &b, false);
        return Ok(sol);
    }
    if !b.experiments() {
        return Ok(sol);
    }

    let (p1, p2) = (b.p_l_B, b.p_star);
    let phi2 = b.phi(p2);
    let vhat = VHat::new(spec, p2, phi2)?;
    let delta_c = if spec.c <= spec.c_lower() {
        f64::INFINITY
    } else {
        let p3p = vhat.inverse(sp.u_hat).ok_or_else(|| Error::NoRoot("band never reaches u_hat".into()))?;
        llr(p3p) - llr(sp.p_hat)
    };
    sol.regime = regime_of(spec, &b, delta > delta_c);
    sol.p1 = p1;
    sol.p2 = p2;
    sol.c_coef = vhat.c_coef();
    sol.delta_c = delta_c;
    sol.vhat = Some(vhat);
    sol.hedge_band = false;
    if b.case == Case::Case2 {
        let d = b.phi_prime(p2);
        sol.m_atom_p2 = -d / (spec.du_r() - d);
    }
    sol.mixing = phi2 < spec.u_l(p_lower(p2, delta));

    if delta > delta_c {
        sol.hedge_band = true;
        sol.p3 = vhat.inverse(sp.u_hat).unwrap();
        sol.v_dstar = sp.u_hat;
        sol.p4 = p_upper_of(sp.p_hat, delta);
        sol.cont3 = spec.cond_rho(sp.rho_hat);
        sol.p_dstar = f64::NAN;
        return Ok(sol);
    }

    if sol.mixing {
        let z2 = llr(p2);
        sol.p3 = first_root_llr(
            |p| vhat.value(p) - spec.u_l(p_lower(p, delta)),
            z2,
            Z_MAX.max(z2 + 1.0),
            SCAN_STEPS,
        )?;
        sol.v_dstar = vhat.value(sol.p3);
        sol.cont3 = Cond::flat(sol.v_dstar);
    } else {
        sol.p3 = p2;
        sol.v_dstar = phi2;
        sol.cont3 = if b.case == Case::Case1 { b.tangent(p2) } else { Cond::flat(phi2) };
    }
    sol.p_dstar = if sol.mixing || b.case == Case::Case2 {
        p_lower(sol.p3, delta).max(spec.c_over_lambda() / (spec.u_r_R - sol.v_dstar))
    } else {
        p2
    };
    sol.p4 = if delta == 0.0 { b.p_r_B } else { sol.find_p4()? };
    Ok(sol)
}

fn regime_of(spec: &PayoffSpec, b: &BayesBenchmark, above: bool) -> CostRegime {
    if !b.experiments() {
        CostRegime::High
    } else if spec.c <= spec.c_lower() {
        CostRegime::Low
    } else {
        CostRegime::Intermediate { above_delta_c: above }
    }
}

impl EquilibriumSolution {
    fn region4_cond(&self, p_bar: f64) -> Cond {
        let tau = ((llr(p_bar) - llr(self.p3)) / self.spec.lambda).max(0.0);
        self.spec.experiment_for(self.cont3, tau)
    }

    fn find_p4(&self) -> Result<f64> {
        let spec = &self.spec;
        let gap = |p: f64| {
            let lo = p_lower(p, self.delta);
            self.region4_cond(p).at(lo) - spec.u_r(lo)
        };
        let z3 = llr(self.p3);
        if gap(self.p3) <= 1e-12 && gap(sigmoid(z3 + 1e-7)) <= 0.0 {
            return Ok(self.p3);
        }
        first_root_llr(gap, z3 + 1e-7, Z_MAX.max(z3 + 1.0), SCAN_STEPS)
    }

    pub fn p_lower(&self, p_bar: f64) -> f64 {
        p_lower(p_bar, self.delta)
    }

    pub fn region(&self, p_bar: f64) -> Region {
        if let Some(k) = self.knightian {
            return k.point().region;
        }
        let z = llr(p_bar);
        let (z1, z2, z3, z4) = (llr(self.p1), llr(self.p2), llr(self.p3), llr(self.p4));
        if z <= z1 + EPS_B {
            Region::StopL
        } else if z < z2 - EPS_B {
            Region::Bayes
        } else if z >= z4 - EPS_B {
            Region::StopR
        } else if z <= z2 + EPS_B {
            if self.case == Case::Case2 {
                Region::Atom
            } else {
                Region::Bayes
            }
        } else if z < z3 - EPS_B {
            Region::Mixing
        } else if self.hedge_band {
            Region::Hedge
        } else {
            Region::Experiment
        }
    }

    pub fn policy(&self, p_bar: f64) -> PolicyPoint {
        if let Some(k) = self.knightian {
            return k.point();
        }
        let lo = self.p_lower(p_bar);
        let region = self.region(p_bar);
        let (m, nu, rho, pi) = match region {
            Region::StopL => (1.0, 0.0, Some(0.0), p_bar),
            Region::Bayes => (0.0, 0.0, None, p_bar),
            Region::Atom => (self.m_atom_p2, 0.0, Some(1.0), p_bar),
            Region::Mixing => {
                let v = self.vhat.as_ref().unwrap();
                (0.0, v.nu(p_bar), Some(0.0), v.pi(p_bar))
            }
            Region::Experiment => (0.0, 0.0, None, lo),
            Region::Hedge => (1.0, 0.0, Some(self.spec.stopping_payoffs().rho_hat), self.spec.stopping_payoffs().p_hat),
            Region::StopR => (1.0, 0.0, Some(1.0), lo),
        };
        PolicyPoint { m, nu, rho, pi, region }
    }

    /// Conditional values `(V_R, V_L)` of the equilibrium strategy at `p̄`.
    pub fn cond_values(&self, p_bar: f64) -> Cond {
        self.cond_values_in(self.region(p_bar), p_bar)
    }

    /// Region reached when the state approaches `p̄` from below.
    pub fn region_left(&self, p_bar: f64) -> Region {
        self.region(sigmoid(llr(p_bar) - 2.0 * EPS_B))
    }

    /// Conditional values at `p̄` using the formula of `region`.
    pub fn cond_values_in(&self, region: Region, p_bar: f64) -> Cond {
        if let Some(k) = self.knightian {
            return Cond::flat(k.value());
        }
        let spec = &self.spec;
        match region {
            Region::StopL => spec.cond_l(),
            Region::Bayes => self.bayes.tangent(p_bar),
            Region::Atom => Cond::flat(self.bayes.phi(self.p2)),
            Region::Mixing => Cond::flat(self.vhat.as_ref().unwrap().value(p_bar)),
            Region::Experiment => self.region4_cond(p_bar),
            Region::Hedge => spec.cond_rho(spec.stopping_payoffs().rho_hat),
            Region::StopR => spec.cond_r(),
        }
    }

    /// Derivatives of the conditional values in the state.
    pub fn cond_derivs(&self, p_bar: f64) -> Cond {
        self.cond_derivs_in(self.region(p_bar), p_bar)
    }

    pub fn cond_derivs_in(&self, region: Region, p_bar: f64) -> Cond {
        if self.knightian.is_some() {
            return Cond::flat(0.0);
        }
        let spec = &self.spec;
        match region {
            Region::Bayes => {
                let d2 = self.bayes.phi_second(p_bar);
                Cond::new((1.0 - p_bar) * d2, -p_bar * d2)
            }
            Region::Mixing => Cond::flat(self.vhat.as_ref().unwrap().deriv(p_bar)),
            Region::Experiment => {
                let w = p_bar * (1.0 - p_bar);
                let tau = (llr(p_bar) - llr(self.p3)) / spec.lambda;
                let e = (-spec.lambda * tau).exp();
                Cond::new(
                    -e / w * (self.cont3.r + spec.c_over_lambda() - spec.u_r_R),
                    -spec.c_over_lambda() / w,
                )
            }
            _ => Cond::flat(0.0),
        }
    }

    pub fn value_segment(&self, p_bar: f64) -> ValueSegment {
        let cond = self.cond_values(p_bar);
        let lo = self.p_lower(p_bar);
        ValueSegment { p_lower: lo, p_upper: p_bar, v_at_lower: cond.at(lo), v_at_upper: cond.at(p_bar), cond }
    }

    /// Worst-case value `V(pi(p̄), p̄)`.
    pub fn value(&self, p_bar: f64) -> f64 {
        self.value_segment(p_bar).min()
    }

    /// `(V̂, nu*, pi*)` inside the mixing band.
    pub fn region3_value(&self, p_bar: f64) -> Result<(f64, f64, f64)> {
        match (self.vhat, self.region(p_bar)) {
            (Some(v), Region::Mixing) => Ok((v.value(p_bar), v.nu(p_bar), v.pi(p_bar))),
            _ => Err(Error::Region { region: "(p2, p3)", state: p_bar }),
        }
    }

    pub fn region4_value(&self, p_bar: f64) -> Result<ValueSegment> {
        match self.region(p_bar) {
            Region::Experiment => Ok(self.value_segment(p_bar)),
            _ => Err(Error::Region { region: "[p3, p4)", state: p_bar }),
        }
    }

    /// Boundaries `[p1, p2, p3, p4]`.
    pub fn boundaries(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }
}

/// First state above `p_star` at which a decision maker restricted to pure
/// strategies stops with l: the tangent to `Phi` at `p̄`, evaluated at the
/// lower belief, drops to `U_l(p̄)`.
pub fn pure_strategy_stop_state(spec: &PayoffSpec, delta: f64) -> Result<f64> {
    if spec.u_r_R != spec.u_l_L || spec.u_l_R != spec.u_r_L {
        return Err(Error::Unsupported("pure-strategy stop state needs symmetric payoffs".into()));
    }
    let b = BayesBenchmark::new(spec);
    match b.case {
        Case::NoExperimentation => return Err(Error::NoExperimentation),
        Case::Case2 => return Err(Error::Unsupported("needs an interior Bayesian minimiser".into())),
        Case::Case1 => {}
    }
    let f = |p: f64| {
        let lo = p_lower(p, delta);
        b.phi(p) + b.phi_prime(p) * (lo - p) - spec.u_l(p)
    };
    first_root_llr(f, llr(b.p_star), Z_MAX, 20 * SCAN_STEPS).map_err(|_| Error::NoPreemptiveStop)
}
