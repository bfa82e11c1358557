//! Stopping behaviour induced by an equilibrium: stopping-time laws along
//! the deterministic no-news path, expected learning time, Monte Carlo
//! paths and the naive-planner comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::bayesian::Case;
use crate::equilibrium::{solve, CostRegime, EquilibriumSolution, Region, VHat};
use crate::error::{Error, Result};
use crate::model::{llr, sigmoid, AmbiguityInterval, PayoffSpec, EPS_B};
use crate::numerics::{dopri, gauss_legendre, integrate};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Omega {
    L,
    R,
}

/// What the stopping law is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Conditioning {
    State(Omega),
    /// Mixture with probability `theta` on state R.
    Prior(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    L,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    /// Mixing-band rate evaluated at the current state.
    Band(VHat),
    Const(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardSegment {
    pub t0: f64,
    pub t1: f64,
    pub rate: Rate,
}

/// Stop with probability `mass` among paths still running at `t`; action r
/// with probability `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub mass: f64,
    pub rho: f64,
}

/// Stopping law given the true state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub omega: Omega,
    /// Breakthrough hazard: `lambda` in state R, zero in state L.
    pub breakthrough: f64,
    pub segments: Vec<HazardSegment>,
    pub atoms: Vec<Atom>,
    z0: f64,
    lambda: f64,
}

impl Branch {
    fn rate_at(&self, seg: &HazardSegment, t: f64) -> f64 {
        match seg.rate {
            Rate::Const(v) => v,
            Rate::Band(v) => v.nu(sigmoid(self.z0 - self.lambda * t)),
        }
    }

    /// Integrated policy hazard `∫_0^t nu`.
    pub fn cum_hazard(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for seg in &self.segments {
            if t <= seg.t0 {
                break;
            }
            let hi = t.min(seg.t1);
            total += match seg.rate {
                Rate::Const(v) => v * (hi - seg.t0),
                Rate::Band(_) => gauss_legendre(|s| self.rate_at(seg, s), seg.t0, hi, 4),
            };
        }
        total
    }

    /// Hazard (policy plus breakthrough) at `t`, excluding atoms.
    pub fn hazard(&self, t: f64) -> f64 {
        let nu = self.segments.iter().find(|s| s.t0 <= t && t < s.t1).map_or(0.0, |s| self.rate_at(s, t));
        nu + self.breakthrough
    }

    fn atom_factor(&self, t: f64, inclusive: bool) -> f64 {
        self.atoms
            .iter()
            .filter(|a| if inclusive { a.t <= t } else { a.t < t })
            .map(|a| 1.0 - a.mass)
            .product()
    }

    /// `P(T > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        (-(self.breakthrough * t) - self.cum_hazard(t)).exp() * self.atom_factor(t, true)
    }

    /// `P(T >= t)`.
    pub fn survival_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-(self.breakthrough * t) - self.cum_hazard(t)).exp() * self.atom_factor(t, false)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    pub fn cdf_left(&self, t: f64) -> f64 {
        1.0 - self.survival_left(t)
    }

    /// Time of the atom that stops every remaining path, if any.
    pub fn terminal_time(&self) -> Option<f64> {
        self.atoms.iter().find(|a| a.mass >= 1.0).map(|a| a.t)
    }

    /// Expected stopping time `∫ S(t) dt`.
    pub fn mean(&self) -> f64 {
        let mut cuts: Vec<f64> = vec![0.0];
        for s in &self.segments {
            cuts.push(s.t0);
            if s.t1.is_finite() {
                cuts.push(s.t1);
            }
        }
        cuts.extend(self.atoms.iter().map(|a| a.t));
        let end = self.terminal_time();
        if let Some(e) = end {
            cuts.retain(|&c| c <= e);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += integrate(|t| self.survival_left(t), w[0], w[1], 1e-13);
        }
        let last = *cuts.last().unwrap();
        if end.is_none() {
            // Beyond the last break the hazard is constant.
            let h = self.hazard(last);
            if h <= 0.0 {
                return f64::INFINITY;
            }
            total += self.survival(last) / h;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingDistribution {
    pub conditioning: Conditioning,
    pub r: Branch,
    pub l: Branch,
}

impl StoppingDistribution {
    fn weight_r(&self) -> f64 {
        match self.conditioning {
            Conditioning::State(Omega::R) => 1.0,
            Conditioning::State(Omega::L) => 0.0,
            Conditioning::Prior(theta) => theta,
        }
    }

    fn mix(&self, f: impl Fn(&Branch) -> f64) -> f64 {
        let w = self.weight_r();
        let mut v = 0.0;
        if w > 0.0 {
            v += w * f(&self.r);
        }
        if w < 1.0 {
            v += (1.0 - w) * f(&self.l);
        }
        v
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.mix(|b| b.cdf(t))
    }

    pub fn cdf_left(&self, t: f64) -> f64 {
        self.mix(|b| b.cdf_left(t))
    }

    pub fn mean(&self) -> f64 {
        self.mix(Branch::mean)
    }

    /// Latest finite event time (terminal atom or last segment end).
    pub fn horizon(&self) -> f64 {
        let h = |b: &Branch| {
            let mut m = b.atoms.iter().map(|a| a.t).fold(0.0, f64::max);
            for s in &b.segments {
                m = m.max(if s.t1.is_finite() { s.t1 } else { s.t0 });
            }
            m
        };
        h(&self.r).max(h(&self.l))
    }
}

fn branch(sol: &EquilibriumSolution, p_bar0: f64, omega: Omega) -> Branch {
    let spec = &sol.spec;
    let z0 = llr(p_bar0);
    let time_to = |p: f64| ((z0 - llr(p)) / spec.lambda).max(0.0);
    let mut b = Branch {
        omega,
        breakthrough: if omega == Omega::R { spec.lambda } else { 0.0 },
        segments: Vec::new(),
        atoms: Vec::new(),
        z0,
        lambda: spec.lambda,
    };
    let rho_hat = spec.stopping_payoffs().rho_hat;
    if let Some(k) = sol.knightian {
        if k.hedged {
            b.atoms.push(Atom { t: 0.0, mass: 1.0, rho: rho_hat });
        } else {
            b.segments.push(HazardSegment { t0: 0.0, t1: f64::INFINITY, rate: Rate::Const(k.nu_tilde) });
        }
        return b;
    }
    let region = sol.region(p_bar0);
    let case2_atom = |b: &mut Branch, t: f64| {
        if sol.case == Case::Case2 {
            b.atoms.push(Atom { t, mass: sol.m_atom_p2, rho: 1.0 });
        }
    };
    match region {
        Region::StopL => b.atoms.push(Atom { t: 0.0, mass: 1.0, rho: 0.0 }),
        Region::StopR => b.atoms.push(Atom { t: 0.0, mass: 1.0, rho: 1.0 }),
        Region::Hedge => b.atoms.push(Atom { t: 0.0, mass: 1.0, rho: rho_hat }),
        Region::Atom => case2_atom(&mut b, 0.0),
        Region::Bayes => {}
        Region::Mixing | Region::Experiment => {
            let t2 = time_to(sol.p2);
            if sol.mixing {
                let t3 = if region == Region::Mixing { 0.0 } else { time_to(sol.p3) };
                b.segments.push(HazardSegment { t0: t3, t1: t2, rate: Rate::Band(sol.vhat.unwrap()) });
            }
            case2_atom(&mut b, t2);
        }
    }
    if matches!(region, Region::Atom | Region::Bayes | Region::Mixing | Region::Experiment) {
        b.atoms.push(Atom { t: time_to(sol.p1), mass: 1.0, rho: 0.0 });
    }
    b
}

/// Stopping-time law of the equilibrium started from state `p_bar0`.
pub fn stopping_cdf(sol: &EquilibriumSolution, p_bar0: f64, conditioning: Conditioning) -> Result<StoppingDistribution> {
    if !(0.0 < p_bar0 && p_bar0 < 1.0) {
        return Err(Error::Domain(format!("initial state {p_bar0} outside (0, 1)")));
    }
    Ok(StoppingDistribution {
        conditioning,
        r: branch(sol, p_bar0, Omega::R),
        l: branch(sol, p_bar0, Omega::L),
    })
}

/// Stopping-time law of a decision maker who at every instant follows the
/// current maxmin commitment plan without anticipating later revisions.
pub fn naive_cdf(sol: &EquilibriumSolution, p_bar0: f64, conditioning: Conditioning) -> Result<StoppingDistribution> {
    if !(0.0 < p_bar0 && p_bar0 < 1.0) {
        return Err(Error::Domain(format!("initial state {p_bar0} outside (0, 1)")));
    }
    let b = &sol.bayes;
    let spec = &sol.spec;
    let lo = sol.p_lower(p_bar0);
    if b.case == Case::Case2 && sol.delta > 0.0 && lo <= b.p_star && b.p_star <= p_bar0 {
        return Err(Error::Unsupported("naive plan randomizes continuously at the Case-2 kink".into()));
    }
    let z0 = llr(p_bar0);
    let make = |omega: Omega| {
        let mut br = Branch {
            omega,
            breakthrough: if omega == Omega::R { spec.lambda } else { 0.0 },
            segments: Vec::new(),
            atoms: Vec::new(),
            z0,
            lambda: spec.lambda,
        };
        let atom = if !b.experiments() {
            let sp = spec.stopping_payoffs();
            let rho = if p_bar0 <= sp.p_hat { 0.0 } else if lo >= sp.p_hat { 1.0 } else { sp.rho_hat };
            Atom { t: 0.0, mass: 1.0, rho }
        } else if p_bar0 <= b.p_l_B {
            Atom { t: 0.0, mass: 1.0, rho: 0.0 }
        } else if lo >= b.p_r_B {
            Atom { t: 0.0, mass: 1.0, rho: 1.0 }
        } else {
            Atom { t: (z0 - llr(b.p_l_B)) / spec.lambda, mass: 1.0, rho: 0.0 }
        };
        br.atoms.push(atom);
        br
    };
    Ok(StoppingDistribution { conditioning, r: make(Omega::R), l: make(Omega::L) })
}

/// Kolmogorov-Smirnov distance between a sample and a law with atoms.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        d = d.max((cdf_left(x) - i as f64 / n).abs());
        d = d.max((cdf(x) - j as f64 / n).abs());
        i = j;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub stop_time: f64,
    pub action: Action,
    pub breakthrough: bool,
    pub omega: Omega,
    pub seed: u64,
    pub index: u64,
}

/// Monte Carlo paths of the equilibrium started at `p_bar0`, with the true
/// state drawn as R with probability `theta_true`. Each path owns a ChaCha8
/// stream keyed by `(seed, index)`.
pub fn simulate(sol: &EquilibriumSolution, p_bar0: f64, theta_true: f64, n_paths: usize, seed: u64) -> Result<Vec<TrajectorySample>> {
    simulate_with(sol, p_bar0, theta_true, n_paths, seed, Exec::default())
}

pub fn simulate_with(
    sol: &EquilibriumSolution,
    p_bar0: f64,
    theta_true: f64,
    n_paths: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<TrajectorySample>> {
    if n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    if !(0.0 < p_bar0 && p_bar0 < 1.0) || !(0.0..=1.0).contains(&theta_true) {
        return Err(Error::Domain(format!("bad initial state {p_bar0} or theta {theta_true}")));
    }
    let plan = PathPlan::new(sol, p_bar0);
    Ok(exec.map(n_paths, |i| plan.run(sol, theta_true, seed, i as u64)))
}

/// Deterministic schedule shared by all paths from one initial state.
struct PathPlan {
    z0: f64,
    nu_max: f64,
    t_terminal: f64,
    case2_atom: Option<(f64, f64)>,
}

impl PathPlan {
    fn new(sol: &EquilibriumSolution, p_bar0: f64) -> Self {
        let spec = &sol.spec;
        let z0 = llr(p_bar0);
        // nu = lambda (u_r^R - V) / delta_l and every band value exceeds u1.
        let nu_bound = spec.lambda * (spec.u_r_R - sol.u1) / spec.delta_l();
        if sol.knightian.is_some() {
            return PathPlan { z0, nu_max: nu_bound, t_terminal: f64::INFINITY, case2_atom: None };
        }
        let time_to = |p: f64| (z0 - llr(p)) / spec.lambda;
        let case2_atom = (sol.case == Case::Case2 && z0 > llr(sol.p2) + EPS_B).then(|| (time_to(sol.p2), sol.m_atom_p2));
        PathPlan {
            z0,
            nu_max: if sol.mixing { nu_bound } else { 0.0 },
            t_terminal: time_to(sol.p1).max(0.0),
            case2_atom,
        }
    }

    fn run(&self, sol: &EquilibriumSolution, theta_true: f64, seed: u64, index: u64) -> TrajectorySample {
        let lambda = sol.spec.lambda;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let omega = if rng.random::<f64>() < theta_true { Omega::R } else { Omega::L };
        let t_break = if omega == Omega::R { Exp::new(lambda).unwrap().sample(&mut rng) } else { f64::INFINITY };
        let done = |t: f64, action: Action, breakthrough: bool| TrajectorySample { stop_time: t, action, breakthrough, omega, seed, index };
        let pick = |rng: &mut ChaCha8Rng, rho: Option<f64>| {
            if rng.random::<f64>() < rho.unwrap_or(0.0) {
                Action::R
            } else {
                Action::L
            }
        };

        let start = sol.policy(sigmoid(self.z0));
        if start.m > 0.0 && rng.random::<f64>() < start.m {
            return done(0.0, pick(&mut rng, start.rho), false);
        }
        let proposals = (self.nu_max > 0.0).then(|| Exp::new(self.nu_max).unwrap());
        let mut atom = self.case2_atom;
        let mut t = 0.0;
        loop {
            let next = proposals.as_ref().map_or(f64::INFINITY, |e| t + e.sample(&mut rng));
            let t_atom = atom.map_or(f64::INFINITY, |a| a.0);
            let first = next.min(t_break).min(t_atom).min(self.t_terminal);
            if t_break == first {
                return done(t_break, Action::R, true);
            }
            if t_atom == first {
                let (ta, m) = atom.take().unwrap();
                if rng.random::<f64>() < m {
                    return done(ta, Action::R, false);
                }
                t = ta;
                continue;
            }
            if self.t_terminal == first {
                return done(self.t_terminal, Action::L, false);
            }
            t = next;
            let pp = sol.policy(sigmoid(self.z0 - lambda * t));
            if rng.random::<f64>() * self.nu_max < pp.nu {
                return done(t, pick(&mut rng, pp.rho), false);
            }
        }
    }
}

/// Whether the learning-time recursion applies: low cost and an interior
/// Bayesian minimiser.
pub fn learning_time_in_scope(sol: &EquilibriumSolution) -> bool {
    sol.knightian.is_none() && sol.regime == CostRegime::Low && sol.case == Case::Case1
}

/// Expected experimentation length for the prior set of width `delta`
/// centred (in log-odds) at `theta`.
pub fn expected_learning_time(spec: &PayoffSpec, delta: f64, theta: f64) -> Result<f64> {
    let sol = solve(spec, delta)?;
    Ok(learning_time_curve(&sol, &[theta])?[0])
}

/// Expected learning time on a grid of centres, by integrating
/// `lambda θ(1-θ) T' = 1 - T (θ lambda + nu(θ))` rightward from `T(θ1) = 0`.
pub fn learning_time_curve(sol: &EquilibriumSolution, thetas: &[f64]) -> Result<Vec<f64>> {
    if !learning_time_in_scope(sol) {
        return Err(Error::Unsupported("learning-time recursion needs c <= c_lower and Case 1".into()));
    }
    let spec = sol.spec;
    let half = 0.5 * sol.delta;
    let centre = |p: f64| sigmoid(llr(p) - half);
    let th = [centre(sol.p1), centre(sol.p2), centre(sol.p3), centre(sol.p4)];
    let vhat = sol.vhat;
    let mut out = vec![0.0; thetas.len()];
    let mut order: Vec<usize> = (0..thetas.len()).filter(|&i| th[0] < thetas[i] && thetas[i] < th[3]).collect();
    order.sort_by(|&a, &b| thetas[a].total_cmp(&thetas[b]));

    let mut t_val = 0.0;
    let mut k = 0;
    for piece in 0..3 {
        let (a, b) = (th[piece], th[piece + 1]);
        if b <= a {
            continue;
        }
        let band = piece == 1 && sol.mixing;
        let rhs = |x: f64, y: &[f64; 1]| {
            let nu = if band { vhat.unwrap().nu(sigmoid(llr(x) + half)) } else { 0.0 };
            [(1.0 - y[0] * (x * spec.lambda + nu)) / (spec.lambda * x * (1.0 - x))]
        };
        let mut xs = Vec::new();
        let first = k;
        while k < order.len() && thetas[order[k]] <= b {
            xs.push(thetas[order[k]]);
            k += 1;
        }
        xs.push(b);
        let ys = dopri(rhs, a, [t_val], &xs, 1e-11, 1e-13)?;
        for (j, idx) in order[first..k].iter().enumerate() {
            out[*idx] = ys[j][0];
        }
        t_val = ys.last().unwrap()[0];
    }
    Ok(out)
}

/// Knightian expected learning time `θ/(lambda + ν̃) + (1-θ)/ν̃`.
pub fn knightian_learning_time(spec: &PayoffSpec, theta: f64) -> Result<f64> {
    let k = crate::equilibrium::knightian(spec);
    if k.hedged {
        return Ok(0.0);
    }
    Ok(theta / (spec.lambda + k.nu_tilde) + (1.0 - theta) / k.nu_tilde)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub t_hat: Option<f64>,
    pub sign_changes: usize,
    pub verdict: bool,
    pub max_gap: f64,
}

/// Compares the ω = L stopping laws from two nested prior sets `P ⊆ Q` on a
/// 10⁴-point time grid and counts sign changes of `F_Q - F_P`.
pub fn single_crossing_check(spec: &PayoffSpec, p: &AmbiguityInterval, q: &AmbiguityInterval) -> Result<CrossingReport> {
    let b = crate::bayesian::BayesBenchmark::new(spec);
    if spec.c > spec.c_lower() || b.case != Case::Case1 {
        return Err(Error::Unsupported("single crossing is stated for c <= c_lower and Case 1".into()));
    }
    let (pl, pu) = p.bounds();
    let (ql, qu) = q.bounds();
    if llr(ql) > llr(pl) + EPS_B || llr(pu) > llr(qu) + EPS_B {
        return Err(Error::Domain("P must be contained in Q".into()));
    }
    let fp = stopping_cdf(&solve(spec, p.delta)?, p.p_bar, Conditioning::State(Omega::L))?;
    let fq = stopping_cdf(&solve(spec, q.delta)?, q.p_bar, Conditioning::State(Omega::L))?;
    let horizon = 1.05 * fp.horizon().max(fq.horizon()).max(1e-9);
    let n = 10_000;
    let mut sign = 0i8;
    let mut changes = 0;
    let mut t_hat = None;
    let mut first_sign = 0i8;
    let mut max_gap: f64 = 0.0;
    for i in 0..n {
        let t = horizon * i as f64 / (n - 1) as f64;
        let d = fq.cdf(t) - fp.cdf(t);
        max_gap = max_gap.max(d.abs());
        if d.abs() <= 1e-9 {
            continue;
        }
        let s = if d > 0.0 { 1 } else { -1 };
        if sign == 0 {
            first_sign = s;
        } else if s != sign {
            changes += 1;
            t_hat.get_or_insert(t);
        }
        sign = s;
    }
    let verdict = changes == 0 || (changes == 1 && first_sign > 0);
    Ok(CrossingReport { t_hat, sign_changes: changes, verdict, max_gap })
}
