//! Independent checks of a solved equilibrium.
//!
//! * [`value_by_quadrature`] integrates the payoff of the policy along the
//!   no-news path using nothing but `policy` queries.
//! * [`hjb_residual`] evaluates the saddle-point functional `G` at the
//!   equilibrium controls and over control and nature grids.
//! * [`discrete_saddle_solve`] runs backward induction on a discrete-time
//!   game in which each self commits for one step of length `dt`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumSolution, PolicyPoint, Region};
use crate::error::{Error, Result};
use crate::model::{llr, sigmoid, Cond, PayoffSpec};
use crate::numerics::{gauss_legendre, integrate};
use crate::par::Exec;

/// Conditional payoff of the policy started at state `p_bar0`, computed by
/// quadrature of the stopping hazard along the deterministic path.
pub fn conditional_values_by_quadrature(sol: &EquilibriumSolution, p_bar0: f64) -> Cond {
    let spec = &sol.spec;
    let lam = spec.lambda;
    let z0 = llr(p_bar0);
    let state_at = |t: f64| sigmoid(z0 - lam * t);

    let mut breaks: Vec<f64> = Vec::new();
    for b in [sol.p4, sol.p3, sol.p2, sol.p1] {
        let zb = llr(b);
        if zb < z0 && sol.knightian.is_none() {
            breaks.push((z0 - zb) / lam);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let stop_cond = |rho: Option<f64>| spec.cond_rho(rho.unwrap_or(0.0));
    // Survival in each state excluding the breakthrough factor, and the
    // accumulated conditional payoffs.
    let (mut s_r, mut s_l) = (1.0, 1.0);
    let (mut acc_r, mut acc_l) = (0.0, 0.0);
    let mut t_prev = 0.0;

    let apply_atom = |pp: PolicyPoint, t: f64, s_r: &mut f64, s_l: &mut f64, acc_r: &mut f64, acc_l: &mut f64| {
        if pp.m > 0.0 {
            let u = stop_cond(pp.rho);
            let decay = (-lam * t).exp();
            *acc_r += *s_r * decay * pp.m * u.r;
            *acc_l += *s_l * pp.m * u.l;
            *s_r *= 1.0 - pp.m;
            *s_l *= 1.0 - pp.m;
        }
    };

    apply_atom(sol.policy(p_bar0), 0.0, &mut s_r, &mut s_l, &mut acc_r, &mut acc_l);

    let horizon = match sol.knightian {
        Some(k) if k.point().nu > 0.0 => 37.0 / k.point().nu,
        Some(_) => 0.0,
        None => *breaks.last().unwrap_or(&0.0),
    };
    let mut ends = breaks.clone();
    if sol.knightian.is_some() {
        ends.push(horizon);
    }

    for &t_next in &ends {
        if s_r == 0.0 && s_l == 0.0 {
            break;
        }
        if t_next > t_prev {
            let mid = sol.policy(state_at(0.5 * (t_prev + t_next)));
            let u = stop_cond(mid.rho);
            let nu_at = |s: f64| sol.policy(state_at(s)).nu;
            let t0 = t_prev;
            let cum = |s: f64| if s <= t0 { 0.0 } else { gauss_legendre(nu_at, t0, s, 2) };
            let f_r = |s: f64| {
                let surv = (-lam * s - cum(s)).exp();
                surv * (nu_at(s) * u.r + lam * spec.u_r_R - spec.c)
            };
            let f_l = |s: f64| {
                let surv = (-cum(s)).exp();
                surv * (nu_at(s) * u.l - spec.c)
            };
            acc_r += s_r * integrate(f_r, t_prev, t_next, 1e-12);
            acc_l += s_l * integrate(f_l, t_prev, t_next, 1e-12);
            let h = cum(t_next);
            s_r *= (-h).exp();
            s_l *= (-h).exp();
        }
        if sol.knightian.is_none() {
            apply_atom(sol.policy(state_at(t_next)), t_next, &mut s_r, &mut s_l, &mut acc_r, &mut acc_l);
        }
        t_prev = t_next;
    }
    Cond::new(acc_r, acc_l)
}

/// Expected payoff under belief `p` of following the policy from `p_bar0`.
pub fn value_by_quadrature(sol: &EquilibriumSolution, p: f64, p_bar0: f64) -> f64 {
    conditional_values_by_quadrature(sol, p_bar0).at(p)
}

/// Saddle-point diagnostics at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    pub p_bar: f64,
    pub region: Region,
    /// `G` at the equilibrium controls and nature's belief.
    pub g_sigma: f64,
    /// Largest `G` over the control grid at nature's belief.
    pub max_over_controls: f64,
    /// Smallest `G` over the nature grid at the equilibrium controls.
    pub min_over_nature: f64,
    /// `max_a U_a(pi) - V(pi)` over a in {l, r, hedge}.
    pub stop_gain: f64,
    /// `G` with no stopping at all.
    pub continue_gain: f64,
    /// `V(pi) - min V` over the prior set.
    pub worst_case_gap: f64,
    pub pass: bool,
}

pub const HJB_TOL: f64 = 1e-6;

/// The functional `G(m, nu, rho; p, p̄)` built from left limits of the value.
#[derive(Debug, Clone, Copy)]
pub struct HjbFunctional {
    spec: PayoffSpec,
    p_bar: f64,
    cond: Cond,
    derivs: Cond,
}

impl HjbFunctional {
    pub fn new(sol: &EquilibriumSolution, p_bar: f64) -> Self {
        let region = sol.region_left(p_bar);
        HjbFunctional {
            spec: sol.spec,
            p_bar,
            cond: sol.cond_values_in(region, p_bar),
            derivs: sol.cond_derivs_in(region, p_bar),
        }
    }

    pub fn value(&self, p: f64) -> f64 {
        self.cond.at(p)
    }

    pub fn eval(&self, m: f64, nu: f64, rho: f64, p: f64) -> f64 {
        let s = &self.spec;
        let v = self.cond.at(p);
        let stop = s.u_rho(rho, p) - v;
        let flow = -s.c
            + nu * stop
            + p * s.lambda * (s.u_r_R - v)
            + self.cond.slope() * s.eta(p)
            + self.derivs.at(p) * s.eta(self.p_bar);
        m * stop + (1.0 - m) * flow
    }
}

/// Number of nature grid points and stopping-rate grid points.
const NATURE_GRID: usize = 41;
const NU_GRID: usize = 21;

pub fn hjb_residual(sol: &EquilibriumSolution, p_bar: f64) -> HjbReport {
    let spec = &sol.spec;
    let g = HjbFunctional::new(sol, p_bar);
    let pp = sol.policy(p_bar);
    let rho = pp.rho.unwrap_or(0.0);
    let pi = pp.pi;
    let g_sigma = g.eval(pp.m, pp.nu, rho, pi);

    let rho_hat = spec.stopping_payoffs().rho_hat;
    let nu_max = 2.0 * (spec.lambda * (spec.u_r_R - sol.u1) / spec.delta_l()).max(pp.nu).max(1.0);
    let mut m_grid = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    if sol.m_atom_p2 > 0.0 {
        m_grid.push(sol.m_atom_p2);
    }
    let mut max_ctrl = f64::NEG_INFINITY;
    for &m in &m_grid {
        for &r in &[0.0, rho_hat, 1.0] {
            for k in 0..NU_GRID {
                let nu = nu_max * k as f64 / (NU_GRID - 1) as f64;
                max_ctrl = max_ctrl.max(g.eval(m, nu, r, pi));
            }
        }
    }

    let lo = sol.p_lower(p_bar);
    let mut min_nat = f64::INFINITY;
    let mut min_v = f64::INFINITY;
    for k in 0..NATURE_GRID {
        let p = lo + (p_bar - lo) * k as f64 / (NATURE_GRID - 1) as f64;
        min_nat = min_nat.min(g.eval(pp.m, pp.nu, rho, p));
        min_v = min_v.min(g.value(p));
    }
    let v_pi = g.value(pi);
    let stop_gain = [0.0, rho_hat, 1.0].iter().map(|&r| spec.u_rho(r, pi) - v_pi).fold(f64::NEG_INFINITY, f64::max);
    let continue_gain = g.eval(0.0, 0.0, 0.0, pi);
    let worst_case_gap = v_pi - min_v;

    let pass = g_sigma.abs() < HJB_TOL
        && max_ctrl <= g_sigma + HJB_TOL
        && min_nat >= g_sigma - HJB_TOL
        && stop_gain <= HJB_TOL
        && (pp.m == 1.0 || continue_gain <= HJB_TOL)
        && worst_case_gap <= HJB_TOL;

    HjbReport {
        p_bar,
        region: pp.region,
        g_sigma,
        max_over_controls: max_ctrl,
        min_over_nature: min_nat,
        stop_gain,
        continue_gain,
        worst_case_gap,
        pass,
    }
}

pub fn hjb_suite(sol: &EquilibriumSolution, states: &[f64], exec: Exec) -> Vec<HjbReport> {
    exec.map_slice(states, |&p| hjb_residual(sol, p))
}

/// How nature's stage choice is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NatureMode {
    /// The two endpoints of the prior set. Exact, since payoffs are affine in the belief.
    Corners,
    /// `k >= 2` evenly spaced beliefs including both endpoints.
    Grid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGameGrid {
    pub dt: f64,
    pub n_points: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub nature: NatureMode,
}

impl DiscreteGameGrid {
    /// Grid covering all boundaries of `sol` with `2000 * (1e-3 / dt)` points.
    pub fn covering(sol: &EquilibriumSolution, dt: f64) -> Self {
        let n = (2000.0 * 1e-3 / dt).round().max(2.0) as usize;
        DiscreteGameGrid {
            dt,
            n_points: n,
            z_lo: llr(sol.p1) - 0.25,
            z_hi: llr(sol.p4).min(20.0) + 0.5,
            nature: NatureMode::Corners,
        }
    }

    pub fn step(&self) -> f64 {
        (self.z_hi - self.z_lo) / (self.n_points - 1) as f64
    }

    pub fn state(&self, i: usize) -> f64 {
        self.z_lo + i as f64 * self.step()
    }
}

/// Optimal play in one stage game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    /// Decision maker's mixture over (stop l, stop r, continue).
    pub q: [f64; 3],
    pub maxmin: f64,
    pub minmax: f64,
    /// Nature's minmax belief.
    pub pi: f64,
}

/// Zero-sum game: rows are conditional payoffs, columns are beliefs.
/// `maxmin` is found by enumerating vertices of the row simplex where
/// column payoffs tie; `minmax` by minimising the upper envelope over the
/// convex hull of the columns. Ties in `maxmin` go to the mixture with the
/// most weight on continuing.
pub fn solve_stage(rows: &[Cond; 3], cols: &[f64]) -> StageSolution {
    let pay = |x: &[f64; 3], p: f64| x[0] * rows[0].at(p) + x[1] * rows[1].at(p) + x[2] * rows[2].at(p);
    let worst = |x: &[f64; 3]| cols.iter().map(|&p| pay(x, p)).fold(f64::INFINITY, f64::min);

    let mut cands: Vec<[f64; 3]> = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    // Edges of the simplex: rows i and k mixed so that columns a and b tie.
    for (i, k) in [(0usize, 1usize), (0, 2), (1, 2)] {
        for a in 0..cols.len() {
            for b in a + 1..cols.len() {
                let di = rows[i].at(cols[a]) - rows[i].at(cols[b]);
                let dk = rows[k].at(cols[a]) - rows[k].at(cols[b]);
                if (di - dk).abs() > 0.0 {
                    let t = dk / (dk - di);
                    if (0.0..=1.0).contains(&t) {
                        let mut x = [0.0; 3];
                        x[i] = t;
                        x[k] = 1.0 - t;
                        cands.push(x);
                    }
                }
            }
        }
    }
    // Interior points where three columns tie.
    if cols.len() >= 3 {
        for a in 0..cols.len() {
            for b in a + 1..cols.len() {
                for c in b + 1..cols.len() {
                    if let Some(x) = tie_three(rows, cols[a], cols[b], cols[c]) {
                        cands.push(x);
                    }
                }
            }
        }
    }
    let best = cands.iter().map(|x| worst(x)).fold(f64::NEG_INFINITY, f64::max);
    let scale = 1e-13 * (1.0 + best.abs());
    let q = *cands
        .iter()
        .filter(|x| worst(x) >= best - scale)
        .max_by(|a, b| a[2].total_cmp(&b[2]))
        .unwrap();

    // Nature mixes over beliefs in [min col, max col]; the envelope is a
    // maximum of three affine functions of the belief.
    let lo = cols.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cols.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let envelope = |p: f64| rows.iter().map(|r| r.at(p)).fold(f64::NEG_INFINITY, f64::max);
    let mut ps = vec![hi, lo];
    for i in 0..3 {
        for k in i + 1..3 {
            let ds = rows[i].slope() - rows[k].slope();
            if ds != 0.0 {
                let p = (rows[k].l - rows[i].l) / ds;
                if lo < p && p < hi {
                    ps.push(p);
                }
            }
        }
    }
    let (mut minmax, mut pi) = (f64::INFINITY, hi);
    for p in ps {
        let e = envelope(p);
        if e < minmax - 1e-15 {
            minmax = e;
            pi = p;
        }
    }
    StageSolution { q, maxmin: best, minmax, pi }
}

fn tie_three(rows: &[Cond; 3], pa: f64, pb: f64, pc: f64) -> Option<[f64; 3]> {
    // Unknowns x0, x1 with x2 = 1 - x0 - x1; equations f(pa) = f(pb), f(pa) = f(pc).
    let coef = |p: f64, q: f64| {
        let d = |r: &Cond| r.at(p) - r.at(q);
        (d(&rows[0]) - d(&rows[2]), d(&rows[1]) - d(&rows[2]), -d(&rows[2]))
    };
    let (a1, b1, c1) = coef(pa, pb);
    let (a2, b2, c2) = coef(pa, pc);
    let det = a1 * b2 - a2 * b1;
    if det.abs() < 1e-300 {
        return None;
    }
    let x0 = (c1 * b2 - c2 * b1) / det;
    let x1 = (a1 * c2 - a2 * c1) / det;
    let x2 = 1.0 - x0 - x1;
    (x0 >= 0.0 && x1 >= 0.0 && x2 >= 0.0).then_some([x0, x1, x2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub grid: DiscreteGameGrid,
    pub delta: f64,
    pub z: Vec<f64>,
    pub p_bar: Vec<f64>,
    pub cond: Vec<Cond>,
    /// Worst-case value at each state.
    pub value: Vec<f64>,
    pub q: Vec<[f64; 3]>,
    pub pi: Vec<f64>,
    pub max_duality_gap: f64,
    /// Largest shortfall of a played mixture below its stage maxmin; zero
    /// except at states resolved by fictitious play.
    pub max_stationarity_gap: f64,
}

/// Threshold on the stopping probability below which a state counts as pure.
const MIX_TOL: f64 = 1e-9;
pub const MIN_BAND_STATES: usize = 3;

impl DiscreteSolution {
    /// States where the decision maker strictly mixes between stopping and
    /// continuing.
    pub fn mixes(&self, i: usize) -> bool {
        let q = self.q[i];
        q[2] > MIX_TOL && q[0] + q[1] > MIX_TOL
    }

    /// Log-odds extent of the longest run of at least `MIN_BAND_STATES`
    /// mixing states. Shorter runs sit at stopping boundaries, where the
    /// interpolated step randomises the stopping cell.
    pub fn mixing_band(&self) -> Option<(f64, f64)> {
        let mut best: Option<(usize, usize)> = None;
        let mut start = None;
        for i in 0..=self.z.len() {
            let m = i < self.z.len() && self.mixes(i);
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if best.is_none_or(|(a, b)| i - 1 - s > b - a) {
                        best = Some((s, i - 1));
                    }
                    start = None;
                }
                _ => {}
            }
        }
        best.filter(|(a, b)| b - a + 1 >= MIN_BAND_STATES).map(|(a, b)| (self.z[a], self.z[b]))
    }

    /// Largest gap to the closed-form worst-case value over all grid states.
    pub fn sup_gap(&self, sol: &EquilibriumSolution) -> f64 {
        self.p_bar.iter().zip(&self.value).map(|(&p, &v)| (v - sol.value(p)).abs()).fold(0.0, f64::max)
    }
}

const FIXED_POINT_ITERS: usize = 200;
const FICTITIOUS_PLAY_ITERS: usize = 20_000;
/// Largest accepted shortfall of a fictitious-play mixture below the stage maxmin.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// Stage data at one grid state. With weight `w` the no-news step lands
/// back on the same state, whose values then depend on the mixture played.
struct Node<'a> {
    spec: &'a PayoffSpec,
    e: f64,
    cost_r: f64,
    cost_l: f64,
    left: Cond,
    w: f64,
    cols: &'a [f64],
}

impl Node<'_> {
    fn rows(&self, own: Cond) -> [Cond; 3] {
        let cont = if self.w == 0.0 { self.left } else { own.mix(&self.left, self.w) };
        let go = Cond::new((1.0 - self.e) * self.spec.u_r_R + self.e * cont.r - self.cost_r, cont.l - self.cost_l);
        [self.spec.cond_l(), self.spec.cond_r(), go]
    }

    /// Conditional values when the mixture `x` is played now and at every
    /// return to this state.
    fn own_values(&self, x: &[f64; 3]) -> Cond {
        let (sl, sr) = (self.spec.cond_l(), self.spec.cond_r());
        let (w, e) = (self.w, self.e);
        let r = (x[0] * sl.r + x[1] * sr.r + x[2] * ((1.0 - e) * self.spec.u_r_R - self.cost_r + e * (1.0 - w) * self.left.r))
            / (1.0 - x[2] * e * w);
        let l = (x[0] * sl.l + x[1] * sr.l + x[2] * ((1.0 - w) * self.left.l - self.cost_l)) / (1.0 - x[2] * w);
        Cond::new(r, l)
    }

    fn stage(&self, x: &[f64; 3]) -> (Cond, StageSolution) {
        let own = self.own_values(x);
        (own, solve_stage(&self.rows(own), self.cols))
    }

    /// How far `x` falls short of the maxmin value of the stage game it
    /// induces, with the stage solution reporting `x` as the played mixture.
    fn shortfall(&self, x: &[f64; 3]) -> (Cond, StageSolution, f64) {
        let (own, st) = self.stage(x);
        let rows = self.rows(own);
        let worst = self
            .cols
            .iter()
            .map(|&p| x[0] * rows[0].at(p) + x[1] * rows[1].at(p) + x[2] * rows[2].at(p))
            .fold(f64::INFINITY, f64::min);
        (own, StageSolution { q: *x, ..st }, (st.maxmin - worst).max(0.0))
    }

    fn consistent(&self, x: &[f64; 3]) -> Option<(Cond, StageSolution, f64)> {
        let found = self.shortfall(x);
        (found.2 <= 1e-12 * (1.0 + found.1.maxmin.abs())).then_some(found)
    }

    fn along(a: usize, s: f64) -> [f64; 3] {
        let mut x = [0.0; 3];
        x[a] = s;
        x[2] = 1.0 - s;
        x
    }

    fn solve(&self, guess: Cond) -> Option<(Cond, StageSolution, f64)> {
        if self.w == 0.0 {
            let (own, st) = self.stage(&[0.0, 0.0, 1.0]);
            let rows = self.rows(own);
            let x = st.q;
            let c = Cond::new(
                x[0] * rows[0].r + x[1] * rows[1].r + x[2] * rows[2].r,
                x[0] * rows[0].l + x[1] * rows[1].l + x[2] * rows[2].l,
            );
            return Some((c, st, 0.0));
        }
        if let Some(found) = self.consistent(&[0.0, 0.0, 1.0]) {
            return Some(found);
        }
        let mut own = guess;
        for _ in 0..FIXED_POINT_ITERS {
            let st = solve_stage(&self.rows(own), self.cols);
            if let Some(found) = self.consistent(&st.q) {
                return Some(found);
            }
            own = self.own_values(&st.q);
        }
        // Mixed stationary play: the continue weight the stage game asks for
        // crosses the weight being played somewhere along each stop/continue edge.
        for a in [0usize, 1] {
            let f = |s: f64| self.stage(&Self::along(a, s)).1.q[2] - (1.0 - s);
            let (mut lo, mut hi) = (0.0, 1.0);
            let flo = f(lo);
            if flo * f(hi) > 0.0 {
                continue;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            for s in [0.5 * (lo + hi), lo, hi] {
                if let Some(found) = self.consistent(&Self::along(a, s)) {
                    return Some(found);
                }
            }
        }
        // Three-action stationary mixtures: fictitious play on the mixture.
        let mut x = [0.0, 0.0, 1.0];
        for k in 0..FICTITIOUS_PLAY_ITERS {
            let br = self.stage(&x).1.q;
            let step = 1.0 / (k as f64 + 2.0);
            for (xi, bi) in x.iter_mut().zip(br) {
                *xi += step * (bi - *xi);
            }
        }
        let found = self.shortfall(&x);
        (found.2 <= STATIONARITY_TOL).then_some(found)
    }
}

/// Backward induction from an absorbing stop-l state at the left end of
/// the grid. After one step without news the state moves `lambda dt` to the
/// left; continuation values there are interpolated linearly in log-odds,
/// which amounts to moving one cell left with probability `lambda dt / h`
/// and staying put otherwise. At each state the stationary stage
/// equilibrium is computed, preferring continuation among equilibria.
pub fn discrete_saddle_solve(spec: &PayoffSpec, delta: f64, grid: &DiscreteGameGrid) -> Result<DiscreteSolution> {
    spec.validate()?;
    if grid.n_points < 2 || !(grid.dt > 0.0) || !(grid.z_hi > grid.z_lo) {
        return Err(Error::Domain("degenerate discrete grid".into()));
    }
    let n = grid.n_points;
    let h = grid.step();
    let shift = spec.lambda * grid.dt;
    let e = (-shift).exp();
    let stop_l = spec.cond_l();

    let z: Vec<f64> = (0..n).map(|i| grid.state(i)).collect();
    let p_bar: Vec<f64> = z.iter().map(|&x| sigmoid(x)).collect();
    let mut cond = vec![stop_l; n];
    let mut value = vec![0.0; n];
    let mut q = vec![[1.0, 0.0, 0.0]; n];
    let mut pi = vec![0.0; n];
    let mut gap: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    value[0] = stop_l.at(p_bar[0]);
    pi[0] = p_bar[0];

    for i in 1..n {
        let hi = p_bar[i];
        let lo = sigmoid(z[i] - delta);
        let cols: Vec<f64> = match grid.nature {
            NatureMode::Corners => vec![lo, hi],
            NatureMode::Grid(k) => {
                let k = k.max(2);
                (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect()
            }
        };
        let y = z[i] - shift;
        let f = ((y - z[0]) / h).max(0.0);
        let j = (f.floor() as usize).min(i - 1);
        let frac = (f - j as f64).clamp(0.0, 1.0);
        // Interpolate between cells j and j + 1; only j + 1 == i refers back.
        let (left, w) = if j + 1 == i {
            (cond[j], frac)
        } else {
            (cond[j + 1].mix(&cond[j], frac), 0.0)
        };
        let node = Node { spec, e, cost_r: spec.c * (1.0 - e) / spec.lambda, cost_l: spec.c * grid.dt, left, w, cols: &cols };
        let (own, stage, short) = node
            .solve(cond[i - 1])
            .ok_or_else(|| Error::NonConvergence(format!("no stationary stage equilibrium at z = {}", z[i])))?;
        cond[i] = own;
        value[i] = stage.maxmin;
        q[i] = stage.q;
        pi[i] = stage.pi;
        gap = gap.max((stage.maxmin - stage.minmax).abs());
        stationarity = stationarity.max(short);
    }

    Ok(DiscreteSolution { grid: *grid, delta, z, p_bar, cond, value, q, pi, max_duality_gap: gap, max_stationarity_gap: stationarity })
}
