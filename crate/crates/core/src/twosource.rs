//! Attention split between two conclusive news sources with symmetric
//! payoffs: an R-source that reveals state R and an L-source that reveals
//! state L. Attention `alpha` to the R-source moves the log-odds at rate
//! `-lambda (2 alpha - 1)` while no news arrives.

use serde::{Deserialize, Serialize};

use crate::bayesian::BayesBenchmark;
use crate::equilibrium::VHat;
use crate::error::{Error, Result};
use crate::model::{llr, p_lower, sigmoid, PayoffSpec};

/// Time step and grid used for the Bayesian benchmark.
pub const VI_DT: f64 = 5e-4;
pub const VI_INTERVALS: usize = 4000;
/// An action is replaced only when another beats it by more than this.
const PI_TOL: f64 = 1e-13;
const PI_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSourceSpec {
    pub delta: f64,
    pub c: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostRegime {
    /// Below the split-attention threshold: confirmatory learning near 1/2.
    Low,
    /// Only contradictory evidence is sought.
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoSourceRegion {
    StopL,
    StopR,
    /// Bayesian learning at nature's belief.
    Bayes,
    /// Attention split evenly; the state does not move.
    SplitAttention,
    /// Stop at once, mixing l and r evenly.
    HedgeActions,
    /// Randomized stopping with l while seeking R-evidence.
    MixingR,
    /// Mirror image: randomized stopping with r while seeking L-evidence.
    MixingL,
}

/// Attention to the R-source (`None` when the policy stops for sure) plus
/// the stopping atom, stopping rate, probability of r given a stop and
/// nature's belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionPolicy {
    pub alpha: Option<f64>,
    pub m: f64,
    pub nu: f64,
    pub rho: Option<f64>,
    pub pi: f64,
    pub region: TwoSourceRegion,
}

impl AttentionPolicy {
    fn stop(rho: f64, pi: f64, region: TwoSourceRegion) -> Self {
        AttentionPolicy { alpha: None, m: 1.0, nu: 0.0, rho: Some(rho), pi, region }
    }

    fn learn(alpha: f64, pi: f64, region: TwoSourceRegion) -> Self {
        AttentionPolicy { alpha: Some(alpha), m: 0.0, nu: 0.0, rho: None, pi, region }
    }

    /// The same policy seen from the relabelled problem `p -> 1 - p`.
    pub fn mirrored(&self) -> Self {
        let region = match self.region {
            TwoSourceRegion::StopL => TwoSourceRegion::StopR,
            TwoSourceRegion::StopR => TwoSourceRegion::StopL,
            TwoSourceRegion::MixingR => TwoSourceRegion::MixingL,
            TwoSourceRegion::MixingL => TwoSourceRegion::MixingR,
            r => r,
        };
        AttentionPolicy {
            alpha: self.alpha.map(|a| 1.0 - a),
            m: self.m,
            nu: self.nu,
            rho: self.rho.map(|r| 1.0 - r),
            pi: 1.0 - self.pi,
            region,
        }
    }
}

impl TwoSourceSpec {
    pub fn new(delta: f64, c: f64, lambda: f64) -> Result<Self> {
        let s = TwoSourceSpec { delta, c, lambda };
        s.single_source()?;
        Ok(s)
    }

    /// Single-source problem with the same symmetric payoffs.
    pub fn single_source(&self) -> Result<PayoffSpec> {
        PayoffSpec::symmetric(self.delta, self.c, self.lambda)
    }

    /// Accepts a general payoff spec only when its stopping payoffs are symmetric.
    pub fn from_payoffs(spec: &PayoffSpec) -> Result<Self> {
        let sym = spec.u_r_R == spec.u_l_L && spec.u_l_R == 0.0 && spec.u_r_L == 0.0;
        if !sym {
            return Err(Error::Unsupported("two-source model needs payoffs u_r^R = u_l^L, zero off the diagonal".into()));
        }
        TwoSourceSpec::new(spec.u_r_R, spec.c, spec.lambda)
    }

    pub fn c_bar(&self) -> f64 {
        self.lambda * self.delta / 2.0
    }

    /// Cost below which split attention beats contradictory learning at 1/2.
    pub fn c_lower_star(&self) -> f64 {
        self.lambda * self.delta / (1.0 + std::f64::consts::E.powi(2))
    }

    /// Value of splitting attention forever.
    pub fn u_star(&self) -> f64 {
        self.delta - 2.0 * self.c / self.lambda
    }

    /// Best immediate payoff at 1/2.
    pub fn u_hat(&self) -> f64 {
        self.delta / 2.0
    }

    pub fn regime(&self) -> Result<CostRegime> {
        if self.c >= self.c_bar() {
            Err(Error::NoExperimentation)
        } else if self.c < self.c_lower_star() {
            Ok(CostRegime::Low)
        } else {
            Ok(CostRegime::Intermediate)
        }
    }

    fn u_l(&self, p: f64) -> f64 {
        (1.0 - p) * self.delta
    }

    fn u_r(&self, p: f64) -> f64 {
        p * self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridAction {
    StopL,
    StopR,
    Attend(f64),
}

/// Bayesian two-source value iteration on a uniform log-odds grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSourceBayes {
    pub spec: TwoSourceSpec,
    pub dt: f64,
    pub z: Vec<f64>,
    pub value: Vec<f64>,
    pub action: Vec<GridAction>,
    /// Policy-evaluation rounds until the policy settled.
    pub iterations: usize,
    /// Upper end of the stop-l region.
    pub p_l: f64,
    /// Switch from R-seeking (below) to L-seeking (above) in the left half;
    /// 1/2 when the left half only seeks R-evidence.
    pub p_switch: f64,
}

impl TwoSourceBayes {
    pub fn solve(spec: &TwoSourceSpec) -> Result<Self> {
        Self::solve_on(spec, VI_DT, VI_INTERVALS)
    }

    /// Policy iteration on the discrete-time problem: each fixed policy is
    /// a banded linear system, solved exactly, then improved greedily. The
    /// grid has `intervals + 1` nodes, symmetric about log-odds zero.
    pub fn solve_on(spec: &TwoSourceSpec, dt: f64, intervals: usize) -> Result<Self> {
        spec.regime()?;
        let (delta, c, lambda) = (spec.delta, spec.c, spec.lambda);
        let z_max = llr(c / (lambda * delta)).abs() + 1.5;
        let n = intervals + 1;
        let h = 2.0 * z_max / intervals as f64;
        let z: Vec<f64> = (0..n).map(|i| -z_max + h * i as f64).collect();
        let p: Vec<f64> = z.iter().map(|&x| sigmoid(x)).collect();

        let g = 1.0 - (-lambda * dt).exp();
        let shift = lambda * dt;
        let outside = |y: f64| {
            let q = sigmoid(y);
            spec.u_l(q).max(spec.u_r(q))
        };
        // Each option is `constant + sum(w_k V_k)` over at most two nodes.
        let options: Vec<[Affine; 2]> = (0..n)
            .map(|i| {
                let q = p[i];
                [(1.0, -1.0, q * g), (0.0, 1.0, (1.0 - q) * g)].map(|(_, dir, news)| {
                    let cost = c * (news / lambda + (1.0 - news / g) * dt);
                    let y = z[i] + dir * shift;
                    let f = (y - z[0]) / h;
                    let keep = 1.0 - news;
                    if f <= 0.0 || f >= (n - 1) as f64 {
                        return Affine { constant: news * delta - cost + keep * outside(y), terms: [(i, 0.0), (i, 0.0)] };
                    }
                    let j = f.floor() as usize;
                    let w = f - j as f64;
                    Affine { constant: news * delta - cost, terms: [(j, keep * (1.0 - w)), (j + 1, keep * w)] }
                })
            })
            .collect();
        let centre = z.iter().position(|&x| x == 0.0);
        let fixed = |i: usize, a: GridAction| match a {
            GridAction::StopL => spec.u_l(p[i]),
            GridAction::StopR => spec.u_r(p[i]),
            GridAction::Attend(_) => spec.u_star(),
        };
        let option_of = |a: GridAction| match a {
            GridAction::Attend(x) if x == 1.0 => Some(0),
            GridAction::Attend(x) if x == 0.0 => Some(1),
            _ => None,
        };
        let payoff = |i: usize, a: GridAction, v: &[f64]| match option_of(a) {
            Some(k) => options[i][k].eval(v),
            None => fixed(i, a),
        };

        let mut action: Vec<GridAction> = p.iter().map(|&q| if spec.u_r(q) > spec.u_l(q) { GridAction::StopR } else { GridAction::StopL }).collect();
        let band = (shift / h).ceil() as usize + 1;
        let mut iterations = 0;
        let value = loop {
            iterations += 1;
            let mut sys = BandSystem::new(n, band);
            for i in 0..n {
                match option_of(action[i]) {
                    Some(k) => {
                        let o = &options[i][k];
                        sys.add(i, i, 1.0);
                        for (j, w) in o.terms {
                            sys.add(i, j, -w);
                        }
                        sys.rhs[i] = o.constant;
                    }
                    None => {
                        sys.add(i, i, 1.0);
                        sys.rhs[i] = fixed(i, action[i]);
                    }
                }
            }
            let value = sys.solve();
            let mut changed = false;
            for i in 0..n {
                let mut best = (payoff(i, action[i], &value), action[i]);
                let mut candidates = vec![GridAction::StopL, GridAction::StopR, GridAction::Attend(1.0), GridAction::Attend(0.0)];
                if Some(i) == centre {
                    candidates.push(GridAction::Attend(0.5));
                }
                for a in candidates {
                    let v = payoff(i, a, &value);
                    if v > best.0 + PI_TOL {
                        best = (v, a);
                    }
                }
                if best.1 != action[i] {
                    action[i] = best.1;
                    changed = true;
                }
            }
            if !changed {
                break value;
            }
            if iterations >= PI_MAX_ITER {
                return Err(Error::NonConvergence("two-source policy iteration did not settle".into()));
            }
        };
        let mid = intervals / 2;
        let first_learn = (0..=mid).find(|&i| !matches!(action[i], GridAction::StopL)).unwrap_or(mid);
        let p_l = sigmoid(0.5 * (z[first_learn.saturating_sub(1)] + z[first_learn]));
        let last_r_seek = (first_learn..mid).rev().find(|&i| action[i] == GridAction::Attend(1.0));
        let p_switch = match last_r_seek {
            Some(k) if k + 1 < mid => sigmoid(0.5 * (z[k] + z[k + 1])),
            _ => 0.5,
        };
        Ok(TwoSourceBayes { spec: *spec, dt, z, value, action, iterations, p_l, p_switch })
    }

    pub fn p_r(&self) -> f64 {
        1.0 - self.p_l
    }

    /// Value by linear interpolation in log-odds; stopping payoff off the grid.
    pub fn value_at(&self, p: f64) -> f64 {
        let y = llr(p);
        let n = self.z.len();
        let h = self.z[1] - self.z[0];
        let f = (y - self.z[0]) / h;
        if f <= 0.0 || f >= (n - 1) as f64 {
            return self.spec.u_l(p).max(self.spec.u_r(p));
        }
        let j = f.floor() as usize;
        let w = f - j as f64;
        (1.0 - w) * self.value[j] + w * self.value[j + 1]
    }

    /// Policy at belief `p` read off the extracted thresholds, mirrored
    /// through 1/2. At exactly 1/2 the split is used in the low-cost regime,
    /// R-seeking otherwise.
    pub fn policy(&self, p: f64) -> AttentionPolicy {
        use TwoSourceRegion::*;
        if p > 0.5 {
            return self.policy(1.0 - p).mirrored();
        }
        if p <= self.p_l {
            return AttentionPolicy::stop(0.0, p, StopL);
        }
        if p == 0.5 {
            return match self.spec.regime() {
                Ok(CostRegime::Low) => AttentionPolicy::learn(0.5, p, SplitAttention),
                _ => AttentionPolicy::learn(1.0, p, Bayes),
            };
        }
        let alpha = if p < self.p_switch { 1.0 } else { 0.0 };
        AttentionPolicy::learn(alpha, p, Bayes)
    }
}

#[derive(Debug, Clone, Copy)]
struct Affine {
    constant: f64,
    terms: [(usize, f64); 2],
}

impl Affine {
    fn eval(&self, v: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, w)| w * v[j]).sum::<f64>()
    }
}

/// Square system with nonzeros within `band` of the diagonal, solved by
/// elimination without pivoting. Policy systems are strictly diagonally
/// dominant, so that is stable.
struct BandSystem {
    n: usize,
    band: usize,
    a: Vec<f64>,
    rhs: Vec<f64>,
}

impl BandSystem {
    fn new(n: usize, band: usize) -> Self {
        BandSystem { n, band, a: vec![0.0; n * (2 * band + 1)], rhs: vec![0.0; n] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.band + 1) + (j + self.band - i)
    }

    fn add(&mut self, i: usize, j: usize, x: f64) {
        let k = self.idx(i, j);
        self.a[k] += x;
    }

    fn solve(mut self) -> Vec<f64> {
        let (n, b) = (self.n, self.band);
        for r in 0..n {
            let piv = self.a[self.idx(r, r)];
            for i in r + 1..(r + b + 1).min(n) {
                let f = self.a[self.idx(i, r)] / piv;
                if f == 0.0 {
                    continue;
                }
                for j in r..(r + b + 1).min(n) {
                    let x = self.a[self.idx(r, j)];
                    let k = self.idx(i, j);
                    self.a[k] -= f * x;
                }
                self.rhs[i] -= f * self.rhs[r];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let mut acc = self.rhs[r];
            for j in r + 1..(r + b + 1).min(n) {
                acc -= self.a[self.idx(r, j)] * x[j];
            }
            x[r] = acc / self.a[self.idx(r, r)];
        }
        x
    }
}

/// Bayesian two-source policy at belief `p`.
pub fn bayes_two_source(p: f64, spec: &TwoSourceSpec) -> Result<AttentionPolicy> {
    Ok(TwoSourceBayes::solve(spec)?.policy(p))
}

/// Value of the two-source benchmark at 1/2: contradictory learning in the
/// intermediate regime, the split otherwise.
pub fn phi_star_half(spec: &TwoSourceSpec) -> Result<f64> {
    Ok(match spec.regime()? {
        CostRegime::Low => spec.u_star(),
        CostRegime::Intermediate => BayesBenchmark::new(&spec.single_source()?).phi(0.5),
    })
}

/// Flat band value anchored at `(1/2, Phi*(1/2))`.
pub fn vhat(spec: &TwoSourceSpec) -> Result<VHat> {
    VHat::new(&spec.single_source()?, 0.5, phi_star_half(spec)?)
}

/// `(p_-, p_+)` with `p_+` where the band value falls to `max(u*, û)`.
pub fn p_plus_minus(spec: &TwoSourceSpec) -> Result<(f64, f64)> {
    if spec.regime()? != CostRegime::Intermediate {
        return Err(Error::Unsupported("randomized-stopping bands need the intermediate cost regime".into()));
    }
    let v = vhat(spec)?;
    let level = spec.u_star().max(spec.u_hat());
    if level >= v.v0 {
        return Err(Error::NoRoot(format!("band level {level} is not below the value {} at 1/2", v.v0)));
    }
    let p_plus = v.inverse(level).ok_or_else(|| Error::NoRoot(format!("band value never reaches {level}")))?;
    Ok((1.0 - p_plus, p_plus))
}

/// `dG/d alpha / lambda` at `alpha = 1` on the R-seeking band.
pub fn attention_gain(spec: &TwoSourceSpec, p_bar: f64) -> Result<f64> {
    let v = vhat(spec)?;
    let (val, pi) = (v.value(p_bar), v.pi(p_bar));
    Ok(pi * (spec.delta - val) - (1.0 - pi) * (spec.delta - val) - 2.0 * v.deriv(p_bar) * p_bar * (1.0 - p_bar))
}

/// Two-source equilibrium: benchmark, band quantities and the policy map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSourceModel {
    pub spec: TwoSourceSpec,
    pub regime: CostRegime,
    pub bayes: TwoSourceBayes,
    pub phi_half: f64,
    pub vhat: Option<VHat>,
    pub bands: Option<(f64, f64)>,
}

impl TwoSourceModel {
    pub fn new(spec: &TwoSourceSpec) -> Result<Self> {
        let regime = spec.regime()?;
        let bayes = TwoSourceBayes::solve(spec)?;
        let phi_half = phi_star_half(spec)?;
        let (vhat, bands) = match regime {
            CostRegime::Intermediate => (Some(vhat(spec)?), p_plus_minus(spec).ok()),
            CostRegime::Low => (None, None),
        };
        Ok(TwoSourceModel { spec: *spec, regime, bayes, phi_half, vhat, bands })
    }

    /// Ambiguity is large when stopping with l at the worst belief of the
    /// set anchored at 1/2 beats learning there.
    pub fn large_ambiguity(&self, delta: f64) -> bool {
        self.spec.u_l(p_lower(0.5, delta)) > self.phi_half
    }

    fn hedge(&self) -> AttentionPolicy {
        if self.spec.u_star() > self.spec.u_hat() {
            AttentionPolicy::learn(0.5, 0.5, TwoSourceRegion::SplitAttention)
        } else {
            AttentionPolicy::stop(0.5, 0.5, TwoSourceRegion::HedgeActions)
        }
    }

    /// Equilibrium policy at the prior set `[p_lower(p̄, Δ), p̄]`.
    ///
    /// A straddling set with large ambiguity in the intermediate regime uses
    /// the R-band when nature's indifference belief lies in the set, else
    /// the mirror band under the same condition, else the hedge.
    pub fn policy(&self, p_bar: f64, delta: f64) -> AttentionPolicy {
        let lo = p_lower(p_bar, delta);
        if p_bar <= 0.5 {
            return AttentionPolicy { pi: p_bar, ..self.bayes.policy(p_bar) };
        }
        if lo >= 0.5 {
            return AttentionPolicy { pi: lo, ..self.bayes.policy(lo) };
        }
        if self.regime == CostRegime::Low || !self.large_ambiguity(delta) {
            return self.hedge();
        }
        let (Some(v), Some((p_minus, p_plus))) = (self.vhat, self.bands) else {
            return self.hedge();
        };
        if p_bar <= p_plus && v.pi(p_bar) >= lo {
            return AttentionPolicy { alpha: Some(1.0), m: 0.0, nu: v.nu(p_bar), rho: Some(0.0), pi: v.pi(p_bar), region: TwoSourceRegion::MixingR };
        }
        if lo >= p_minus && 1.0 - v.pi(1.0 - lo) <= p_bar {
            let q = 1.0 - lo;
            return AttentionPolicy { alpha: Some(0.0), m: 0.0, nu: v.nu(q), rho: Some(1.0), pi: 1.0 - v.pi(q), region: TwoSourceRegion::MixingL };
        }
        self.hedge()
    }

    /// Worst-case value of the equilibrium at the prior set.
    pub fn value(&self, p_bar: f64, delta: f64) -> f64 {
        let pol = self.policy(p_bar, delta);
        match pol.region {
            TwoSourceRegion::SplitAttention if pol.pi == 0.5 && p_bar > 0.5 => self.spec.u_star(),
            TwoSourceRegion::HedgeActions => self.spec.u_hat(),
            TwoSourceRegion::MixingR => self.vhat.unwrap().value(p_bar),
            TwoSourceRegion::MixingL => self.vhat.unwrap().value(1.0 - p_lower(p_bar, delta)),
            _ => self.bayes.value_at(pol.pi),
        }
    }

    /// No-news path of the upper belief under the equilibrium attention,
    /// sampled every `dt` until `horizon` or the first sure stop.
    pub fn interval_path(&self, p_bar0: f64, delta: f64, horizon: f64, dt: f64) -> Vec<(f64, f64)> {
        let mut z = llr(p_bar0);
        let mut out = vec![(0.0, p_bar0)];
        let steps = (horizon / dt).round() as usize;
        for k in 1..=steps {
            let pol = self.policy(sigmoid(z), delta);
            let Some(alpha) = pol.alpha else { break };
            z -= self.spec.lambda * (2.0 * alpha - 1.0) * dt;
            out.push((k as f64 * dt, sigmoid(z)));
        }
        out
    }
}

/// Equilibrium policy at `p̄` for ambiguity `delta`.
pub fn two_source_equilibrium(p_bar: f64, delta: f64, spec: &TwoSourceSpec) -> Result<AttentionPolicy> {
    Ok(TwoSourceModel::new(spec)?.policy(p_bar, delta))
}
