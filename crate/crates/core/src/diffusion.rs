//! Incremental learning: the log-likelihood ratio `z` follows
//! `dZ = ±psi²/2 dt + psi dB` (sign by state), payoffs are symmetric with
//! `u_r^R = u_l^L = delta` and zero otherwise, and the prior set is an
//! interval of width `Δ` in log-odds centred on the state `z`.
//!
//! Under pure experimentation between two stopping states the conditional
//! values solve `V'' ± V' = k` with `k = 2c/psi²`, so
//! `V_R = a + b e^{-z} + k z` and `V_L = a' + b' e^{z} - k z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::Omega;
use crate::error::{Error, Result};
use crate::model::{llr, sigmoid, Cond};
use crate::numerics::{bisect, dopri};
use crate::par::Exec;

/// Euler-Maruyama step of the first-passage simulator.
pub const MC_DT: f64 = 1e-4;
/// Width of the log-odds scan used to bracket roots.
const SCAN_STEP: f64 = 1e-2;
const ROOT_TOL: f64 = 1e-13;
const ODE_RTOL: f64 = 1e-12;
const ODE_ATOL: f64 = 1e-13;
/// Points in the tabulated mixed band.
pub const BAND_TABLE: usize = 401;
/// Outer iterations allowed in the band fixed point.
pub const FIXED_POINT_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub mu_r: f64,
    pub mu_l: f64,
    pub sigma: f64,
    pub delta: f64,
    pub c: f64,
}

impl DiffusionSpec {
    pub fn new(mu_r: f64, mu_l: f64, sigma: f64, delta: f64, c: f64) -> Result<Self> {
        let s = DiffusionSpec { mu_r, mu_l, sigma, delta, c };
        if !(mu_r > mu_l) || !(sigma > 0.0) || !(delta > 0.0) || !(c > 0.0) || ![mu_r, mu_l, sigma, delta, c].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidSpec(format!("diffusion spec needs mu_r > mu_l, sigma, delta, c > 0: {s:?}")));
        }
        Ok(s)
    }

    /// Spec with signal-to-noise ratio `psi` (drifts `±psi/2`, unit noise).
    pub fn from_psi(psi: f64, delta: f64, c: f64) -> Result<Self> {
        Self::new(psi / 2.0, -psi / 2.0, 1.0, delta, c)
    }

    pub fn psi(&self) -> f64 {
        (self.mu_r - self.mu_l) / self.sigma
    }

    /// `2c / psi²`.
    pub fn k(&self) -> f64 {
        2.0 * self.c / self.psi().powi(2)
    }

    pub fn u_l(&self, y: f64) -> f64 {
        self.delta * (1.0 - sigmoid(y))
    }

    pub fn u_r(&self, y: f64) -> f64 {
        self.delta * sigmoid(y)
    }

    pub fn u_max(&self, y: f64) -> f64 {
        self.u_l(y).max(self.u_r(y))
    }
}

/// State-conditional values of experimenting on `(a, b)` with given
/// boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondPair {
    pub a: f64,
    pub b: f64,
    k: f64,
    r0: f64,
    r1: f64,
    l0: f64,
    l1: f64,
}

impl CondPair {
    /// `V_R(a) = ra, V_R(b) = rb, V_L(a) = la, V_L(b) = lb`.
    pub fn new(k: f64, a: f64, b: f64, ra: f64, rb: f64, la: f64, lb: f64) -> Self {
        // Solved relative to the endpoint nearer zero to keep the exponentials tame.
        let (ea, eb) = ((-a).exp(), (-b).exp());
        let r1 = ((ra - k * a) - (rb - k * b)) / (ea - eb);
        let r0 = ra - k * a - r1 * ea;
        let (fa, fb) = (a.exp(), b.exp());
        let l1 = ((la + k * a) - (lb + k * b)) / (fa - fb);
        let l0 = la + k * a - l1 * fa;
        CondPair { a, b, k, r0, r1, l0, l1 }
    }

    pub fn r(&self, z: f64) -> f64 {
        self.r0 + self.r1 * (-z).exp() + self.k * z
    }

    pub fn l(&self, z: f64) -> f64 {
        self.l0 + self.l1 * z.exp() - self.k * z
    }

    pub fn dr(&self, z: f64) -> f64 {
        -self.r1 * (-z).exp() + self.k
    }

    pub fn dl(&self, z: f64) -> f64 {
        self.l1 * z.exp() - self.k
    }

    pub fn cond(&self, z: f64) -> Cond {
        Cond::new(self.r(z), self.l(z))
    }

    /// Value at belief `y` when the state is `z`.
    pub fn at(&self, y: f64, z: f64) -> f64 {
        self.cond(z).at(sigmoid(y))
    }

    /// `d/dz` of the value at belief `y` held fixed.
    pub fn dz_at(&self, y: f64, z: f64) -> f64 {
        let p = sigmoid(y);
        p * self.dr(z) + (1.0 - p) * self.dl(z)
    }
}

/// Bayesian benchmark: `Phi^B(z) = M + k z tanh(z/2)` between `±z_r^B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesDiffusion {
    pub spec: DiffusionSpec,
    pub z_l_b: f64,
    pub z_r_b: f64,
    pub m: f64,
}

impl BayesDiffusion {
    pub fn value(&self, z: f64) -> f64 {
        if z <= self.z_l_b || z >= self.z_r_b {
            return self.spec.u_max(z);
        }
        self.m + self.spec.k() * z * (z / 2.0).tanh()
    }

    pub fn deriv(&self, z: f64) -> f64 {
        if z <= self.z_l_b {
            return -self.spec.delta * sigmoid(z) * (1.0 - sigmoid(z));
        }
        if z >= self.z_r_b {
            return self.spec.delta * sigmoid(z) * (1.0 - sigmoid(z));
        }
        let k = self.spec.k();
        k * ((z / 2.0).tanh() + z / (2.0 * (z / 2.0).cosh().powi(2)))
    }
}

/// Symmetric Bayesian boundaries from smooth pasting against `U_r`, which
/// reduces to `k (z + sinh z) = delta / 2`.
pub fn bayes_boundaries_z(spec: &DiffusionSpec) -> Result<BayesDiffusion> {
    let (k, delta) = (spec.k(), spec.delta);
    let mut hi = 1.0;
    while k * (hi + f64::sinh(hi)) < delta / 2.0 {
        hi *= 2.0;
    }
    let z_r_b = bisect(|z| k * (z + z.sinh()) - delta / 2.0, 0.0, hi, ROOT_TOL)?;
    let m = spec.u_r(z_r_b) - k * z_r_b * (z_r_b / 2.0).tanh();
    if m <= delta / 2.0 {
        return Err(Error::NoExperimentation);
    }
    Ok(BayesDiffusion { spec: *spec, z_l_b: -z_r_b, z_r_b, m })
}

/// First bracketed root of `f` scanning from `start` towards `end`.
fn scan_root<F: FnMut(f64) -> f64>(mut f: F, start: f64, end: f64) -> Option<f64> {
    let n = ((end - start).abs() / SCAN_STEP).ceil().max(1.0) as usize;
    let mut x0 = start;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = start + (end - start) * i as f64 / n as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            return Some(x0);
        }
        if f0 * f1 <= 0.0 {
            return bisect(&mut f, x0.min(x1), x0.max(x1), ROOT_TOL).ok();
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

fn small_pair(spec: &DiffusionSpec, z_l: f64) -> CondPair {
    CondPair::new(spec.k(), z_l, -z_l, 0.0, spec.delta, spec.delta, 0.0)
}

/// Lowest margin of the worst-case value over the stopping payoff across
/// states in `(a, b)`, with the worst belief at a corner of the segment.
fn worst_case_margin(spec: &DiffusionSpec, pair: &CondPair, delta: f64, a: f64, b: f64) -> f64 {
    let n = 2000;
    (1..n)
        .map(|i| {
            let z = a + (b - a) * i as f64 / n as f64;
            let (lo, hi) = (z - delta / 2.0, z + delta / 2.0);
            let (vl, vh) = (pair.at(lo, z), pair.at(hi, z));
            let (v, y) = if vl <= vh { (vl, lo) } else { (vh, hi) };
            v - spec.u_max(y)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Tolerance on the worst-case margin before the small-Δ solution is rejected.
const MARGIN_TOL: f64 = 1e-9;

/// Symmetric stopping states `(z_l, z_r)` when the value segment never
/// falls below the stopping payoff. The decision maker pastes smoothly at
/// the belief nearest the middle, `z_l + Δ/2`.
pub fn small_delta_boundaries(spec: &DiffusionSpec, delta: f64) -> Result<(f64, f64)> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("ambiguity must be non-negative, got {delta}")));
    }
    let bayes = bayes_boundaries_z(spec)?;
    let pasting = |z_l: f64| small_pair(spec, z_l).dz_at(z_l + delta / 2.0, z_l);
    let lo = bayes.z_l_b - delta / 2.0;
    let hi = -delta / 2.0 - 1e-12;
    if hi <= lo {
        return Err(Error::LargeDelta);
    }
    let z_l = if delta == 0.0 { bayes.z_l_b } else { bisect(pasting, lo, hi, ROOT_TOL).map_err(|_| Error::LargeDelta)? };
    if !(z_l + delta / 2.0 < 0.0) || worst_case_margin(spec, &small_pair(spec, z_l), delta, z_l, -z_l) < -MARGIN_TOL {
        return Err(Error::LargeDelta);
    }
    Ok((z_l, -z_l))
}

/// Flat band value on `(-b, 0)`, mirrored on `(0, b)`.
///
/// Integrating the band equation once with `V̂'(0) = 0` gives the Riccati
/// equation `V̂' = k z + V̂ - V̂²/delta - (v0 - v0²/delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedBand {
    pub v0: f64,
    /// Band edge; the band is `(-b, 0) ∪ (0, b)`.
    pub b: f64,
    /// Outer stopping state on the left.
    pub z_l: f64,
    /// All `v0` that solve the fixed point; the first is used.
    pub roots: Vec<f64>,
    pub z: Vec<f64>,
    pub vhat: Vec<f64>,
    pub dvhat: Vec<f64>,
    pub nu: Vec<f64>,
    pub zeta: Vec<f64>,
    spec: DiffusionSpec,
}

fn riccati(spec: &DiffusionSpec, v0: f64) -> impl Fn(f64, &[f64; 1]) -> [f64; 1] {
    let (k, d) = (spec.k(), spec.delta);
    let c0 = v0 * v0 / d - v0;
    move |z, v| [k * z + c0 - v[0] * v[0] / d + v[0]]
}

/// `(V̂, V̂')` at `z ≤ 0` by integration from zero.
fn band_eval(spec: &DiffusionSpec, v0: f64, z: f64) -> Result<(f64, f64)> {
    let f = riccati(spec, v0);
    let v = if z == 0.0 { v0 } else { dopri(&f, 0.0, [v0], &[z], ODE_RTOL, ODE_ATOL)?[0][0] };
    Ok((v, f(z, &[v])[0]))
}

/// Left band edge for a given `v0`: where nature's indifference belief
/// reaches the upper end of the segment.
fn band_edge(spec: &DiffusionSpec, delta: f64, v0: f64) -> Result<Option<(f64, f64, f64)>> {
    let f = riccati(spec, v0);
    let gap = |z: f64, v: f64| v - spec.u_r(z + delta / 2.0);
    if gap(0.0, v0) >= 0.0 {
        return Ok(None);
    }
    let (mut z, mut v) = (0.0, v0);
    let z_min = -(delta + 60.0);
    while z > z_min {
        let z1 = z - SCAN_STEP;
        let v1 = dopri(&f, z, [v], &[z1], ODE_RTOL, ODE_ATOL)?[0][0];
        if !v1.is_finite() {
            return Ok(None);
        }
        if gap(z1, v1) >= 0.0 {
            let (z_hi, v_hi) = (z, v);
            let at = |x: f64| dopri(&f, z_hi, [v_hi], &[x], ODE_RTOL, ODE_ATOL).map(|o| o[0][0]);
            let mut lo = z1;
            let mut hi = z_hi;
            while hi - lo > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                if gap(mid, at(mid)?) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let ze = 0.5 * (lo + hi);
            let ve = at(ze)?;
            return Ok(Some((ze, ve, f(ze, &[ve])[0])));
        }
        z = z1;
        v = v1;
    }
    Ok(None)
}

/// Outer stopping state for a band edge `(ze, ve)`: the closest state
/// left of the edge with smooth pasting at the belief nearest the middle.
fn outer_stop(spec: &DiffusionSpec, delta: f64, ze: f64, ve: f64) -> Option<(f64, CondPair)> {
    let pair = |z_l: f64| CondPair::new(spec.k(), z_l, ze, 0.0, ve, spec.delta, ve);
    let z_l = scan_root(|z_l| pair(z_l).dz_at(z_l + delta / 2.0, z_l), ze - 1e-9, ze - 30.0)?;
    Some((z_l, pair(z_l)))
}

/// Slope gap at the band edge along nature's belief there.
fn edge_residual(spec: &DiffusionSpec, delta: f64, v0: f64) -> Result<Option<(f64, f64, CondPair)>> {
    let Some((ze, ve, de)) = band_edge(spec, delta, v0)? else { return Ok(None) };
    let Some((z_l, pair)) = outer_stop(spec, delta, ze, ve) else { return Ok(None) };
    let zeta = llr(ve / spec.delta);
    Ok(Some((pair.dz_at(zeta, ze) - de, z_l, pair)))
}

/// Large-Δ solution: flat band around zero with randomized stopping, pure
/// experimentation outside it, stopping at `±z_l`.
///
/// Unknowns `v0 = V̂(0)`, the edge `-b` and `z_l`: the edge is where
/// nature's indifference belief hits the top of the segment, `z_l` pastes
/// smoothly at `z_l + Δ/2`, and `v0` makes the outer value's slope at the
/// edge, along nature's belief, equal `V̂'(-b)`. `v0` is bracketed on
/// `(delta/2, min(Phi^B(0), U_r(Δ/2)))` and found by bisection.
pub fn mixed_region_solution(spec: &DiffusionSpec, delta: f64) -> Result<MixedBand> {
    let bayes = bayes_boundaries_z(spec)?;
    let lo = spec.delta / 2.0 + 1e-12;
    let hi = bayes.m.min(spec.u_r(delta / 2.0)) - 1e-12;
    if !(hi > lo) {
        return Err(Error::NoRoot("empty range for the band value at zero".into()));
    }
    let resid = |v0: f64| -> Result<Option<f64>> { Ok(edge_residual(spec, delta, v0)?.map(|r| r.0)) };
    let n = 64;
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let v = lo + (hi - lo) * i as f64 / n as f64;
        let Some(r) = resid(v)? else {
            prev = None;
            continue;
        };
        if let Some((pv, pr)) = prev {
            if pr * r <= 0.0 {
                let (mut a, mut b, mut fa) = (pv, v, pr);
                let mut iters = 0;
                while b - a > ROOT_TOL {
                    iters += 1;
                    if iters > FIXED_POINT_ITERS {
                        return Err(Error::NonConvergence("band fixed point".into()));
                    }
                    let mid = 0.5 * (a + b);
                    match resid(mid)? {
                        Some(fm) if (fm > 0.0) == (fa > 0.0) => {
                            a = mid;
                            fa = fm;
                        }
                        Some(_) => b = mid,
                        None => return Err(Error::NonConvergence(format!("band edge lost at v0 = {mid}"))),
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        prev = Some((v, r));
    }
    let Some(&v0) = roots.first() else {
        return Err(Error::NoRoot(format!("no band value at zero matches the outer solution for ambiguity {delta}")));
    };
    let (_, z_l, _) = edge_residual(spec, delta, v0)?.ok_or_else(|| Error::NonConvergence("band root".into()))?;
    let (ze, _, _) = band_edge(spec, delta, v0)?.ok_or_else(|| Error::NonConvergence("band edge".into()))?;

    let f = riccati(spec, v0);
    let z: Vec<f64> = (0..BAND_TABLE).map(|i| ze * (1.0 - i as f64 / (BAND_TABLE - 1) as f64)).collect();
    let mut vhat = dopri(&f, 0.0, [v0], &z.iter().rev().copied().collect::<Vec<_>>(), ODE_RTOL, ODE_ATOL)?
        .into_iter()
        .map(|v| v[0])
        .collect::<Vec<_>>();
    vhat.reverse();
    let dvhat: Vec<f64> = z.iter().zip(&vhat).map(|(&x, &v)| f(x, &[v])[0]).collect();
    let psi2 = spec.psi().powi(2);
    let nu = dvhat.iter().map(|d| -psi2 * d / spec.delta).collect();
    let zeta = vhat.iter().map(|v| llr(v / spec.delta)).collect();
    Ok(MixedBand { v0, b: -ze, z_l, roots, z, vhat, dvhat, nu, zeta, spec: *spec })
}

impl MixedBand {
    /// `(V̂, V̂')` at `z` in `[-b, 0]` by direct integration.
    pub fn eval(&self, z: f64) -> Result<(f64, f64)> {
        band_eval(&self.spec, self.v0, z)
    }

    /// `V̂` by cubic Hermite interpolation of the table; symmetric in `z`.
    pub fn value(&self, z: f64) -> f64 {
        let x = -z.abs();
        let n = self.z.len();
        let h = self.z[1] - self.z[0];
        let t = ((x - self.z[0]) / h).clamp(0.0, (n - 1) as f64);
        let j = (t.floor() as usize).min(n - 2);
        let s = t - j as f64;
        let (y0, y1, d0, d1) = (self.vhat[j], self.vhat[j + 1], self.dvhat[j] * h, self.dvhat[j + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
    }

    /// Stopping rate, symmetric in `z`.
    pub fn nu(&self, z: f64) -> f64 {
        let v = self.value(z);
        let c0 = self.v0 * self.v0 / self.spec.delta - self.v0;
        let d = self.spec.k() * -z.abs() + c0 - v * v / self.spec.delta + v;
        -self.spec.psi().powi(2) * d / self.spec.delta
    }

    /// Nature's log-odds belief; antisymmetric in `z`.
    pub fn zeta(&self, z: f64) -> f64 {
        let w = llr(self.value(z) / self.spec.delta);
        if z > 0.0 {
            -w
        } else {
            w
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffusionRegime {
    SmallDelta,
    LargeDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPolicy {
    pub m: f64,
    pub nu: f64,
    pub rho: Option<f64>,
    /// Nature's log-odds belief on the mixed band.
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSolution {
    pub spec: DiffusionSpec,
    pub delta: f64,
    pub bayes: BayesDiffusion,
    pub z_l: f64,
    pub z_r: f64,
    pub regime: DiffusionRegime,
    /// Conditional values on the left experimentation region.
    pub outer: CondPair,
    pub band: Option<MixedBand>,
}

/// Small-Δ solution when it exists, the mixed-band solution otherwise.
pub fn solve(spec: &DiffusionSpec, delta: f64) -> Result<DiffusionSolution> {
    let bayes = bayes_boundaries_z(spec)?;
    match small_delta_boundaries(spec, delta) {
        Ok((z_l, z_r)) => Ok(DiffusionSolution {
            spec: *spec,
            delta,
            bayes,
            z_l,
            z_r,
            regime: DiffusionRegime::SmallDelta,
            outer: small_pair(spec, z_l),
            band: None,
        }),
        Err(Error::LargeDelta) => {
            let band = mixed_region_solution(spec, delta)?;
            let (_, _, outer) = edge_residual(spec, delta, band.v0)?.ok_or_else(|| Error::NonConvergence("band root".into()))?;
            Ok(DiffusionSolution {
                spec: *spec,
                delta,
                bayes,
                z_l: band.z_l,
                z_r: -band.z_l,
                regime: DiffusionRegime::LargeDelta,
                outer,
                band: Some(band),
            })
        }
        Err(e) => Err(e),
    }
}

impl DiffusionSolution {
    fn in_band(&self, z: f64) -> bool {
        self.band.as_ref().is_some_and(|b| z != 0.0 && z.abs() < b.b)
    }

    /// Conditional values `(V_R, V_L)` at state `z`.
    pub fn cond(&self, z: f64) -> Cond {
        let d = self.spec.delta;
        if z <= self.z_l {
            return Cond::new(0.0, d);
        }
        if z >= self.z_r {
            return Cond::new(d, 0.0);
        }
        if let Some(b) = &self.band {
            if z.abs() < b.b {
                return Cond::flat(b.value(z));
            }
        }
        if z <= 0.0 {
            self.outer.cond(z)
        } else {
            // Relabelling the states maps z to -z.
            let m = self.outer.cond(-z);
            Cond::new(m.l, m.r)
        }
    }

    /// Value at belief `y` in state `z`.
    pub fn value(&self, y: f64, z: f64) -> f64 {
        self.cond(z).at(sigmoid(y))
    }

    pub fn policy(&self, z: f64) -> DiffusionPolicy {
        if z <= self.z_l {
            return DiffusionPolicy { m: 1.0, nu: 0.0, rho: Some(0.0), zeta: None };
        }
        if z >= self.z_r {
            return DiffusionPolicy { m: 1.0, nu: 0.0, rho: Some(1.0), zeta: None };
        }
        if self.in_band(z) {
            let b = self.band.as_ref().unwrap();
            let rho = if z < 0.0 { 1.0 } else { 0.0 };
            return DiffusionPolicy { m: 0.0, nu: b.nu(z), rho: Some(rho), zeta: Some(b.zeta(z)) };
        }
        DiffusionPolicy { m: 0.0, nu: 0.0, rho: None, zeta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_paths: usize,
}

/// Monte Carlo estimate of the conditional value in state `omega` starting
/// at `z0`, for the small-Δ solution. Antithetic pairs share one ChaCha8
/// stream each; a Brownian-bridge test catches crossings between steps.
pub fn first_passage_value(sol: &DiffusionSolution, z0: f64, omega: Omega, n_paths: usize, seed: u64, exec: Exec) -> Result<McEstimate> {
    if sol.regime != DiffusionRegime::SmallDelta {
        return Err(Error::Unsupported("first-passage simulation covers the small-ambiguity solution".into()));
    }
    if n_paths < 4 {
        return Err(Error::Domain("need at least four paths".into()));
    }
    let spec = sol.spec;
    let (a, b) = (sol.z_l, sol.z_r);
    let psi = spec.psi();
    let sign = match omega {
        Omega::R => 1.0,
        Omega::L => -1.0,
    };
    let drift = sign * psi * psi / 2.0 * MC_DT;
    let vol = psi * MC_DT.sqrt();
    let var = vol * vol;
    let (pay_l, pay_r) = match omega {
        Omega::R => (0.0, spec.delta),
        Omega::L => (spec.delta, 0.0),
    };
    let pairs = n_paths / 2;
    let pair_means = exec.map(pairs, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut z = [z0; 2];
        let mut done = [None::<f64>; 2];
        let mut steps = 0u64;
        if !(a < z0 && z0 < b) {
            let pay = if z0 <= a { pay_l } else { pay_r };
            return pay;
        }
        while done.iter().any(Option::is_none) {
            steps += 1;
            let xi: f64 = rng.sample(StandardNormal);
            let t = steps as f64 * MC_DT;
            for (j, s) in [1.0, -1.0].into_iter().enumerate() {
                if done[j].is_some() {
                    continue;
                }
                let z1 = z[j] + drift + s * vol * xi;
                let hit = if z1 <= a {
                    Some(pay_l)
                } else if z1 >= b {
                    Some(pay_r)
                } else {
                    let qa = 2.0 * (z[j] - a) * (z1 - a) / var;
                    let qb = 2.0 * (b - z[j]) * (b - z1) / var;
                    // e^-40 is far below the Monte Carlo error; skip the draw.
                    if qa.min(qb) > 40.0 {
                        None
                    } else {
                        let (pa, pb) = ((-qa).exp(), (-qb).exp());
                        let u: f64 = rng.random();
                        if u < pa {
                            Some(pay_l)
                        } else if u < pa + pb {
                            Some(pay_r)
                        } else {
                            None
                        }
                    }
                };
                match hit {
                    Some(p) => done[j] = Some(p - spec.c * t),
                    None => z[j] = z1,
                }
            }
        }
        0.5 * (done[0].unwrap() + done[1].unwrap())
    });
    let n = pair_means.len() as f64;
    let mean = pair_means.iter().sum::<f64>() / n;
    let var = pair_means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate { mean, std_err: (var / n).sqrt(), n_paths: 2 * pairs })
}
