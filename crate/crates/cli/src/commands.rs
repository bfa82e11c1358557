//! One function per subcommand; each returns a table or a classified error.

use ambistop::diffusion::{self, DiffusionRegime, DiffusionSolution};
use ambistop::dynamics::{
    knightian_learning_time, learning_time_curve, naive_cdf, simulate_with, stopping_cdf, Action, Conditioning, Omega, StoppingDistribution,
};
use ambistop::equilibrium::{solve, CostRegime};
use ambistop::model::{llr, sigmoid};
use ambistop::oracle::{conditional_values_by_quadrature, discrete_saddle_solve, hjb_suite, DiscreteGameGrid};
use ambistop::twosource::{self, TwoSourceBayes, TwoSourceModel};
use ambistop::{BayesBenchmark, EquilibriumSolution, Error, Exec};

use crate::config::{Grid, Model, RunConfig};
use crate::output::{Cell, Table};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
/// A solver failed to converge; not a property of the input.
pub const EXIT_INTERNAL: i32 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Report to print before exiting (used by `verify`).
    pub table: Option<Table>,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into(), table: None }
    }

    pub fn unsupported(message: impl Into<String>) -> Self {
        Failure { code: EXIT_UNSUPPORTED, message: message.into(), table: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidSpec(_) | Error::Domain(_) | Error::Region { .. } => EXIT_CONFIG,
            Error::Unsupported(_) | Error::NoExperimentation | Error::NoPreemptiveStop | Error::NoRoot(_) | Error::LargeDelta => EXIT_UNSUPPORTED,
            Error::NonConvergence(_) => EXIT_INTERNAL,
        };
        Failure { code, message: e.to_string(), table: None }
    }
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Failure::config(message)
    }
}

type Out = Result<Table, Failure>;

fn require(cfg: &RunConfig, model: Model, command: &str) -> Result<(), Failure> {
    if cfg.model != model {
        return Err(Failure::config(format!("`{command}` needs model {model:?}, config has {:?}", cfg.model)));
    }
    Ok(())
}

fn poisson_solution(cfg: &RunConfig) -> Result<EquilibriumSolution, Failure> {
    require(cfg, Model::Poisson, "this command")?;
    Ok(solve(&cfg.payoff_spec()?, cfg.ambiguity())?)
}

fn diffusion_solution(cfg: &RunConfig) -> Result<DiffusionSolution, Failure> {
    Ok(diffusion::solve(&cfg.diffusion_spec()?, cfg.ambiguity())?)
}

fn text<T: std::fmt::Debug>(x: T) -> Cell {
    Cell::Text(format!("{x:?}"))
}

fn lowercase<T: std::fmt::Debug>(x: T) -> Cell {
    Cell::Text(format!("{x:?}").to_lowercase())
}

pub fn thresholds(cfg: &RunConfig) -> Out {
    Ok(match cfg.model {
        Model::Poisson => {
            let spec = cfg.payoff_spec()?;
            let b = BayesBenchmark::new(&spec);
            let sp = spec.stopping_payoffs();
            Table::key_values(vec![
                ("p_l_B", b.p_l_B.into()),
                ("p_r_B", b.p_r_B.into()),
                ("c_bar", b.c_bar.into()),
                ("c_lower", spec.c_lower().into()),
                ("p_hat", sp.p_hat.into()),
                ("p_star", b.p_star.into()),
                ("phi_at_p_star", b.phi_at_p_star.into()),
                ("case", text(b.case)),
            ])
        }
        Model::Twosource => {
            let s = cfg.two_source_spec()?;
            let regime = match s.regime() {
                Ok(r) => lowercase(r),
                Err(Error::NoExperimentation) => "none".into(),
                Err(e) => return Err(e.into()),
            };
            Table::key_values(vec![
                ("c_bar", s.c_bar().into()),
                ("c_lower_star", s.c_lower_star().into()),
                ("u_star", s.u_star().into()),
                ("u_hat", s.u_hat().into()),
                ("regime", regime),
            ])
        }
        Model::Diffusion => {
            let spec = cfg.diffusion_spec()?;
            let b = diffusion::bayes_boundaries_z(&spec)?;
            Table::key_values(vec![
                ("k", spec.k().into()),
                ("z_l_B", b.z_l_b.into()),
                ("z_r_B", b.z_r_b.into()),
                ("p_l_B", sigmoid(b.z_l_b).into()),
                ("p_r_B", sigmoid(b.z_r_b).into()),
                ("M", b.m.into()),
            ])
        }
    })
}

pub fn solve_cmd(cfg: &RunConfig) -> Out {
    Ok(match cfg.model {
        Model::Poisson => {
            let sol = poisson_solution(cfg)?;
            let kn = sol.knightian;
            Table::key_values(vec![
                ("delta", sol.delta.into()),
                ("case", text(sol.case)),
                ("regime", text(sol.regime)),
                ("p1", sol.p1.into()),
                ("p2", sol.p2.into()),
                ("p3", sol.p3.into()),
                ("p4", sol.p4.into()),
                ("u1", sol.u1.into()),
                ("u2", sol.u2.into()),
                ("c_coef", sol.c_coef.into()),
                ("v_dstar", sol.v_dstar.into()),
                ("p_dstar", sol.p_dstar.into()),
                ("m_atom_p2", sol.m_atom_p2.into()),
                ("delta_c", sol.delta_c.into()),
                ("mixing", sol.mixing.into()),
                ("hedge_band", sol.hedge_band.into()),
                ("vhat_c", sol.vhat.map(|v| v.c_coef()).into()),
                ("knightian_nu", kn.map(|k| k.nu_tilde).into()),
                ("knightian_value", kn.map(|k| k.u_tilde).into()),
            ])
        }
        Model::Twosource => {
            let m = TwoSourceModel::new(&cfg.two_source_spec()?)?;
            let d = cfg.ambiguity();
            Table::key_values(vec![
                ("regime", lowercase(m.regime)),
                ("bayes_p_l", m.bayes.p_l.into()),
                ("bayes_p_r", m.bayes.p_r().into()),
                ("bayes_p_switch", m.bayes.p_switch.into()),
                ("bayes_iterations", m.bayes.iterations.into()),
                ("phi_half", m.phi_half.into()),
                ("vhat_c", m.vhat.map(|v| v.c_coef()).into()),
                ("band_p_minus", m.bands.map(|b| b.0).into()),
                ("band_p_plus", m.bands.map(|b| b.1).into()),
                ("large_ambiguity", m.large_ambiguity(d).into()),
            ])
        }
        Model::Diffusion => {
            let sol = diffusion_solution(cfg)?;
            let band = sol.band.as_ref();
            Table::key_values(vec![
                ("delta", sol.delta.into()),
                ("regime", text(sol.regime)),
                ("k", sol.spec.k().into()),
                ("z_l_B", sol.bayes.z_l_b.into()),
                ("z_r_B", sol.bayes.z_r_b.into()),
                ("M", sol.bayes.m.into()),
                ("z_l", sol.z_l.into()),
                ("z_r", sol.z_r.into()),
                ("band_b", band.map(|b| b.b).into()),
                ("band_v0", band.map(|b| b.v0).into()),
                ("band_z_l", band.map(|b| b.z_l).into()),
            ])
        }
    })
}

fn default_state_grid(model: Model) -> Grid {
    match model {
        Model::Diffusion => Grid { lo: -4.0, hi: 4.0, n: 161 },
        _ => Grid { lo: 0.01, hi: 0.99, n: 99 },
    }
}

/// Policy at `--state`, or over `state_grid`. Poisson and two-source states
/// are upper beliefs `p̄`; diffusion states are log-odds centres `z`.
pub fn policy(cfg: &RunConfig, state: Option<f64>) -> Out {
    let states = match state {
        Some(s) if !s.is_finite() => return Err(Failure::config("--state must be finite")),
        Some(s) => vec![s],
        None => cfg.state_grid.unwrap_or(default_state_grid(cfg.model)).points(),
    };
    if cfg.model != Model::Diffusion && states.iter().any(|&p| !(0.0 < p && p < 1.0)) {
        return Err(Failure::config("belief states must lie in (0, 1)"));
    }
    let d = cfg.ambiguity();
    match cfg.model {
        Model::Poisson => {
            let sol = poisson_solution(cfg)?;
            let mut t = Table::new(&["p_bar", "p_lower", "region", "region_number", "m", "nu", "rho", "pi", "value"]);
            for p in states {
                let pp = sol.policy(p);
                t.push(vec![
                    p.into(),
                    sol.p_lower(p).into(),
                    text(pp.region),
                    (pp.region.number() as usize).into(),
                    pp.m.into(),
                    pp.nu.into(),
                    pp.rho.into(),
                    pp.pi.into(),
                    sol.value(p).into(),
                ]);
            }
            Ok(t)
        }
        Model::Twosource => {
            let m = TwoSourceModel::new(&cfg.two_source_spec()?)?;
            let mut t = Table::new(&["p_bar", "region", "alpha", "m", "nu", "rho", "pi", "value"]);
            for p in states {
                let pp = m.policy(p, d);
                t.push(vec![p.into(), text(pp.region), pp.alpha.into(), pp.m.into(), pp.nu.into(), pp.rho.into(), pp.pi.into(), m.value(p, d).into()]);
            }
            Ok(t)
        }
        Model::Diffusion => {
            let sol = diffusion_solution(cfg)?;
            let mut t = Table::new(&["z", "m", "nu", "rho", "zeta", "v_r", "v_l"]);
            for z in states {
                let pp = sol.policy(z);
                let c = sol.cond(z);
                t.push(vec![z.into(), pp.m.into(), pp.nu.into(), pp.rho.into(), pp.zeta.into(), c.r.into(), c.l.into()]);
            }
            Ok(t)
        }
    }
}

fn time_points(cfg: &RunConfig, laws: &[&StoppingDistribution]) -> Vec<f64> {
    cfg.time_grid
        .unwrap_or_else(|| {
            let h = laws.iter().map(|l| l.horizon()).fold(0.0, f64::max);
            let hi = if h > 0.0 && h.is_finite() { 1.5 * h } else { 10.0 };
            Grid { lo: 0.0, hi, n: 201 }
        })
        .points()
}

pub fn cdf(cfg: &RunConfig) -> Out {
    let sol = poisson_solution(cfg)?;
    let law = stopping_cdf(&sol, cfg.p_bar0()?, cfg.conditioning())?;
    let mut t = Table::new(&["t", "cdf", "cdf_left"]);
    for x in time_points(cfg, &[&law]) {
        t.push(vec![x.into(), law.cdf(x).into(), law.cdf_left(x).into()]);
    }
    Ok(t)
}

/// Bayesian (no ambiguity), naive and sophisticated stopping laws on one time grid.
pub fn cdf_compare(cfg: &RunConfig) -> Out {
    let sol = poisson_solution(cfg)?;
    let p0 = cfg.p_bar0()?;
    let cond = if cfg.omega.is_none() && cfg.theta.is_none() { Conditioning::State(Omega::L) } else { cfg.conditioning() };
    // The Bayesian reference starts from the centre of the prior set.
    let centre = sigmoid(llr(p0) - 0.5 * sol.delta);
    let bayes = stopping_cdf(&solve(&sol.spec, 0.0)?, centre, cond)?;
    let naive = naive_cdf(&sol, p0, cond)?;
    let soph = stopping_cdf(&sol, p0, cond)?;
    let mut t = Table::new(&["t", "bayesian", "naive", "sophisticated"]);
    for x in time_points(cfg, &[&bayes, &naive, &soph]) {
        t.push(vec![x.into(), bayes.cdf(x).into(), naive.cdf(x).into(), soph.cdf(x).into()]);
    }
    Ok(t)
}

pub fn simulate(cfg: &RunConfig, exec: Exec) -> Out {
    let sol = poisson_solution(cfg)?;
    let theta = cfg.theta.ok_or_else(|| Failure::config("theta (probability of state R) is required for simulate"))?;
    let paths = simulate_with(&sol, cfg.p_bar0()?, theta, cfg.n_paths()?, cfg.seed()?, exec)?;
    let mut t = Table::new(&["index", "omega", "breakthrough", "action", "stop_time"]);
    for s in paths {
        let action = match s.action {
            Action::L => "l",
            Action::R => "r",
        };
        t.push(vec![(s.index as usize).into(), text(s.omega), s.breakthrough.into(), action.into(), s.stop_time.into()]);
    }
    Ok(t)
}

/// Expected learning time against the centre θ of the prior set, one column
/// per ambiguity level in `delta_grid` plus the Knightian limit.
pub fn learning_time(cfg: &RunConfig, theta_grid: Option<Grid>) -> Out {
    require(cfg, Model::Poisson, "learning-time")?;
    let spec = cfg.payoff_spec()?;
    let thetas = theta_grid.or(cfg.theta_grid).unwrap_or(Grid { lo: 0.05, hi: 0.95, n: 91 }).points();
    if thetas.iter().any(|&x| !(0.0 < x && x < 1.0)) {
        return Err(Failure::config("theta grid must lie in (0, 1)"));
    }
    let deltas = cfg.deltas();
    let mut curves = Vec::new();
    for &d in &deltas {
        curves.push(learning_time_curve(&solve(&spec, d)?, &thetas)?);
    }
    let names: Vec<String> = deltas.iter().map(|d| format!("T_delta_{d}")).collect();
    let mut cols: Vec<&str> = vec!["theta"];
    cols.extend(names.iter().map(String::as_str));
    cols.push("T_knightian");
    let mut t = Table::new(&cols);
    for (i, &th) in thetas.iter().enumerate() {
        let mut row: Vec<Cell> = vec![th.into()];
        row.extend(curves.iter().map(|c| Cell::Num(c[i])));
        row.push(knightian_learning_time(&spec, th)?.into());
        t.push(row);
    }
    Ok(t)
}

pub fn sweep_delta(cfg: &RunConfig) -> Out {
    require(cfg, Model::Poisson, "sweep-delta")?;
    let spec = cfg.payoff_spec()?;
    let p0 = cfg.p_bar0.or(cfg.prior.map(|p| p[1]));
    let mut t = Table::new(&["delta", "regime", "case", "p1", "p2", "p3", "p4", "mixing", "hedge_band", "knightian", "value_at_p_bar0"]);
    for d in cfg.deltas() {
        let sol = solve(&spec, d)?;
        t.push(vec![
            d.into(),
            text(sol.regime),
            text(sol.case),
            sol.p1.into(),
            sol.p2.into(),
            sol.p3.into(),
            sol.p4.into(),
            sol.mixing.into(),
            sol.hedge_band.into(),
            sol.knightian.is_some().into(),
            p0.map(|p| sol.value(p)).into(),
        ]);
    }
    Ok(t)
}

/// No-news path of the upper belief under equilibrium attention, with the
/// policy along it. Horizon and step come from `time_grid`.
pub fn two_source(cfg: &RunConfig) -> Out {
    require(cfg, Model::Twosource, "two-source")?;
    let m = TwoSourceModel::new(&cfg.two_source_spec()?)?;
    let d = cfg.ambiguity();
    let g = cfg.time_grid.unwrap_or(Grid { lo: 0.0, hi: 10.0, n: 1001 });
    if g.lo != 0.0 || g.n < 2 {
        return Err(Failure::config("two-source needs a time_grid starting at 0 with n >= 2"));
    }
    let dt = (g.hi - g.lo) / (g.n - 1) as f64;
    let mut t = Table::new(&["t", "p_bar", "p_lower", "region", "alpha", "m", "nu", "rho", "value"]);
    for (time, p) in m.interval_path(cfg.p_bar0()?, d, g.hi, dt) {
        let pp = m.policy(p, d);
        t.push(vec![
            time.into(),
            p.into(),
            sigmoid(llr(p) - d).into(),
            text(pp.region),
            pp.alpha.into(),
            pp.m.into(),
            pp.nu.into(),
            pp.rho.into(),
            m.value(p, d).into(),
        ]);
    }
    Ok(t)
}

/// First-passage Monte Carlo of the conditional values at `z0` against the
/// closed-form solution.
pub fn diffusion_cmd(cfg: &RunConfig, exec: Exec) -> Out {
    require(cfg, Model::Diffusion, "diffusion")?;
    let sol = diffusion_solution(cfg)?;
    if sol.regime != DiffusionRegime::SmallDelta {
        return Err(Failure::unsupported("first-passage simulation covers the small-ambiguity regime only"));
    }
    let z0 = cfg.z0.unwrap_or(0.0);
    let (n, seed) = (cfg.n_paths()?, cfg.seed()?);
    let exact = sol.cond(z0);
    let mut t = Table::new(&["omega", "closed_form", "mc_mean", "mc_std_err", "z_score", "n_paths"]);
    for (name, omega, v) in [("R", Omega::R, exact.r), ("L", Omega::L, exact.l)] {
        let mc = diffusion::first_passage_value(&sol, z0, omega, n, seed, exec)?;
        t.push(vec![name.into(), v.into(), mc.mean.into(), mc.std_err.into(), ((mc.mean - v) / mc.std_err).into(), mc.n_paths.into()]);
    }
    Ok(t)
}

struct Report {
    table: Table,
    ok: bool,
}

impl Report {
    fn new() -> Self {
        Report { table: Table::new(&["check", "measured", "tolerance", "pass"]), ok: true }
    }

    /// Records `measured <= tolerance`.
    fn at_most(&mut self, name: &str, measured: f64, tolerance: f64) {
        let pass = measured <= tolerance;
        self.ok &= pass;
        self.table.push(vec![name.into(), measured.into(), tolerance.into(), pass.into()]);
    }

    /// Records `measured > bound`.
    fn above(&mut self, name: &str, measured: f64, bound: f64) {
        let pass = measured > bound;
        self.ok &= pass;
        self.table.push(vec![name.into(), measured.into(), bound.into(), pass.into()]);
    }

    fn finish(self) -> Out {
        if self.ok {
            Ok(self.table)
        } else {
            Err(Failure { code: EXIT_VERIFY, message: "verification failed".into(), table: Some(self.table) })
        }
    }
}

pub fn verify(cfg: &RunConfig, exec: Exec) -> Out {
    match cfg.model {
        Model::Poisson => verify_poisson(cfg, exec),
        Model::Twosource => verify_two_source(cfg),
        Model::Diffusion => verify_diffusion(cfg),
    }
}

fn verify_poisson(cfg: &RunConfig, exec: Exec) -> Out {
    let sol = poisson_solution(cfg)?;
    if sol.regime == CostRegime::High {
        return Err(Failure::from(Error::NoExperimentation));
    }
    let mut r = Report::new();

    let (lo, hi) = (llr(sol.p1).max(-20.0) - 1.0, llr(sol.p4).min(20.0) + 1.0);
    let states: Vec<f64> = match cfg.state_grid {
        Some(g) => g.points(),
        None => (0..1000).map(|i| sigmoid(lo + (hi - lo) * i as f64 / 999.0)).collect(),
    };
    let hjb = hjb_suite(&sol, &states, exec);
    let max_g = hjb.iter().map(|h| h.g_sigma.abs()).fold(0.0, f64::max);
    r.at_most("hjb_max_abs_g", max_g, ambistop::oracle::HJB_TOL);
    r.at_most("hjb_failed_states", hjb.iter().filter(|h| !h.pass).count() as f64, 0.0);
    let mut regions: Vec<u8> = hjb.iter().map(|h| h.region.number()).collect();
    regions.sort_unstable();
    regions.dedup();
    r.table.push(vec!["regions_visited".into(), regions.len().into(), Cell::Missing, true.into()]);

    let quad = states
        .iter()
        .map(|&p| {
            let (q, c) = (conditional_values_by_quadrature(&sol, p), sol.cond_values(p));
            (q.r - c.r).abs().max((q.l - c.l).abs())
        })
        .fold(0.0, f64::max);
    r.at_most("quadrature_vs_closed_form", quad, 1e-6);

    let grid = DiscreteGameGrid::covering(&sol, 1e-3);
    let d = discrete_saddle_solve(&sol.spec, sol.delta, &grid)?;
    r.at_most("discrete_game_sup_gap", d.sup_gap(&sol), 2e-2);
    r.at_most("discrete_game_duality_gap", d.max_duality_gap, 1e-9);
    let h = grid.step();
    match (sol.mixing, d.mixing_band()) {
        (true, Some((a, b))) => r.at_most("mixing_band_edge_cells", ((a - llr(sol.p2)).abs() / h).max((b - llr(sol.p3)).abs() / h), 2.0),
        (true, None) => r.at_most("mixing_band_edge_cells", f64::INFINITY, 2.0),
        (false, Some((a, b))) => r.at_most("spurious_band_cells", (b - a) / h, 2.0),
        (false, None) => {}
    }
    r.finish()
}

fn verify_two_source(cfg: &RunConfig) -> Out {
    let spec = cfg.two_source_spec()?;
    spec.regime()?;
    let mut r = Report::new();
    let e2 = std::f64::consts::E.powi(2);
    r.at_most("c_lower_star_formula", (spec.c_lower_star() - spec.lambda * spec.delta / (1.0 + e2)).abs(), 1e-12);
    r.at_most("u_star_formula", (spec.u_star() - (spec.delta - 2.0 * spec.c / spec.lambda)).abs(), 1e-12);

    let dp = TwoSourceBayes::solve(&spec)?;
    let single = BayesBenchmark::new(&spec.single_source()?);
    let shortfall = dp.z.iter().map(|&z| single.phi_star(sigmoid(z)) - dp.value_at(sigmoid(z))).fold(f64::NEG_INFINITY, f64::max);
    r.at_most("single_source_minus_two_source", shortfall, 2e-2);

    let m = TwoSourceModel::new(&spec)?;
    let d = cfg.ambiguity();
    let mut moved: f64 = 0.0;
    for i in 1..50 {
        let p = i as f64 / 50.0;
        let pol = m.policy(p, d);
        if pol.region == twosource::TwoSourceRegion::SplitAttention {
            let path = m.interval_path(p, d, 5.0, 1e-2);
            moved = path.iter().map(|&(_, q)| (q - p).abs()).fold(moved, f64::max);
        }
    }
    r.at_most("split_attention_drift", moved, 1e-12);
    r.finish()
}

fn verify_diffusion(cfg: &RunConfig) -> Out {
    let sol = diffusion_solution(cfg)?;
    let mut r = Report::new();
    r.at_most("boundary_symmetry", (sol.z_r + sol.z_l).abs(), 1e-9);
    r.above("inner_margin", -(sol.z_l + 0.5 * sol.delta), 0.0);
    r.above("bayes_margin", sol.z_l + 0.5 * sol.delta - sol.bayes.z_l_b, 0.0);
    let spec = sol.spec;
    let pasting = [sol.bayes.z_l_b, sol.bayes.z_r_b]
        .iter()
        .map(|&z| (sol.bayes.value(z) - spec.u_max(z)).abs())
        .fold(0.0, f64::max);
    r.at_most("bayes_value_matching", pasting, 1e-9);
    r.finish()
}
