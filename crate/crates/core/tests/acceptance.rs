//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one line, and exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ambistop::bayesian::{BayesAction, BayesBenchmark, Case};
use ambistop::diffusion::{self, DiffusionSpec};
use ambistop::dynamics::{knightian_learning_time, ks_distance, learning_time_curve, simulate, single_crossing_check, stopping_cdf, Conditioning, Omega};
use ambistop::equilibrium::{knightian, solve, Region};
use ambistop::model::{llr, sigmoid, AmbiguityInterval, PayoffSpec};
use ambistop::oracle::{discrete_saddle_solve, hjb_suite, DiscreteGameGrid};
use ambistop::twosource::{TwoSourceBayes, TwoSourceModel, TwoSourceRegion, TwoSourceSpec};
use ambistop::Exec;
use common::{asymmetric, c0, case2, llr_grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of one criterion: pass flag and a one-line summary.
struct Verdict {
    pass: bool,
    detail: String,
}

/// Collects named checks; the criterion passes when all of them hold.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failed.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self) -> Verdict {
        let pass = self.failed.is_empty();
        let mut detail = self.notes.join("; ");
        if !pass {
            detail = format!("{detail}; failed: {}", self.failed.join(", "));
        }
        Verdict { pass, detail }
    }
}

fn criterion_1() -> Verdict {
    let mut ck = Checks::default();
    let s = c0();
    for delta in [0.0, 1.0, 2.0] {
        let t0 = Instant::now();
        let sol = solve(&s, delta).unwrap();
        let grid = DiscreteGameGrid::covering(&sol, 1e-3);
        let d = discrete_saddle_solve(&s, delta, &grid).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let gap = d.sup_gap(&sol);
        let h = grid.step();
        ck.check(grid.n_points >= 2000, format!("grid points {} at delta {delta}", grid.n_points));
        ck.check(gap <= 2e-2, format!("sup gap {gap:.2e} at delta {delta}"));
        ck.check(secs <= 120.0, format!("runtime {secs:.1}s at delta {delta}"));
        let band = match (sol.mixing, d.mixing_band()) {
            (true, Some((a, b))) => {
                let (ea, eb) = ((a - llr(sol.p2)).abs() / h, (b - llr(sol.p3)).abs() / h);
                ck.check(ea <= 2.0 && eb <= 2.0, format!("band edges off by {ea:.1}, {eb:.1} cells at delta {delta}"));
                format!("band edge error {:.1}/{:.1} cells", ea, eb)
            }
            (false, None) => "no band, as predicted".to_string(),
            (false, Some((a, b))) => {
                let w = (b - a) / h;
                ck.check(w <= 2.0, format!("spurious band of {w:.1} cells at delta {delta}"));
                format!("band of {w:.1} cells where none is predicted")
            }
            (true, None) => {
                ck.check(false, format!("band missing at delta {delta}"));
                "band missing".to_string()
            }
        };
        ck.note(format!("delta {delta}: sup gap {gap:.2e}, {band}, {secs:.1}s"));
    }
    ck.finish()
}

fn criterion_2() -> Verdict {
    let mut ck = Checks::default();
    let specs = [
        ("C0 delta 2", c0(), 2.0),
        ("asymmetric delta 2", asymmetric(), 2.0),
        ("Case 2 delta 1", case2(), 1.0),
        ("c 0.05 delta 3", c0().with_cost(0.05), 3.0),
        ("c 0.3 delta 4", c0().with_cost(0.3), 4.0),
    ];
    let mut any_case2 = false;
    for (name, s, d) in specs {
        let sol = solve(&s, d).unwrap();
        any_case2 |= sol.case == Case::Case2;
        let states = llr_grid(llr(sol.p1) - 1.0, llr(sol.p4) + 1.0, 1000);
        let reports = hjb_suite(&sol, &states, Exec::default());
        let fails = reports.iter().filter(|r| !r.pass).count();
        let g = reports.iter().map(|r| r.g_sigma.abs()).fold(0.0, f64::max);
        let mut seen = [false; 5];
        for r in &reports {
            seen[r.region.number() as usize - 1] = true;
        }
        let regions: Vec<String> = (1..=5).filter(|i| seen[i - 1]).map(|i| i.to_string()).collect();
        ck.check(fails == 0 && g < 1e-6, format!("{name}: {fails} failing states, max |G| {g:.1e}"));
        if name == "C0 delta 2" {
            ck.check(seen.iter().all(|&x| x), "C0 delta 2 does not reach all five regions");
        }
        ck.note(format!("{name}: max |G| {g:.1e}, regions {}", regions.join("")));
    }
    ck.check(any_case2, "no Case-2 spec");
    ck.finish()
}

fn criterion_3() -> Verdict {
    let mut ck = Checks::default();
    let s = c0();
    let k = knightian(&s);
    let nu = k.nu_tilde;
    let lhs = s.u_l_L - s.c / nu;
    let rhs = s.lambda / (nu + s.lambda) * s.u_r_R + nu / (nu + s.lambda) * s.u_l_R - s.c / (nu + s.lambda);
    ck.check((lhs - rhs).abs() < 1e-10, format!("stationary identity gap {:.1e}", (lhs - rhs).abs()));
    ck.check((lhs - 0.683772).abs() < 1e-6, format!("stationary value {lhs}"));
    ck.note(format!("stationary: {lhs:.6} vs {rhs:.6}"));

    let sol = solve(&s, 2.0).unwrap();
    let mut worst: f64 = 0.0;
    for p in llr_grid(llr(sol.p2) + 1e-6, llr(sol.p3) - 1e-6, 200) {
        let (v, _, pi) = sol.region3_value(p).unwrap();
        worst = worst.max((s.u_l(pi) - v).abs());
    }
    ck.check(worst < 1e-10, format!("indifference gap {worst:.1e}"));
    ck.note(format!("band indifference {worst:.1e}"));

    let s2 = case2();
    let sol2 = solve(&s2, 1.0).unwrap();
    let pp = sol2.policy(sol2.p2);
    let slope = pp.m * s2.du_r() + (1.0 - pp.m) * sol2.bayes.phi_prime(sol2.p2);
    ck.check(sol2.case == Case::Case2 && pp.region == Region::Atom && 0.0 < pp.m && pp.m < 1.0, "Case-2 atom missing");
    ck.check(slope.abs() < 1e-10, format!("atom slope {slope:.1e}"));
    ck.note(format!("atom m = {:.4}, slope {:.1e}", pp.m, slope.abs()));
    ck.finish()
}

fn criterion_4() -> Verdict {
    let mut ck = Checks::default();
    // Same-centre nested pairs where the larger set randomizes: Q has a
    // mixing band and starts in it or in the experimentation band above it,
    // and P starts by experimenting. Five pairs per cost level.
    let widths = [(0.0, 2.0), (1.0, 2.0), (1.0, 3.0), (2.0, 3.0), (0.0, 3.0), (0.5, 2.5), (0.5, 1.5)];
    let centres = [0.35, 0.45, 0.55, 0.65, 0.4, 0.5, 0.6];
    let mut total = 0;
    let mut worst = 0;
    for c in [0.05, 0.1, 0.15, 0.2] {
        let s = c0().with_cost(c);
        let b = BayesBenchmark::new(&s);
        // Phi'(p_star) is zero at an interior minimum, up to the root tolerance.
        ck.check(c <= s.c_lower() && b.phi_prime(b.p_star) >= -1e-9 && b.case == Case::Case1, format!("c {c} out of scope"));
        let mut taken = 0;
        'outer: for (i, &(a, w)) in widths.iter().enumerate() {
            for &th in &centres[i % 3..] {
                if taken == 5 {
                    break 'outer;
                }
                let p = AmbiguityInterval::centered(th, a).unwrap();
                let q = AmbiguityInterval::centered(th, w).unwrap();
                let sp = solve(&s, a).unwrap();
                let sq = solve(&s, w).unwrap();
                let q_randomizes = sq.mixing && matches!(sq.region(q.p_bar), Region::Mixing | Region::Experiment);
                let p_learns = !matches!(sp.region(p.p_bar), Region::StopL | Region::StopR);
                if !(q_randomizes && p_learns) {
                    continue;
                }
                let r = single_crossing_check(&s, &p, &q).unwrap();
                ck.check(r.sign_changes == 1 && r.verdict, format!("c {c} centre {th} widths ({a}, {w}): {} sign changes", r.sign_changes));
                worst = worst.max(r.sign_changes);
                taken += 1;
                total += 1;
                break;
            }
        }
        ck.check(taken == 5, format!("only {taken} eligible pairs at c {c}"));
    }
    ck.check(total == 20, format!("{total} pairs"));
    ck.note(format!("{total} nested pairs over c in {{0.05, 0.1, 0.15, 0.2}}, max sign changes {worst}, grid 10000 points"));
    ck.finish()
}

/// First index where `hi < lo` before the last centre with `lo > 0`, and
/// the number of sign changes of `hi - lo` on that range.
fn theta_crossing(lo: &[f64], hi: &[f64]) -> (usize, usize) {
    let bar = lo.iter().rposition(|&t| t > 0.0).unwrap() + 1;
    let (mut last, mut changes, mut first) = (0.0f64, 0, bar);
    for i in 0..bar {
        let d = hi[i] - lo[i];
        if d.abs() < 1e-9 {
            continue;
        }
        if last != 0.0 && d.signum() != last {
            changes += 1;
        }
        if d < 0.0 && first == bar {
            first = i;
        }
        last = d.signum();
    }
    (first, changes)
}

fn criterion_5() -> Verdict {
    let mut ck = Checks::default();
    let s = c0();
    let thetas: Vec<f64> = (1..400).map(|i| sigmoid(-3.0 + 6.0 * i as f64 / 400.0)).collect();
    let curves: Vec<Vec<f64>> = [0.0, 1.0, 2.0].iter().map(|&d| learning_time_curve(&solve(&s, d).unwrap(), &thetas).unwrap()).collect();
    let mut hats = Vec::new();
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let (hat, changes) = theta_crossing(&curves[a], &curves[b]);
        let above = curves[b][..hat].iter().zip(&curves[a][..hat]).all(|(x, y)| x >= y);
        ck.check(changes <= 1 && above, format!("deltas {a},{b}: {changes} crossings"));
        hats.push(format!("({a},{b}) at {:.3}", thetas[hat.min(thetas.len() - 1)]));
    }
    let (_, interior) = theta_crossing(&curves[1], &curves[2]);
    ck.check(interior == 1, "deltas 1,2 do not cross inside");

    let k = knightian(&s);
    let kn: Vec<f64> = thetas.iter().map(|&t| t / (s.lambda + k.nu_tilde) + (1.0 - t) / k.nu_tilde).collect();
    let rec_gap = thetas.iter().zip(&kn).map(|(&t, &v)| (knightian_learning_time(&s, t).unwrap() - v).abs()).fold(0.0, f64::max);
    ck.check(rec_gap < 1e-12, format!("Knightian closed form off by {rec_gap:.1e}"));
    ck.check(kn.windows(2).all(|w| w[1] < w[0]), "Knightian curve not decreasing");

    let t0 = &curves[0];
    let peak = (0..t0.len()).max_by(|&i, &j| t0[i].total_cmp(&t0[j])).unwrap();
    let rises = t0[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let falls = t0[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12);
    ck.check(rises && falls && peak > 0 && peak + 1 < t0.len() && t0[0] < t0[peak] && *t0.last().unwrap() < t0[peak], "Bayesian curve not single-peaked");
    ck.note(format!("crossings {}; Bayesian peak at theta {:.3}; Knightian decreasing", hats.join(", "), thetas[peak]));
    ck.finish()
}

fn criterion_6() -> Verdict {
    let mut ck = Checks::default();
    let sol = solve(&c0(), 2.0).unwrap();
    for (omega, theta, seed) in [(Omega::L, 0.0, 6), (Omega::R, 1.0, 7)] {
        let t0 = Instant::now();
        let paths = simulate(&sol, 0.7, theta, 100_000, seed).unwrap();
        let times: Vec<f64> = paths.iter().map(|p| p.stop_time).collect();
        let law = stopping_cdf(&sol, 0.7, Conditioning::State(omega)).unwrap();
        let ks = ks_distance(&times, |t| law.cdf(t), |t| law.cdf_left(t));
        let secs = t0.elapsed().as_secs_f64();
        ck.check(ks < 0.01, format!("{omega:?}: KS {ks:.4}"));
        ck.check(secs <= 30.0, format!("{omega:?}: {secs:.1}s"));
        ck.note(format!("{omega:?}: KS {ks:.4} in {secs:.2}s"));
    }
    ck.finish()
}

fn criterion_7() -> Verdict {
    let mut ck = Checks::default();
    let e2 = std::f64::consts::E.powi(2);
    let mut formula_gap: f64 = 0.0;
    for (d, c, l) in [(1.0, 0.2, 1.0), (1.0, 0.1, 1.0), (2.0, 0.3, 0.7), (0.5, 0.01, 4.0)] {
        let s = TwoSourceSpec::new(d, c, l).unwrap();
        formula_gap = formula_gap.max((s.c_lower_star() - l * d / (1.0 + e2)).abs());
        formula_gap = formula_gap.max((s.u_star() - (d - 2.0 * c / l)).abs());
    }
    ck.check(formula_gap < 1e-12, format!("threshold formulas off by {formula_gap:.1e}"));

    // Sets straddling 1/2 under split attention stay put until news arrives.
    let mut moved: f64 = 0.0;
    let mut checked = 0;
    for c in [0.1, 0.2] {
        let m = TwoSourceModel::new(&TwoSourceSpec::new(1.0, c, 1.0).unwrap()).unwrap();
        for (pb, d) in [(0.55, 0.5), (0.7, 1.5), (0.9, 3.0), (0.99, 6.0)] {
            if m.policy(pb, d).region != TwoSourceRegion::SplitAttention {
                continue;
            }
            let path = m.interval_path(pb, d, 10.0, 1e-3);
            ck.check(path.len() == 10_001, format!("split path stopped early at ({pb}, {d})"));
            moved = moved.max(path.iter().map(|&(_, p)| (p - pb).abs()).fold(0.0, f64::max));
            checked += 1;
        }
    }
    ck.check(checked >= 5 && moved < 1e-15, format!("{checked} split sets, largest move {moved:.1e}"));

    let mut worst = f64::INFINITY;
    for c in [0.05, 0.1, 0.2, 0.3, 0.45] {
        let s = TwoSourceSpec::new(1.0, c, 1.0).unwrap();
        let dp = TwoSourceBayes::solve(&s).unwrap();
        let single = BayesBenchmark::new(&s.single_source().unwrap());
        for (&z, &v) in dp.z.iter().zip(&dp.value) {
            worst = worst.min(v - single.phi_star(sigmoid(z)));
        }
    }
    ck.check(worst >= -2e-2, format!("two-source value below single-source by {:.1e}", -worst));
    ck.note(format!("formulas within {formula_gap:.1e}; {checked} split sets fixed over t in [0, 10]; min(two-source - single) {worst:.2e}"));
    ck.finish()
}

fn criterion_8() -> Verdict {
    let mut ck = Checks::default();
    let s = DiffusionSpec::from_psi(1.0, 1.0, 0.05).unwrap();
    let zb = diffusion::bayes_boundaries_z(&s).unwrap().z_l_b;
    let mut sym: f64 = 0.0;
    for d in [0.0, 0.5, 1.0, 1.5, 1.8, 2.0, 2.3] {
        let sol = diffusion::solve(&s, d).unwrap();
        sym = sym.max((sol.z_r + sol.z_l).abs());
        let inner = sol.z_l + d / 2.0;
        ck.check(d == 0.0 || (zb < inner && inner < 0.0), format!("ordering fails at delta {d}: {inner}"));
    }
    ck.check(sym < 1e-9, format!("asymmetry {sym:.1e}"));

    let psi2 = s.psi().powi(2);
    let (mut ode, mut ind): (f64, f64) = (0.0, 0.0);
    for d in [1.8, 2.0, 2.3] {
        let band = diffusion::mixed_region_solution(&s, d).unwrap();
        for i in 1..200 {
            let z = -band.b * i as f64 / 200.0;
            let (v, dv) = band.eval(z).unwrap();
            let h = 1e-4;
            let d2 = (band.eval(z + h).unwrap().1 - band.eval(z - h).unwrap().1) / (2.0 * h);
            ode = ode.max((s.c - psi2 * (v / s.delta - 0.5) * dv - psi2 / 2.0 * d2).abs());
            ind = ind.max((s.u_r(band.zeta(z)) - band.value(z)).abs());
        }
    }
    ck.check(ode < 1e-7 && ind < 1e-7, format!("band residuals {ode:.1e} / {ind:.1e}"));

    let ms = DiffusionSpec::from_psi(2.0, 1.0, 0.2).unwrap();
    let sol = diffusion::solve(&ms, 1.0).unwrap();
    let mut mc = Vec::new();
    for (omega, target) in [(Omega::R, sol.cond(0.3).r), (Omega::L, sol.cond(0.3).l)] {
        let est = diffusion::first_passage_value(&sol, 0.3, omega, 100_000, 8, Exec::default()).unwrap();
        let z = (est.mean - target).abs() / est.std_err;
        ck.check(z < 2.0, format!("{omega:?}: MC {:.5} vs {target:.5} is {z:.2} SE off", est.mean));
        mc.push(format!("{omega:?} {z:.2} SE"));
    }
    ck.note(format!("symmetry {sym:.1e}; band ODE {ode:.1e}, indifference {ind:.1e}; first passage {}", mc.join(", ")));
    ck.finish()
}

fn criterion_9() -> Verdict {
    let mut ck = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut vgap, mut mismatches): (f64, usize) = (0.0, 0);
    for _ in 0..10 {
        let urr = rng.random_range(0.5..3.0);
        let ull = rng.random_range(0.5..3.0);
        let ulr = rng.random_range(-0.5..0.3);
        let url = rng.random_range(-0.5..0.3);
        let lambda = rng.random_range(0.3..3.0);
        let base = PayoffSpec::new(urr, ulr, url, ull, 0.1, lambda).unwrap();
        let s = base.with_cost(rng.random_range(0.02..0.95) * base.c_bar());
        let sol = solve(&s, 0.0).unwrap();
        let b = BayesBenchmark::new(&s);
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            vgap = vgap.max((sol.value(p) - b.phi_star(p)).abs());
            // Boundaries themselves are knife edges between actions.
            if [b.p_l_B, b.p_r_B].iter().any(|&x| (llr(x) - llr(p)).abs() < 1e-9) {
                continue;
            }
            let pol = sol.policy(p);
            let same = match b.action(p) {
                BayesAction::StopL => pol.m == 1.0 && pol.rho == Some(0.0),
                BayesAction::StopR => pol.m == 1.0 && pol.rho == Some(1.0),
                BayesAction::Experiment => pol.m == 0.0 && pol.nu == 0.0 && (pol.pi - p).abs() < 1e-15,
            };
            if !same {
                mismatches += 1;
            }
        }
    }
    ck.check(vgap < 1e-9, format!("value gap {vgap:.1e}"));
    ck.check(mismatches == 0, format!("{mismatches} policy mismatches"));
    ck.note(format!("10 random specs, value sup-norm {vgap:.1e}, policy mismatches {mismatches}"));
    ck.finish()
}

fn main() {
    let criteria: [(u8, fn() -> Verdict); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    let start = Instant::now();
    for (n, f) in criteria {
        let t0 = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Verdict { pass: false, detail: format!("panicked: {msg}") }
        });
        let took: Duration = t0.elapsed();
        println!("criterion {n} {} ({}) [{:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail, took.as_secs_f64());
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of 9 passed in {:.1}s", 9 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
