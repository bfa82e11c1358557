use ambistop::diffusion::{
    bayes_boundaries_z, first_passage_value, mixed_region_solution, small_delta_boundaries, solve, DiffusionRegime, DiffusionSpec,
};
use ambistop::dynamics::Omega;
use ambistop::model::sigmoid;
use ambistop::numerics::dopri;
use ambistop::{Error, Exec};

fn spec() -> DiffusionSpec {
    DiffusionSpec::from_psi(1.0, 1.0, 0.05).unwrap()
}

/// Bayesian value by shooting from `z = 0` with `V'(0) = 0`: bisect on
/// `V(0)` until the path just touches `U_r`. Returns `(V(0), z_r)`.
fn shoot_bayes(s: &DiffusionSpec) -> (f64, f64) {
    let k = s.k();
    let zs: Vec<f64> = (1..=24_000).map(|i| 6.0 * i as f64 / 24_000.0).collect();
    let path = |v0: f64| dopri(|z, y: &[f64; 2]| [y[1], k - (z / 2.0).tanh() * y[1]], 0.0, [v0, 0.0], &zs, 1e-12, 1e-13).unwrap();
    let gap = |v0: f64| path(v0).iter().zip(&zs).map(|(y, &z)| y[0] - s.u_r(z)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (s.delta / 2.0, s.delta);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if gap(m) < 0.0 {
            lo = m
        } else {
            hi = m
        }
    }
    // Tangency: where the slopes agree.
    let ys = path(hi);
    let i = ys.iter().zip(&zs).position(|(y, &z)| y[1] >= s.delta * sigmoid(z) * (1.0 - sigmoid(z))).unwrap();
    (hi, zs[i])
}

/// Bayes-consistent binomial lattice: a step of `h` in log-odds has
/// probability `(1 ± a)/2` in state R/L with `a = tanh(h/2)`, and one step
/// carries as much information as `dt = h²/psi²` of the diffusion. Solved
/// by policy iteration with a tridiagonal evaluation step.
fn lattice_bayes(s: &DiffusionSpec, h: f64, z_max: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (2.0 * z_max / h).round() as usize + 1;
    let z: Vec<f64> = (0..n).map(|i| -z_max + h * i as f64).collect();
    let a = (h / 2.0).tanh();
    let dt = h * h / s.psi().powi(2);
    let up: Vec<f64> = z.iter().map(|&x| 0.5 + a * (sigmoid(x) - 0.5)).collect();
    let stop: Vec<f64> = z.iter().map(|&x| s.u_max(x)).collect();
    let mut cont = vec![false; n];
    let mut v = stop.clone();
    loop {
        // V_i - u V_{i+1} - (1-u) V_{i-1} = -c dt where continuing.
        let (mut lo, mut di, mut hi_, mut r) = (vec![0.0; n], vec![1.0; n], vec![0.0; n], stop.clone());
        for i in 1..n - 1 {
            if cont[i] {
                lo[i] = -(1.0 - up[i]);
                hi_[i] = -up[i];
                r[i] = -s.c * dt;
            }
        }
        for i in 1..n {
            let f = lo[i] / di[i - 1];
            di[i] -= f * hi_[i - 1];
            r[i] -= f * r[i - 1];
        }
        v[n - 1] = r[n - 1] / di[n - 1];
        for i in (0..n - 1).rev() {
            v[i] = (r[i] - hi_[i] * v[i + 1]) / di[i];
        }
        let mut changed = false;
        for i in 1..n - 1 {
            let c = -s.c * dt + up[i] * v[i + 1] + (1.0 - up[i]) * v[i - 1];
            let want = if cont[i] { c >= stop[i] - 1e-14 } else { c > stop[i] + 1e-14 };
            if want != cont[i] {
                cont[i] = want;
                changed = true;
            }
        }
        if !changed {
            return (z, v);
        }
    }
}

#[test]
fn bayes_closed_form_matches_shooting() {
    for s in [spec(), DiffusionSpec::from_psi(2.0, 1.0, 0.2).unwrap(), DiffusionSpec::from_psi(1.5, 2.0, 0.02).unwrap()] {
        let b = bayes_boundaries_z(&s).unwrap();
        let (v0, z_r) = shoot_bayes(&s);
        assert!((b.m - v0).abs() < 1e-9, "{s:?}: {} vs {v0}", b.m);
        assert!((b.z_r_b - z_r).abs() < 3e-3, "{s:?}: {} vs {z_r}", b.z_r_b);
        assert_eq!(b.z_l_b, -b.z_r_b);
    }
}

#[test]
fn bayes_matches_binomial_lattice() {
    let s = spec();
    let b = bayes_boundaries_z(&s).unwrap();
    let (z, v) = lattice_bayes(&s, 0.01, 5.0);
    let gap = z.iter().zip(&v).map(|(&x, &y)| (y - b.value(x)).abs()).fold(0.0, f64::max);
    assert!(gap < 2e-2, "{gap}");
    // First continuation node on the right sits at the boundary.
    let edge = z.iter().zip(&v).filter(|(&x, &y)| x > 0.0 && y > s.u_r(x) + 1e-12).map(|(&x, _)| x).fold(0.0, f64::max);
    assert!((edge - b.z_r_b).abs() < 2e-2, "{edge} vs {}", b.z_r_b);
}

#[test]
fn bayes_value_solves_ode_and_pastes() {
    let s = spec();
    let b = bayes_boundaries_z(&s).unwrap();
    let psi2 = s.psi().powi(2);
    for i in 1..200 {
        let z = b.z_l_b + (b.z_r_b - b.z_l_b) * i as f64 / 200.0;
        let h = 1e-4;
        let d2 = (b.value(z + h) - 2.0 * b.value(z) + b.value(z - h)) / (h * h);
        let res = s.c - psi2 * (sigmoid(z) - 0.5) * b.deriv(z) - psi2 / 2.0 * d2;
        assert!(res.abs() < 1e-7, "{z}: {res}");
        assert!(b.value(z) >= s.u_max(z));
    }
    assert!((b.value(b.z_r_b) - s.u_r(b.z_r_b)).abs() < 1e-12);
    let h = 1e-7;
    assert!(((b.value(b.z_r_b - h) - b.value(b.z_r_b - 2.0 * h)) / h - b.deriv(b.z_r_b + 1e-12)).abs() < 1e-5);
}

#[test]
fn kink_keeps_learning_worthwhile() {
    // Near the kink of U_max a short look always pays, so the region shrinks
    // with the cost but never vanishes.
    let mut prev = f64::INFINITY;
    for c in [0.5, 2.0, 10.0, 100.0] {
        let b = bayes_boundaries_z(&DiffusionSpec::from_psi(1.0, 1.0, c).unwrap()).unwrap();
        assert!(0.0 < b.z_r_b && b.z_r_b < prev && b.m > 0.5);
        prev = b.z_r_b;
    }
    assert!(DiffusionSpec::from_psi(-1.0, 1.0, 0.1).is_err());
    assert!(DiffusionSpec::new(0.0, 0.0, 1.0, 1.0, 0.1).is_err());
}

#[test]
fn symmetry_and_ordering() {
    let s = spec();
    let zb = bayes_boundaries_z(&s).unwrap().z_l_b;
    for d in [0.1, 0.5, 1.0, 1.5, 1.7, 1.8, 2.0, 2.3] {
        let sol = solve(&s, d).unwrap();
        assert!((sol.z_r + sol.z_l).abs() < 1e-9);
        assert!(zb < sol.z_l + d / 2.0 && sol.z_l + d / 2.0 < 0.0, "{d}: {}", sol.z_l);
        assert!(0.0 < sol.z_r - d / 2.0 && sol.z_r - d / 2.0 < -zb);
        for i in 1..100 {
            let z = sol.z_l + (sol.z_r - sol.z_l) * i as f64 / 100.0;
            let (a, b) = (sol.cond(z), sol.cond(-z));
            assert!((a.r - b.l).abs() < 1e-9 && (a.l - b.r).abs() < 1e-9, "{d} {z}");
        }
    }
    assert_eq!(small_delta_boundaries(&s, 0.0).unwrap(), (zb, -zb));
}

#[test]
fn small_delta_segment_below_bayes() {
    let s = spec();
    let bayes = bayes_boundaries_z(&s).unwrap();
    let psi2 = s.psi().powi(2);
    for d in [0.3, 1.0, 1.6] {
        let sol = solve(&s, d).unwrap();
        assert_eq!(sol.regime, DiffusionRegime::SmallDelta);
        // The conditional values solve V'' + V' = k and V'' - V' = k.
        let h = 1e-4;
        for i in 1..100 {
            let z = sol.z_l + (sol.z_r - sol.z_l) * i as f64 / 100.0;
            if z >= 0.0 {
                continue;
            }
            let o = &sol.outer;
            let r2 = (o.r(z + h) - 2.0 * o.r(z) + o.r(z - h)) / (h * h);
            let l2 = (o.l(z + h) - 2.0 * o.l(z) + o.l(z - h)) / (h * h);
            assert!((r2 + o.dr(z) - s.k()).abs() < 1e-6 && (l2 - o.dl(z) - s.k()).abs() < 1e-6);
            // Evaluated at the state itself the mixture solves the belief ODE.
            let v = |x: f64| sol.value(x, x);
            let d1 = (v(z + h) - v(z - h)) / (2.0 * h);
            let d2 = (v(z + h) - 2.0 * v(z) + v(z - h)) / (h * h);
            assert!((s.c - psi2 * (sigmoid(z) - 0.5) * d1 - psi2 / 2.0 * d2).abs() < 1e-6);
            for j in 0..=20 {
                let y = z - d / 2.0 + d * j as f64 / 20.0;
                assert!(sol.value(y, z) < bayes.value(y), "{d} {z} {y}");
            }
        }
    }
}

#[test]
fn mixed_band_residuals() {
    let s = spec();
    let psi2 = s.psi().powi(2);
    for d in [1.8, 2.0, 2.3] {
        let band = mixed_region_solution(&s, d).unwrap();
        assert_eq!(band.roots.len(), 1);
        for i in 1..200 {
            let z = -band.b * i as f64 / 200.0;
            let (v, dv) = band.eval(z).unwrap();
            let h = 1e-4;
            let d2 = (band.eval(z + h).unwrap().1 - band.eval(z - h).unwrap().1) / (2.0 * h);
            let res = s.c - psi2 * (v / s.delta - 0.5) * dv - psi2 / 2.0 * d2;
            assert!(res.abs() < 1e-7, "{d} {z}: {res}");
            // Indifference between experimenting and stopping with r at nature's belief.
            assert!((s.u_r(band.zeta(z)) - band.value(z)).abs() < 1e-8);
            assert!((band.value(z) - v).abs() < 1e-8);
            assert!((band.nu(z) + psi2 * dv / s.delta).abs() < 1e-8);
            assert!(band.nu(z) >= 0.0);
            let zeta = band.zeta(z);
            assert!(z - d / 2.0 < zeta && zeta < z + d / 2.0, "{d} {z} {zeta}");
            assert!((band.value(-z) - band.value(z)).abs() < 1e-15 && (band.nu(-z) - band.nu(z)).abs() < 1e-15);
            assert!((band.zeta(-z) + zeta).abs() < 1e-15);
        }
        assert!(dv_monotone(&band.dvhat));
    }
}

fn dv_monotone(dv: &[f64]) -> bool {
    // V̂' < 0 on the left half of the band.
    dv[..dv.len() - 1].iter().all(|&x| x < 0.0)
}

#[test]
fn band_edge_matches_outer_solution() {
    let s = spec();
    let sol = solve(&s, 2.0).unwrap();
    let band = sol.band.as_ref().unwrap();
    let ze = -band.b;
    let zeta = band.zeta(ze + 1e-9);
    let inner = band.value(ze);
    let outer = sol.outer.at(zeta, ze);
    assert!((inner - outer).abs() < 1e-8, "{inner} {outer}");
    assert!((sol.outer.dz_at(zeta, ze) - band.eval(ze).unwrap().1).abs() < 1e-8);
    // Nature's indifference belief reaches the top of the segment at the edge.
    assert!((zeta - (ze + 1.0)).abs() < 1e-8);
    let pol = sol.policy(-0.3);
    assert_eq!((pol.m, pol.rho), (0.0, Some(1.0)));
    assert!(pol.nu > 0.0 && pol.zeta.is_some());
    assert!(sol.policy(0.3).rho == Some(0.0));
    assert!(sol.policy(0.0).zeta.is_none());
    assert_eq!(sol.policy(sol.z_l - 0.1).m, 1.0);
}

#[test]
fn regime_limits() {
    let s = spec();
    assert_eq!(small_delta_boundaries(&s, 2.0), Err(Error::LargeDelta));
    assert!(matches!(solve(&s, 3.0), Err(Error::NoRoot(_))));
    assert!(small_delta_boundaries(&s, -1.0).is_err());
}

#[test]
fn first_passage_small_sample() {
    let s = DiffusionSpec::from_psi(2.0, 1.0, 0.2).unwrap();
    let sol = solve(&s, 1.0).unwrap();
    for (omega, target) in [(Omega::R, sol.cond(0.3).r), (Omega::L, sol.cond(0.3).l)] {
        let est = first_passage_value(&sol, 0.3, omega, 20_000, 11, Exec::default()).unwrap();
        assert!((est.mean - target).abs() < 3.0 * est.std_err, "{omega:?}: {est:?} vs {target}");
        assert_eq!(est.n_paths, 20_000);
    }
    let a = first_passage_value(&sol, 0.3, Omega::R, 2000, 5, Exec::Sequential).unwrap();
    let b = first_passage_value(&sol, 0.3, Omega::R, 2000, 5, Exec::default()).unwrap();
    assert_eq!(a, b);
    assert!(matches!(first_passage_value(&solve(&s, 2.0).unwrap(), 0.0, Omega::R, 100, 1, Exec::Sequential), Err(Error::Unsupported(_))));
}
