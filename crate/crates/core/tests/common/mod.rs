#![allow(dead_code)]

use ambistop::PayoffSpec;

/// Symmetric reference spec: delta = 1, c = 0.1, lambda = 1.
pub fn c0() -> PayoffSpec {
    PayoffSpec::symmetric(1.0, 0.1, 1.0).unwrap()
}

/// Large left payoff puts the Bayesian minimiser at the right boundary.
pub fn case2() -> PayoffSpec {
    PayoffSpec::new(1.0, 0.0, 0.0, 2.0, 0.1, 1.0).unwrap()
}

pub fn asymmetric() -> PayoffSpec {
    PayoffSpec::new(2.0, 0.0, 0.0, 1.0, 0.1, 1.0).unwrap()
}

/// Log-odds grid of `n` beliefs on `[sigmoid(a), sigmoid(b)]`.
pub fn llr_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| ambistop::model::sigmoid(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// Discrete-time Bayesian value iteration on a uniform belief grid: in each
/// step of length `dt` a breakthrough arrives with probability
/// `p (1 - e^{-lambda dt})`; otherwise the belief drifts to its posterior.
/// Values off the grid are interpolated linearly in `p`.
pub fn bayes_value_iteration(spec: &PayoffSpec, n: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let ps: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let h = 1.0 / (n - 1) as f64;
    let e = (-spec.lambda * dt).exp();
    let mut v = vec![0.0; n];
    v[0] = spec.u_l(0.0).max(spec.u_r(0.0));
    for i in 1..n {
        let p = ps[i];
        let stop = spec.u_l(p).max(spec.u_r(p));
        if i == n - 1 {
            v[i] = stop;
            continue;
        }
        let no_news = p * e + 1.0 - p;
        let next = p * e / no_news;
        // Paths with news pay until arrival, the others pay for the whole step.
        let cost = p * spec.c * (1.0 - e) / spec.lambda + (1.0 - p) * spec.c * dt;
        let gain = p * (1.0 - e) * spec.u_r_R - cost;
        let j = ((next / h).floor() as usize).min(i - 1);
        let w = (next - ps[j]) / h;
        // next lies in [ps[j], ps[j+1]]; when j + 1 == i the node refers to itself.
        let cont = if j + 1 == i {
            let a = gain + no_news * (1.0 - w) * v[j];
            let s = no_news * w;
            a / (1.0 - s)
        } else {
            gain + no_news * ((1.0 - w) * v[j] + w * v[j + 1])
        };
        v[i] = cont.max(stop);
    }
    (ps, v)
}
