//! Small numerical kernels: bracketed root finding, golden-section search,
//! Gauss-Legendre quadrature and an adaptive Dormand-Prince integrator.

use crate::error::{Error, Result};

/// Bisection on `[a, b]`; `f(a)` and `f(b)` must differ in sign (or one be zero).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoRoot(format!(
            "no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}"
        )));
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Scan `[a, b]` in `n` equal steps and bisect the first sign change.
pub fn first_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize, tol: f64) -> Result<f64> {
    let mut x0 = a;
    let mut f0 = f(a);
    if f0 == 0.0 {
        return Ok(a);
    }
    for i in 1..=n {
        let x1 = a + (b - a) * i as f64 / n as f64;
        let f1 = f(x1);
        if f1 == 0.0 {
            return Ok(x1);
        }
        if f0.is_finite() && f1.is_finite() && f0.signum() != f1.signum() {
            return bisect(&mut f, x0, x1, tol);
        }
        x0 = x1;
        f0 = f1;
    }
    Err(Error::NoRoot(format!("no sign change found on [{a}, {b}]")))
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982,
    0.269_266_719_309_996_4,
    0.295_524_224_714_752_9,
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// Composite 10-point Gauss-Legendre rule with `panels` equal panels.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Adaptive Gauss-Legendre: halves panels until two successive estimates agree.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut panels = 4;
    let mut prev = gauss_legendre(&mut f, a, b, panels);
    while panels < 1 << 14 {
        panels *= 2;
        let next = gauss_legendre(&mut f, a, b, panels);
        if (next - prev).abs() <= tol * (1.0 + next.abs()) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Dormand-Prince 5(4) integration of `y' = f(x, y)` for an `N`-vector,
/// reporting the solution at each point of `xs` (monotone, starting at `x0`
/// or beyond it in the direction of integration).
pub fn dopri<const N: usize, F>(mut f: F, x0: f64, y0: [f64; N], xs: &[f64], rtol: f64, atol: f64) -> Result<Vec<[f64; N]>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut out = Vec::with_capacity(xs.len());
    let mut x = x0;
    let mut y = y0;
    let span = xs.last().map_or(0.0, |&l| (l - x0).abs());
    let mut h = if span > 0.0 { span * 1e-3 } else { 1e-3 };
    for &target in xs {
        let dir = if target >= x { 1.0 } else { -1.0 };
        let mut guard = 0usize;
        while (target - x).abs() > 1e-14 * (1.0 + target.abs()) {
            guard += 1;
            if guard > 2_000_000 {
                return Err(Error::NonConvergence(format!("ODE step limit reached at x={x}")));
            }
            let step = dir * h.min((target - x).abs());
            let mut k = [[0.0; N]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..N {
                        ys[i] += step * A[s][j] * kj[i];
                    }
                }
                k[s] = f(x + C[s] * step, &ys);
            }
            let mut y5 = y;
            let mut err = 0.0f64;
            for i in 0..N {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][i];
                    s4 += B4[s] * k[s][i];
                }
                y5[i] = y[i] + step * s5;
                let sc = atol + rtol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (s5 - s4)).abs() / sc);
            }
            if !err.is_finite() {
                h *= 0.25;
                if h < 1e-300 {
                    return Err(Error::NonConvergence("ODE step underflow".into()));
                }
                continue;
            }
            if err <= 1.0 {
                x += step;
                y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (step.abs() * fac).max(1e-14);
        }
        x = target;
        out.push(y);
    }
    Ok(out)
}
