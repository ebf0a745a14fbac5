//! Quadrature rules: periodic trapezoid on offset nodes, Gauss–Legendre and tanh-sinh.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureOptions {
    /// Stop when successive estimates differ by less than `tol * (1 + |I|)`.
    pub tol: f64,
    pub initial_nodes: usize,
    pub max_nodes: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            initial_nodes: 64,
            max_nodes: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub nodes: usize,
    pub converged: bool,
}

/// `(1/2π) ∫_0^{2π} f(θ) dθ` by the trapezoid rule on `θ_j = (j + ½) 2π / M`,
/// doubling `M` until consecutive estimates agree.
pub fn periodic_mean<F>(mut f: F, opts: &QuadratureOptions) -> Quadrature
where
    F: FnMut(f64) -> f64,
{
    let mut m = opts.initial_nodes.max(4);
    let mut prev = offset_trapezoid(&mut f, m);
    loop {
        let next_m = 2 * m;
        if next_m > opts.max_nodes {
            return Quadrature {
                value: prev,
                nodes: m,
                converged: false,
            };
        }
        let next = offset_trapezoid(&mut f, next_m);
        if (next - prev).abs() < opts.tol * (1.0 + next.abs()) {
            return Quadrature {
                value: next,
                nodes: next_m,
                converged: true,
            };
        }
        prev = next;
        m = next_m;
    }
}

fn offset_trapezoid<F: FnMut(f64) -> f64>(f: &mut F, m: usize) -> f64 {
    let h = 2.0 * PI / m as f64;
    neumaier_sum((0..m).map(|j| f((j as f64 + 0.5) * h))) / m as f64
}

/// Compensated summation in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b f` by a fixed Gauss–Legendre rule of order `n`.
pub fn gauss_legendre_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    neumaier_sum(x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi))) * half
}

/// `∫_{-1}^{1} g(x) dx` by tanh-sinh quadrature. The integrand receives the
/// node `x` together with `1 - |x|` computed without cancellation, so endpoint
/// singularities can be evaluated accurately.
pub fn tanh_sinh<F>(mut g: F, tol: f64) -> Quadrature
where
    F: FnMut(f64, f64) -> f64,
{
    let t_max = 4.0;
    let mut h = 0.5;
    let mut eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let x = u.tanh();
        // 1 - |tanh u| = 2 / (e^{2|u|} + 1)
        let gap = 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        if !w.is_finite() || w < 1e-300 || gap <= 0.0 {
            return 0.0;
        }
        w * g(x, gap)
    };
    let n0 = (t_max / h) as i64;
    let mut sum = neumaier_sum((-n0..=n0).map(|k| eval(k as f64 * h)));
    let mut prev = sum * h;
    let mut nodes = (2 * n0 + 1) as usize;
    for _ in 0..12 {
        h *= 0.5;
        let n = (t_max / h) as i64;
        sum += neumaier_sum((-n..=n).filter(|k| k % 2 != 0).map(|k| eval(k as f64 * h)));
        nodes = (2 * n + 1) as usize;
        let est = sum * h;
        if (est - prev).abs() < tol * (1.0 + est.abs()) {
            return Quadrature {
                value: est,
                nodes,
                converged: true,
            };
        }
        prev = est;
    }
    Quadrature {
        value: prev,
        nodes,
        converged: false,
    }
}
