//! One-dimensional quadrature rules and interpolation helpers.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Barycentric interpolation weights for the nodes.
    pub bary: Vec<f64>,
}

/// Legendre polynomial P_n(x) and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Values P_0(x), ..., P_{n-1}(x).
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let (mut p0, mut p1) = (1.0, x);
    for k in 0..n {
        match k {
            0 => out.push(1.0),
            1 => out.push(x),
            _ => {
                let kf = (k - 1) as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
                out.push(p2);
            }
        }
    }
    out
}

fn compute_gauss(n: usize) -> GaussRule {
    assert!(n >= 1, "Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let bary = barycentric_weights(&nodes);
    GaussRule {
        nodes,
        weights,
        bary,
    }
}

const CACHED_ORDERS: usize = 65;

/// Cached Gauss–Legendre rule of order `n`.
pub fn gauss(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Vec<OnceLock<GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..CACHED_ORDERS).map(|_| OnceLock::new()).collect());
    assert!(n < CACHED_ORDERS, "Gauss order {n} not supported");
    cache[n].get_or_init(|| compute_gauss(n))
}

pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] /= nodes[j] - nodes[k];
            }
        }
    }
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= scale);
    w
}

/// Lagrange basis values at `x` for the given nodes (barycentric form).
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    if let Some(k) = nodes.iter().position(|&t| t == x) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[k] = 1.0;
        return;
    }
    let mut denom = 0.0;
    for ((o, &t), &b) in out.iter_mut().zip(nodes).zip(bary) {
        *o = b / (x - t);
        denom += *o;
    }
    out.iter_mut().for_each(|v| *v /= denom);
}

/// Weights `ω_j` with ∫_{-1}^{1} log|u − u_i| f(u) du ≈ Σ ω_j f(u_j),
/// exact for polynomials of degree below the rule order. `u_i` is node `i`.
pub fn log_weights(order: usize, i: usize) -> &'static [f64] {
    static CACHE: OnceLock<Vec<OnceLock<Vec<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..CACHED_ORDERS).map(|_| OnceLock::new()).collect());
    &cache[order].get_or_init(|| {
        let rule = gauss(order);
        (0..order)
            .map(|i| log_weights_at(rule, rule.nodes[i]))
            .collect()
    })[i]
}

/// Product-integration weights for log|u − u0| with `u0` strictly inside (-1, 1).
pub fn log_weights_at(rule: &GaussRule, u0: f64) -> Vec<f64> {
    let n = rule.nodes.len();
    let moments = log_moments(n, u0);
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let p = legendre_values(n, rule.nodes[j]);
        let s: f64 = (0..n)
            .map(|k| moments[k] * (2.0 * k as f64 + 1.0) * 0.5 * p[k])
            .sum();
        *o = s * rule.weights[j];
    }
    out
}

/// ∫_{-1}^{1} log|u − u0| P_k(u) du for k < n, via Legendre functions of the second kind.
fn log_moments(n: usize, u0: f64) -> Vec<f64> {
    let mut q = Vec::with_capacity(n + 1);
    let q0 = 0.5 * ((1.0 + u0) / (1.0 - u0)).ln();
    q.push(q0);
    q.push(u0 * q0 - 1.0);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * u0 * q[k] - kf * q[k - 1]) / (kf + 1.0);
        q.push(next);
    }
    let mut m = Vec::with_capacity(n);
    m.push((1.0 + u0) * (1.0 + u0).ln() + (1.0 - u0) * (1.0 - u0).ln() - 2.0);
    for k in 1..n {
        m.push(2.0 * (q[k + 1] - q[k - 1]) / (2.0 * k as f64 + 1.0));
    }
    m
}

/// Kress weights for ∫_0^{2π} log(4 sin²((t − τ)/2)) f(τ) dτ on `n`
/// equispaced points, indexed by the offset (i − j) mod n.
pub fn kress_weights(n: usize) -> Vec<f64> {
    assert!(n % 2 == 0, "Kress rule needs an even point count");
    let half = n / 2;
    let nf = n as f64;
    (0..n)
        .map(|m| {
            let theta = 2.0 * PI * m as f64 / nf;
            let s: f64 = (1..half)
                .map(|k| (k as f64 * theta).cos() / k as f64)
                .sum();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            -4.0 * PI / nf * s - 4.0 * PI / (nf * nf) * sign
        })
        .collect()
}
