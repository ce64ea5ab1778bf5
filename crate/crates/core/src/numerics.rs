//! Small numerical kernels shared by the solvers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use libm::erfc;

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `log Σ_k w_k e^{a_k}` over entries with `w_k > 0`, shifted by the largest
/// exponent. Returns `-inf` when no weight is positive and `+inf` when a
/// weighted exponent is `+inf`.
pub fn log_weighted_sum_exp(weights: &[f64], exponents: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), exponents.len());
    let mut shift = f64::NEG_INFINITY;
    for (&w, &a) in weights.iter().zip(exponents) {
        if w > 0.0 && a > shift {
            shift = a;
        }
    }
    if shift.is_infinite() {
        return shift;
    }
    let mut acc = 0.0;
    for (&w, &a) in weights.iter().zip(exponents) {
        if w > 0.0 {
            acc += w * (a - shift).exp();
        }
    }
    shift + acc.ln()
}

/// Gauss–Legendre rule on [-1, 1] with `n` nodes (Newton on P_n).
fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const GL_ORDER: usize = 20;

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(GL_ORDER))
}

/// Composite 20-point Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = gl20();
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + width * k as f64;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut s = 0.0;
        for (t, w) in nodes.iter().zip(weights) {
            s += w * f(mid + half * t);
        }
        total += s * half;
    }
    total
}

/// Bisection on a monotone function for `target`, given a bracket whose
/// endpoints straddle it. Runs until the bracket collapses to adjacent floats.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, target: f64, increasing: bool) -> f64 {
    for _ in 0..2_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above = f(mid) > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
