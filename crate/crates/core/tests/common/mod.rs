#![allow(dead_code)]

use sphere_unif::{Dimension, Family};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

pub fn dim(q: u32) -> Dimension {
    Dimension::new(q).unwrap()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `log ψ^{(k)}(x)`; every derivative of both kernels is positive.
fn log_kernel_derivative(family: Family, lambda: f64, q: u32, k: usize, x: f64) -> f64 {
    match family {
        Family::SmoothMax => k as f64 * lambda.ln() + lambda * (x - 1.0),
        Family::Poisson => {
            let a = (q as f64 + 1.0) / 2.0;
            let rho = lambda;
            let base = (1.0 - rho) * (1.0 - rho) + 2.0 * rho * (1.0 - x);
            (1.0 - rho * rho).ln() + ln_gamma(a + k as f64) - ln_gamma(a) + k as f64 * (2.0 * rho).ln()
                - (a + k as f64) * base.ln()
        }
    }
}

/// Coefficient of the degree-`k` basis polynomial (Chebyshev for `q = 1`,
/// Gegenbauer of index `(q-1)/2` otherwise) in the expansion of the kernel.
///
/// After `k` integrations by parts (Rodrigues' formula) the projection is
/// `A_k ∫ ψ^{(k)}(x) (1-x²)^{k+λ-1/2} dx` with a positive integrand, which
/// Gauss–Legendre quadrature in `θ = arccos x` resolves to full relative
/// precision even for very small coefficients.
pub fn kernel_coef_oracle(family: Family, lambda: f64, q: u32, k: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let kf = k as f64;
    let lam = (q as f64 - 1.0) / 2.0;
    let (log_a, log_norm) = if q == 1 {
        let log_a = kf * 2f64.ln() + ln_gamma(kf + 1.0) - ln_gamma(2.0 * kf + 1.0);
        let norm = if k == 0 { PI } else { PI / 2.0 };
        (log_a, norm.ln())
    } else {
        let log_g = ln_gamma(lam + 0.5) + ln_gamma(kf + 2.0 * lam) - ln_gamma(2.0 * lam) - ln_gamma(lam + kf + 0.5);
        let log_a = log_g - kf * 2f64.ln() - ln_gamma(kf + 1.0);
        let log_norm = PI.ln() + (1.0 - 2.0 * lam) * 2f64.ln() + ln_gamma(kf + 2.0 * lam)
            - ln_gamma(kf + 1.0)
            - (kf + lam).ln()
            - 2.0 * ln_gamma(lam);
        (log_a, log_norm)
    };
    // The log of the largest integrand value keeps the sum in range.
    let power = 2 * k as i32 + q as i32 - 1;
    let logs: Vec<f64> = rule
        .0
        .iter()
        .map(|&t| {
            let theta = PI * (1.0 + t) / 2.0;
            log_kernel_derivative(family, lambda, q, k, theta.cos()) + power as f64 * theta.sin().ln()
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().zip(&rule.1).map(|(l, w)| w * (l - top).exp()).sum::<f64>() * PI / 2.0;
    (log_a + top + sum.ln() - log_norm).exp()
}

/// Relative difference, exact zeros compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}
