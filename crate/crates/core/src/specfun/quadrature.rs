//! Gauss–Jacobi rules for the weight `(1-x^2)^{q/2-1}` and integrals against it.

use super::{gamma, ln_gamma, Dimension};
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Default node count of [`weighted_integral`].
pub const DEFAULT_NODES: usize = 256;
/// Largest node count tried by [`weighted_integral`].
pub const MAX_NODES: usize = 4096;

/// Gauss rule for `∫_{-1}^{1} f(x) (1-x^2)^{q/2-1} dx`, exact for polynomials of
/// degree `2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub q: Dimension,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `∫_{-1}^{1} (1-x^2)^α dx`.
fn weight_mass(alpha: f64) -> f64 {
    (0.5 * PI.ln() + ln_gamma(alpha + 1.0) - ln_gamma(alpha + 1.5)).exp()
}

fn build_rule(n: usize, q: Dimension) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidParameter("quadrature rule needs at least two nodes".into()));
    }
    if q.get() == 1 {
        let nodes = (1..=n).map(|i| ((2 * i - 1) as f64 * PI / (2 * n) as f64).cos()).collect();
        return Ok(QuadratureRule { q, nodes, weights: vec![PI / n as f64; n] });
    }
    let alpha = q.get() as f64 / 2.0 - 1.0;
    let mu0 = weight_mass(alpha);
    // Orthonormal recurrence x p_k = b_{k+1} p_{k+1} + b_k p_{k-1}.
    let b: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                let k = k as f64;
                (k * (k + 2.0 * alpha) / ((2.0 * k + 2.0 * alpha + 1.0) * (2.0 * k + 2.0 * alpha - 1.0))).sqrt()
            }
        })
        .collect();
    let inv_b: Vec<f64> = b.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect();
    let p0 = 1.0 / mu0.sqrt();
    let eval = |x: f64| -> (f64, f64, f64) {
        let (mut pm, mut p) = (0.0, p0);
        let (mut dpm, mut dp) = (0.0, 0.0);
        for k in 0..n {
            let pn = (x * p - b[k] * pm) * inv_b[k + 1];
            let dpn = (p + x * dp - b[k] * dpm) * inv_b[k + 1];
            pm = p;
            p = pn;
            dpm = dp;
            dp = dpn;
        }
        (p, pm, dp)
    };
    // Safeguarded Newton for the zero in [lo, hi], given the sign of p at hi.
    let refine = |mut lo: f64, mut hi: f64, hi_sign: f64| -> f64 {
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (p, _, dp) = eval(x);
            if p == 0.0 {
                break;
            }
            if p.signum() == hi_sign {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - p / dp;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-3);
            x = next;
            if done || hi - lo <= f64::EPSILON * x.abs().max(1e-300) {
                break;
            }
        }
        for _ in 0..2 {
            let (p, _, dp) = eval(x);
            let step = p / dp;
            if p == 0.0 || step.abs() > 1e-12 {
                break;
            }
            x -= step;
        }
        x
    };
    let sign_at = |theta: f64| eval(theta.cos()).0.signum();

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut thetas: Vec<f64> = Vec::with_capacity(n / 2);
    let half = n.div_ceil(2);
    // Fallback bracketing step, below the zero spacing in angle.
    let dtheta = PI / (4.0 * (n as f64 + alpha + 1.0));
    for i in 0..half {
        if n % 2 == 1 && i == n / 2 {
            break;
        }
        let prev = thetas.last().copied().unwrap_or(0.0);
        let mut bracket = None;
        if i >= 2 {
            // Extrapolate from the last spacing and confirm by a sign change.
            let gap = prev - thetas[i - 2];
            let (a, c) = (prev + 0.6 * gap, (prev + 1.4 * gap).min(PI / 2.0));
            let (sa, sc) = (sign_at(a), sign_at(c));
            if sa != sc && sign_at(prev + 0.3 * gap) == sa {
                bracket = Some((a, c, sa));
            }
        }
        let (a, c, sa) = match bracket {
            Some(br) => br,
            None => {
                let mut a = prev + if i == 0 { 0.0 } else { 1e-3 * dtheta };
                let mut sa = if i == 0 { eval(1.0).0.signum() } else { sign_at(a) };
                loop {
                    let c = (a + dtheta).min(PI / 2.0);
                    let sc = sign_at(c);
                    if sc != sa {
                        break (a, c, sa);
                    }
                    if c >= PI / 2.0 {
                        return Err(Error::Convergence { what: "Gauss-Jacobi node bracketing", achieved: f64::NAN });
                    }
                    a = c;
                    sa = sc;
                }
            }
        };
        let x = refine(c.cos(), a.cos(), sa);
        thetas.push(x.acos());
        let dp = eval(x).2;
        nodes[i] = x;
        // w ∝ 1/((1-x²) p_n'(x)²); the constant is fixed by the total mass.
        weights[i] = 1.0 / ((1.0 - x) * (1.0 + x) * dp * dp);
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let dp = eval(0.0).2;
        weights[n / 2] = 1.0 / (dp * dp);
    }
    let raw_mass: f64 = weights.iter().sum();
    let factor = mu0 / raw_mass;
    weights.iter_mut().for_each(|w| *w *= factor);
    // Cross-check against the Christoffel form 1/(b_n p_{n-1} p_n') at the middle node.
    let mid = n / 2;
    let (_, pm, dp) = eval(nodes[mid]);
    let check = 1.0 / (b[n] * pm * dp);
    let ordered = nodes.windows(2).all(|w| w[0] > w[1]) && nodes[0] < 1.0;
    let gap = ((weights[mid] - check) / check).abs();
    if !ordered || weights.iter().any(|&w| !(w > 0.0)) || gap > 1e-9 {
        return Err(Error::Convergence { what: "Gauss-Jacobi rule construction", achieved: gap });
    }
    Ok(QuadratureRule { q, nodes, weights })
}

/// Gauss–Jacobi rule with `n` nodes for dimension `q` (memoised).
pub fn gauss_jacobi(n: usize, q: Dimension) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, usize), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache").get(&(q.get(), n)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_rule(n, q)?);
    cache.lock().expect("quadrature cache").insert((q.get(), n), rule.clone());
    Ok(rule)
}

/// `∫ f(x)(1-x^2)^{q/2-1} dx` with a fixed rule.
pub fn weighted_integral_with_rule<F: FnMut(f64) -> f64>(f: F, rule: &QuadratureRule) -> f64 {
    rule.apply(f)
}

/// `∫ f(x)(1-x^2)^{q/2-1} dx`, doubling the node count from 256 (up to 4096) until two
/// successive values differ by at most `tol · max(1, ∫|f|w)`.
pub fn weighted_integral<F: Fn(f64) -> f64>(f: F, q: Dimension, tol: f64) -> Result<f64> {
    let mut n = DEFAULT_NODES;
    let mut prev = gauss_jacobi(n, q)?.apply(&f);
    let mut gap = f64::INFINITY;
    while n < MAX_NODES {
        n *= 2;
        let rule = gauss_jacobi(n, q)?;
        let (value, mass) = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .fold((0.0, 0.0), |(v, m), (&x, &w)| {
                let fx = f(x);
                (v + w * fx, m + w * fx.abs())
            });
        gap = (value - prev).abs();
        if gap <= tol * mass.max(1.0) {
            return Ok(value);
        }
        prev = value;
    }
    Err(Error::Convergence { what: "weighted quadrature", achieved: gap })
}

/// `∫_{-1}^{1} (1-x^2)^{q/2-1} dx` in closed form.
pub fn weight_total(q: Dimension) -> f64 {
    let alpha = q.get() as f64 / 2.0 - 1.0;
    PI.sqrt() * gamma(alpha + 1.0) / gamma(alpha + 1.5)
}
