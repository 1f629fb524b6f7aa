//! The smooth-maximum and Poisson kernels, their Gegenbauer coefficients and
//! Sobolev weights, and the triple-product linearisation of the polynomial basis.

use crate::error::{Error, Result};
use crate::specfun::{
    bessel_i_scaled_seq, gauss_jacobi, ln_beta, ln_gamma, ortho_poly_fill, struct_constants, weighted_integral,
    Dimension,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `ψ(θ) = exp(κ(cos θ - 1))`, `κ > 0`.
    SmoothMax,
    /// `ψ(θ) = (1-ρ²)/(1-2ρ cos θ+ρ²)^{(q+1)/2}`, `0 < ρ < 1`.
    Poisson,
}

impl Family {
    /// Index `ℓ` of the family (1 or 2).
    pub fn index(self) -> u8 {
        match self {
            Family::SmoothMax => 1,
            Family::Poisson => 2,
        }
    }

    pub fn check_lambda(self, lambda: f64) -> Result<()> {
        let ok = match self {
            Family::SmoothMax => lambda > 0.0 && lambda.is_finite(),
            Family::Poisson => lambda > 0.0 && lambda < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(match self {
                Family::SmoothMax => format!("smooth-maximum concentration must be positive, got {lambda}"),
                Family::Poisson => format!("Poisson parameter must lie in (0, 1), got {lambda}"),
            }))
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::SmoothMax => "smoothmax",
            Family::Poisson => "poisson",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smoothmax" | "smooth-max" | "smooth_max" | "lse" | "1" => Ok(Family::SmoothMax),
            "poisson" | "2" => Ok(Family::Poisson),
            other => Err(Error::InvalidParameter(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A kernel: family, tuning parameter and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: Family,
    pub lambda: f64,
    pub q: Dimension,
}

impl KernelSpec {
    pub fn new(family: Family, lambda: f64, q: Dimension) -> Result<Self> {
        family.check_lambda(lambda)?;
        Ok(KernelSpec { family, lambda, q })
    }

    pub fn smooth_max(kappa: f64, q: Dimension) -> Result<Self> {
        Self::new(Family::SmoothMax, kappa, q)
    }

    pub fn poisson(rho: f64, q: Dimension) -> Result<Self> {
        Self::new(Family::Poisson, rho, q)
    }

    /// Same family and dimension, another parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda, self.q)
    }

    /// Kernel as a function of `x = cos θ`.
    #[inline]
    pub fn psi_cos(&self, x: f64) -> f64 {
        match self.family {
            Family::SmoothMax => (self.lambda * (x - 1.0)).exp(),
            Family::Poisson => {
                let rho = self.lambda;
                // 1 - 2ρx + ρ² written to stay accurate near x = 1
                let denom = (1.0 - rho) * (1.0 - rho) + 2.0 * rho * (1.0 - x);
                let e = self.q.get() as i32 + 1;
                let pow = if e % 2 == 0 { denom.powi(e / 2) } else { denom.powi(e / 2) * denom.sqrt() };
                (1.0 - rho * rho) / pow
            }
        }
    }

    /// Kernel at angle `θ ∈ [0, π]`.
    pub fn psi(&self, theta: f64) -> f64 {
        self.psi_cos(theta.cos())
    }

    /// `ψ(0)`.
    pub fn psi_zero(&self) -> f64 {
        match self.family {
            Family::SmoothMax => 1.0,
            Family::Poisson => (1.0 + self.lambda) / (1.0 - self.lambda).powi(self.q.get() as i32),
        }
    }

    /// Null expectation `b_0` of the kernel.
    pub fn b0(&self) -> f64 {
        self.gegen_coef(0)
    }

    /// `ψ(0) - b_0`.
    pub fn psi_tilde_zero(&self) -> f64 {
        self.psi_zero() - self.b0()
    }

    /// Gegenbauer (Chebyshev for `q = 1`) coefficient `b_k`.
    pub fn gegen_coef(&self, k: usize) -> f64 {
        match self.family {
            Family::SmoothMax => smooth_max_coefs(self.lambda, self.q, k, k)[0],
            Family::Poisson => poisson_coef(self.lambda, self.q, k),
        }
    }

    /// Coefficients `b_0..=b_kmax`.
    pub fn gegen_coefs(&self, kmax: usize) -> Vec<f64> {
        match self.family {
            Family::SmoothMax => smooth_max_coefs(self.lambda, self.q, 0, kmax),
            Family::Poisson => (0..=kmax).map(|k| poisson_coef(self.lambda, self.q, k)).collect(),
        }
    }

    /// Coefficient `b_k(ψ²)` of the squared kernel.
    pub fn gegen_coef_squared(&self, k: usize) -> Result<f64> {
        match self.family {
            Family::SmoothMax => Ok(smooth_max_coefs(2.0 * self.lambda, self.q, k, k)[0]),
            Family::Poisson => {
                let c = struct_constants(k, self.q).c;
                let value = weighted_integral(
                    |x| {
                        let mut p = vec![0.0; k + 1];
                        ortho_poly_fill(self.q, x, &mut p);
                        self.psi_cos(x).powi(2) * p[k]
                    },
                    self.q,
                    1e-13,
                )?;
                Ok(value / c)
            }
        }
    }

    /// Coefficients `b_0(ψ²)..=b_kmax(ψ²)`.
    pub fn gegen_coefs_squared(&self, kmax: usize) -> Result<Vec<f64>> {
        match self.family {
            Family::SmoothMax => Ok(smooth_max_coefs(2.0 * self.lambda, self.q, 0, kmax)),
            Family::Poisson => squared_coefs_by_quadrature(self, kmax),
        }
    }

    /// Sobolev weight `w_k`, `k ≥ 1`.
    pub fn sobolev_weight(&self, k: usize) -> f64 {
        sobolev_factor(k, self.q) * self.gegen_coef(k)
    }

    /// Weights `w_1..=w_kmax` (index 0 holds `w_1`).
    pub fn sobolev_weights(&self, kmax: usize) -> Vec<f64> {
        let b = self.gegen_coefs(kmax);
        (1..=kmax).map(|k| sobolev_factor(k, self.q) * b[k]).collect()
    }

    /// Truncated expansion `Σ_{k ≤ kmax} b_k P_k`.
    pub fn series(&self, kmax: usize) -> GegenSeries {
        GegenSeries { q: self.q, coeffs: self.gegen_coefs(kmax) }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(λ={}, q={})", self.family, self.lambda, self.q)
    }
}

/// `w_k / b_k`.
fn sobolev_factor(k: usize, q: Dimension) -> f64 {
    if q.get() == 1 {
        0.5
    } else {
        1.0 / (1.0 + 2.0 * k as f64 / (q.get() as f64 - 1.0))
    }
}

fn poisson_coef(rho: f64, q: Dimension, k: usize) -> f64 {
    let rk = rho.powi(k as i32);
    if q.get() == 1 {
        if k == 0 {
            1.0
        } else {
            2.0 * rk
        }
    } else {
        let qm1 = q.get() as f64 - 1.0;
        (2.0 * k as f64 + qm1) / qm1 * rk
    }
}

/// Smooth-maximum coefficients `b_kmin..=b_kmax` at concentration `kappa`.
fn smooth_max_coefs(kappa: f64, q: Dimension, kmin: usize, kmax: usize) -> Vec<f64> {
    if q.get() == 1 {
        let seq = bessel_i_scaled_seq(0.0, kappa, kmax).expect("valid Bessel arguments");
        return (kmin..=kmax).map(|k| if k == 0 { seq[0] } else { 2.0 * seq[k] }).collect();
    }
    let lam = q.lambda();
    let shift = lam.floor() as usize;
    let seq = bessel_i_scaled_seq(lam - lam.floor(), kappa, kmax + shift).expect("valid Bessel arguments");
    let log_pre = lam * (2.0 / kappa).ln() + ln_gamma(lam);
    (kmin..=kmax)
        .map(|k| {
            let v = seq[k + shift];
            if v == 0.0 {
                0.0
            } else {
                (log_pre + v.ln()).exp() * (k as f64 + lam)
            }
        })
        .collect()
}

fn squared_coefs_by_quadrature(spec: &KernelSpec, kmax: usize) -> Result<Vec<f64>> {
    let q = spec.q;
    let consts: Vec<f64> = (0..=kmax).map(|k| struct_constants(k, q).c).collect();
    let mut prev: Option<Vec<f64>> = None;
    let mut n = 256usize.max(2 * kmax + 64);
    loop {
        let rule = gauss_jacobi(n, q)?;
        let mut acc = vec![0.0; kmax + 1];
        let mut scale = vec![0.0; kmax + 1];
        let mut p = vec![0.0; kmax + 1];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            ortho_poly_fill(q, x, &mut p);
            let f = spec.psi_cos(x).powi(2) * w;
            for k in 0..=kmax {
                acc[k] += f * p[k];
                scale[k] += (f * p[k]).abs();
            }
        }
        let coefs: Vec<f64> = acc.iter().zip(&consts).map(|(a, c)| a / c).collect();
        if let Some(old) = prev {
            let mut worst: f64 = 0.0;
            for k in 0..=kmax {
                let tol = 1e-13 * (scale[k] / consts[k]).max(1e-300);
                worst = worst.max((coefs[k] - old[k]).abs() / tol);
            }
            if worst <= 1.0 {
                return Ok(coefs);
            }
            if n >= crate::specfun::MAX_NODES {
                return Err(Error::Convergence { what: "squared-kernel coefficients", achieved: worst * 1e-13 });
            }
        }
        prev = Some(coefs);
        n *= 2;
    }
}

/// Truncated expansion in the polynomial basis of dimension `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct GegenSeries {
    pub q: Dimension,
    pub coeffs: Vec<f64>,
}

impl GegenSeries {
    /// Highest degree kept.
    pub fn truncation(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut p = vec![0.0; self.coeffs.len()];
        ortho_poly_fill(self.q, x.clamp(-1.0, 1.0), &mut p);
        p.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }
}

/// `∫ P_{k1} P_{k2} P_{k3} (1-x²)^{q/2-1} dx` in closed form.
pub fn triple_product(k1: usize, k2: usize, k3: usize, q: Dimension) -> f64 {
    let mut k = [k1, k2, k3];
    k.sort_unstable();
    let [k1, k2, k3] = k;
    if q.get() == 1 {
        if k3 == k2 + k1 || k3 + k1 == k2 {
            let factor = if k1 == 0 { 1.0 } else { 0.5 };
            return factor * struct_constants(k3, q).c;
        }
        return 0.0;
    }
    if (k1 + k2 + k3) % 2 == 1 || k3 > k1 + k2 {
        return 0.0;
    }
    let l = (k1 + k2 - k3) / 2;
    linearization_coef(l, k1, k2, q.lambda()) * struct_constants(k3, q).c
}

/// Coefficient of `C_{k1+k2-2l}` in the product `C_{k1} C_{k2}` (index `λ`).
pub fn linearization_coef(l: usize, k1: usize, k2: usize, lam: f64) -> f64 {
    let (lf, k1f, k2f) = (l as f64, k1 as f64, k2 as f64);
    let s = k1f + k2f;
    let ln_binom = ln_gamma(s - 2.0 * lf + 1.0) - ln_gamma(k2f - lf + 1.0) - ln_gamma(k1f - lf + 1.0);
    let log_a = (s + lam - 2.0 * lf).ln() - ln_gamma(lf + 1.0) - (s + lam - lf).ln()
        + ln_binom
        + ln_gamma(lam + lf)
        + ln_beta(lam + k1f - lf, lam + k2f - lf)
        - ln_gamma(lam)
        - ln_beta(lam + s - lf, lam);
    log_a.exp()
}
