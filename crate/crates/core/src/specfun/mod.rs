//! Special functions and structural constants: Chebyshev/Gegenbauer polynomials,
//! scaled modified Bessel functions, sphere areas and weighted quadrature on `[-1, 1]`.

mod bessel;
mod integrate;
mod quadrature;

pub use bessel::{bessel_i_scaled, bessel_i_scaled_seq};
pub use integrate::{integrate_adaptive, Integral};
pub use quadrature::{gauss_jacobi, MAX_NODES, weighted_integral, weighted_integral_with_rule, weight_total, QuadratureRule};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dimension `q` of the sphere `S^q`, embedded in `R^{q+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("dimension q must be at least 1".into()));
        }
        Ok(Dimension(q))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Ambient dimension `q + 1`.
    pub fn ambient(self) -> usize {
        self.0 as usize + 1
    }

    /// Gegenbauer index `(q - 1) / 2`.
    pub fn lambda(self) -> f64 {
        (self.0 as f64 - 1.0) / 2.0
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(q: u32) -> Result<Self> {
        Dimension::new(q)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln (a)_k` for `a > 0`.
pub fn ln_pochhammer(a: f64, k: u64) -> f64 {
    ln_gamma(a + k as f64) - ln_gamma(a)
}

/// Surface area `ω_q = 2π^{(q+1)/2} / Γ((q+1)/2)` of `S^q`; `q = 0` gives 2.
pub fn surface_area(q: u32) -> f64 {
    match q {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => {
            let h = (q as f64 + 1.0) / 2.0;
            2.0 * (h * PI.ln() - ln_gamma(h)).exp()
        }
    }
}

fn check_unit_interval(x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("polynomial argument {x} outside [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// `T_k(x)` for `q = 1`, `C_k^{(q-1)/2}(x)` for `q ≥ 2`.
pub fn ortho_poly(k: usize, q: Dimension, x: f64) -> Result<f64> {
    let x = check_unit_interval(x)?;
    let mut out = vec![0.0; k + 1];
    ortho_poly_fill(q, x, &mut out);
    Ok(out[k])
}

/// Values of the polynomials of degree `0..=kmax` at `x`.
pub fn ortho_poly_seq(kmax: usize, q: Dimension, x: f64) -> Result<Vec<f64>> {
    let x = check_unit_interval(x)?;
    let mut out = vec![0.0; kmax + 1];
    ortho_poly_fill(q, x, &mut out);
    Ok(out)
}

/// Fills `out[k]` with the degree-`k` polynomial at `x` (no domain check).
pub(crate) fn ortho_poly_fill(q: Dimension, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    if q.get() == 1 {
        out[1] = x;
        for k in 1..out.len() - 1 {
            out[k + 1] = 2.0 * x * out[k] - out[k - 1];
        }
    } else {
        let lam = q.lambda();
        out[1] = 2.0 * lam * x;
        for k in 1..out.len() - 1 {
            let kf = k as f64;
            out[k + 1] = (2.0 * x * (kf + lam) * out[k] - (kf + 2.0 * lam - 1.0) * out[k - 1]) / (kf + 1.0);
        }
    }
}

/// Normalising constants of the polynomial basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructConstants {
    /// `∫ P_k(x)^2 (1-x^2)^{q/2-1} dx`.
    pub c: f64,
    /// Dimension of the space of degree-`k` spherical harmonics.
    pub d: f64,
    /// Factor `τ` entering the moments under rotationally symmetric alternatives.
    pub tau: f64,
}

/// `C_k^{(q-1)/2}(1) = (q-1)_k / k!`.
pub fn gegenbauer_at_one(k: usize, q: Dimension) -> f64 {
    if q.get() == 1 {
        return 1.0;
    }
    let a = q.get() as f64 - 1.0;
    if k <= 2000 {
        let mut v = 1.0;
        for j in 1..=k {
            v *= (a + j as f64 - 1.0) / j as f64;
        }
        v
    } else {
        (ln_pochhammer(a, k as u64) - ln_gamma(k as f64 + 1.0)).exp()
    }
}

/// `c_{k,q}`, `d_{k,q}` and `τ_{k,q}`.
pub fn struct_constants(k: usize, q: Dimension) -> StructConstants {
    if q.get() == 1 {
        let delta = if k == 0 { 1.0 } else { 0.0 };
        return StructConstants {
            c: (1.0 + delta) * PI / 2.0,
            d: if k == 0 { 1.0 } else { 2.0 },
            tau: (1.0 + delta) * (1.0 + delta) / 4.0,
        };
    }
    let qm1 = q.get() as f64 - 1.0;
    let kf = k as f64;
    let at_one = gegenbauer_at_one(k, q);
    let ratio = 1.0 + 2.0 * kf / qm1;
    let d = (2.0 * kf + qm1) / qm1 * at_one;
    let area_ratio = surface_area(q.get()) / surface_area(q.get() - 1);
    StructConstants {
        c: area_ratio * d / (ratio * ratio),
        d,
        tau: at_one / (ratio * ratio),
    }
}

/// Constants for `k = 0..=kmax`, built incrementally.
pub fn struct_constants_seq(kmax: usize, q: Dimension) -> Vec<StructConstants> {
    if q.get() == 1 {
        return (0..=kmax).map(|k| struct_constants(k, q)).collect();
    }
    let qm1 = q.get() as f64 - 1.0;
    let area_ratio = surface_area(q.get()) / surface_area(q.get() - 1);
    let mut at_one = 1.0;
    let mut out = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let kf = k as f64;
        if k > 0 {
            at_one *= (qm1 + kf - 1.0) / kf;
        }
        let ratio = 1.0 + 2.0 * kf / qm1;
        let d = (2.0 * kf + qm1) / qm1 * at_one;
        out.push(StructConstants { c: area_ratio * d / (ratio * ratio), d, tau: at_one / (ratio * ratio) });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(q: u32) -> Dimension {
        Dimension::new(q).unwrap()
    }

    #[test]
    fn surface_areas() {
        assert_eq!(surface_area(0), 2.0);
        assert!((surface_area(1) - 2.0 * PI).abs() < 1e-15);
        assert!((surface_area(2) - 4.0 * PI).abs() < 1e-14);
        // ω_3 = 2π², ω_4 = 8π²/3
        assert!((surface_area(3) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((surface_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_examples() {
        assert_eq!(ortho_poly(0, dim(4), 0.3).unwrap(), 1.0);
        let v = ortho_poly(3, dim(1), 0.7f64.cos()).unwrap();
        assert!((v - (2.1f64).cos()).abs() < 1e-14);
        assert!((ortho_poly(4, dim(3), 1.0).unwrap() - 5.0).abs() < 1e-13);
        assert!(ortho_poly(1, dim(2), 1.5).is_err());
    }

    #[test]
    fn legendre_closed_form() {
        let x: f64 = 0.37;
        let p3 = 0.5 * (5.0 * x.powi(3) - 3.0 * x);
        assert!((ortho_poly(3, dim(2), x).unwrap() - p3).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_matches_cosine() {
        for k in 1..60 {
            for &x in &[-0.99, -0.4, 0.0, 0.3, 0.999] {
                let v = ortho_poly(k, dim(1), x).unwrap();
                assert!((v - (k as f64 * f64::acos(x)).cos()).abs() < 1e-12, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn endpoint_values() {
        for q in 2..=6 {
            for k in 0..=100 {
                let v = ortho_poly(k, dim(q), 1.0).unwrap();
                let exact = gegenbauer_at_one(k, dim(q));
                assert!(((v - exact) / exact).abs() < 1e-9);
                let vm = ortho_poly(k, dim(q), -1.0).unwrap();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!(((vm - sign * exact) / exact).abs() < 1e-9);
            }
        }
        assert!((ortho_poly(57, dim(1), 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn struct_constant_examples() {
        let s = struct_constants(0, dim(1));
        assert!((s.c - PI).abs() < 1e-15);
        assert_eq!(s.d, 1.0);
        assert_eq!(struct_constants(3, dim(1)).d, 2.0);
        let s = struct_constants(2, dim(2));
        assert!((s.d - 5.0).abs() < 1e-14);
        assert!((s.c - 2.0 / 5.0).abs() < 1e-14);
        assert!((struct_constants(0, dim(3)).tau - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dof_is_harmonic_dimension() {
        // d_{k,q} = C(k+q, q) - C(k+q-2, q)
        fn binom(n: i64, r: i64) -> f64 {
            if n < r || r < 0 {
                return 0.0;
            }
            (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        for q in 2..=6i64 {
            for k in 1..=20i64 {
                let d = struct_constants(k as usize, dim(q as u32)).d;
                let expect = binom(k + q, q) - binom(k + q - 2, q);
                assert!(((d - expect) / expect).abs() < 1e-12, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn sequence_matches_pointwise() {
        for q in 1..=5 {
            let seq = struct_constants_seq(40, dim(q));
            for (k, s) in seq.iter().enumerate() {
                let p = struct_constants(k, dim(q));
                assert!(((s.c - p.c) / p.c).abs() < 1e-13);
                assert!(((s.d - p.d) / p.d).abs() < 1e-13);
                assert!(((s.tau - p.tau) / p.tau).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Dimension::new(0).is_err());
    }
}
