//! Exponentially scaled modified Bessel functions `e^{-x} I_ν(x)`.
//!
//! Orders sharing a fractional part `λ` are produced together by Miller's
//! downward recurrence, started from the continued fraction for
//! `I_{ν+1}/I_ν` and normalised with the positive-term identity
//!
//! ```text
//! Σ_k (k+λ) (2λ)_k / k! · I_{k+λ}(x) = e^x (x/2)^λ / Γ(λ)     (λ > 0)
//! I_0(x) + 2 Σ_{k≥1} I_k(x)        = e^x                      (λ = 0)
//! ```

use super::ln_gamma;
use crate::error::{Error, Result};

const RESCALE: f64 = 1e250;
const RESCALE_INV: f64 = 1e-250;

/// `I_{ν+1}(x) / I_ν(x)` by the modified Lentz algorithm.
fn ratio_cf(nu: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..=10_000_000u64 {
        let b = 2.0 * (nu + j as f64) / x;
        d = b + d;
        if d == 0.0 {
            d = TINY;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            return Ok(f);
        }
    }
    Err(Error::Convergence { what: "Bessel continued fraction", achieved: f64::NAN })
}

/// `e^{-x} I_{λ+k}(x)` for `k = 0..=kmax`, with `λ ∈ [0, 1)`.
pub fn bessel_i_scaled_seq(lambda: f64, x: f64, kmax: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("fractional order {lambda} outside [0, 1)")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument {x} must be finite and non-negative")));
    }
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        if lambda == 0.0 {
            out[0] = 1.0;
        }
        return Ok(out);
    }
    let nsum = ((80.0 * x).sqrt() + 30.0).ceil() as usize;
    let top = kmax.max(nsum) + 5;

    // Normalisation weights (k+λ)(2λ)_k/k!.
    let mut weights = vec![0.0; top + 2];
    if lambda == 0.0 {
        weights[0] = 1.0;
        for w in weights.iter_mut().skip(1) {
            *w = 2.0;
        }
    } else {
        let mut poch = 1.0;
        for (k, w) in weights.iter_mut().enumerate() {
            if k > 0 {
                poch *= (2.0 * lambda + k as f64 - 1.0) / k as f64;
            }
            *w = (k as f64 + lambda) * poch;
        }
    }

    let ratio = ratio_cf(lambda + top as f64, x)?;
    let mut f_hi = ratio; // order top+1
    let mut f = 1.0; // order top
    let mut sum = weights[top + 1] * f_hi + weights[top] * f;
    let mut scale = 0i32;
    let mut recorded = vec![0i32; kmax + 1];
    if top <= kmax {
        out[top] = f;
    }
    for j in (1..=top).rev() {
        let f_lo = 2.0 * (j as f64 + lambda) / x * f + f_hi;
        f_hi = f;
        f = f_lo;
        if f.abs() > RESCALE {
            f *= RESCALE_INV;
            f_hi *= RESCALE_INV;
            sum *= RESCALE_INV;
            scale += 1;
        }
        sum += weights[j - 1] * f;
        if j - 1 <= kmax {
            out[j - 1] = f;
            recorded[j - 1] = scale;
        }
    }

    let log_norm = if lambda == 0.0 { 0.0 } else { lambda * (x / 2.0).ln() - ln_gamma(lambda) };
    let norm = log_norm.exp() / sum;
    for (v, &s) in out.iter_mut().zip(&recorded) {
        let gap = scale - s;
        *v = match gap {
            0 => *v * norm,
            1 => *v * RESCALE_INV * norm,
            _ => 0.0,
        };
    }
    Ok(out)
}

/// `e^{-x} I_ν(x)` for `ν ≥ 0`, `x ≥ 0`.
pub fn bessel_i_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("Bessel order {nu} must be finite and non-negative")));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("Bessel argument {x} is negative")));
    }
    let m = nu.floor();
    let seq = bessel_i_scaled_seq(nu - m, x, m as usize)?;
    Ok(seq[m as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Power series `e^{-x} Σ (x/2)^{2m+ν} / (m! Γ(m+ν+1))`, for moderate x.
    fn series(nu: f64, x: f64) -> f64 {
        let mut term = ((x / 2.0).ln() * nu - ln_gamma(nu + 1.0)).exp();
        let mut sum = term;
        for m in 1..500 {
            term *= (x * x / 4.0) / (m as f64 * (m as f64 + nu));
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        sum * (-x).exp()
    }

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_i_scaled(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(1.0, 0.0).unwrap(), 0.0);
        assert!(bessel_i_scaled(0.0, -1.0).is_err());
    }

    #[test]
    fn matches_series_oracle() {
        let v = bessel_i_scaled(0.0, 1.0).unwrap();
        assert!((v - 0.465_759_607_593_640_4).abs() < 1e-15);
        for &nu in &[0.0, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 24.5, 60.0] {
            for &x in &[1e-6, 0.01, 0.3, 1.0, 2.5, 7.0, 15.0, 30.0] {
                let a = bessel_i_scaled(nu, x).unwrap();
                let b = series(nu, x);
                if b < 1e-290 {
                    assert!(a < 1e-290);
                    continue;
                }
                assert!(rel(a, b) < 1e-12, "nu={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn half_integer_closed_form() {
        // e^{-x} I_{1/2}(x) = sqrt(2/(πx)) (1 - e^{-2x}) / 2
        for &x in &[1e-3, 0.5, 3.0, 40.0, 900.0, 1e4] {
            let exact = (2.0 / (std::f64::consts::PI * x)).sqrt() * (-(-2.0 * x).exp_m1()) / 2.0;
            assert!(rel(bessel_i_scaled(0.5, x).unwrap(), exact) < 1e-13, "x={x}");
        }
    }

    /// Values from an independent arbitrary-precision evaluation.
    #[test]
    fn frozen_reference_values() {
        let cases = [
            (0.0, 100.0, 3.994_437_929_909_668_3e-2),
            (1.0, 500.0, 1.782_785_185_289_805_6e-2),
            (50.0, 100.0, 1.793_805_043_159_796_1e-7),
            (200.0, 1e4, 5.398_984_180_984_285_8e-4),
            (200.0, 50.0, 2.073_098_077_110_843_1e-116),
            (3.5, 1e4, 3.987_029_748_685_497_4e-3),
        ];
        for (nu, x, v) in cases {
            assert!(rel(bessel_i_scaled(nu, x).unwrap(), v) < 1e-12, "nu={nu} x={x}");
        }
    }

    #[test]
    fn sequence_matches_single() {
        let seq = bessel_i_scaled_seq(0.5, 12.0, 40).unwrap();
        for (k, v) in seq.iter().enumerate() {
            assert!(rel(*v, bessel_i_scaled(k as f64 + 0.5, 12.0).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn bounded_by_one() {
        for &nu in &[0.0, 0.5, 2.0] {
            for &x in &[0.1, 1.0, 10.0, 1000.0] {
                let v = bessel_i_scaled(nu, x).unwrap();
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }
}
