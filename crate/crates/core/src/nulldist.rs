//! Null distribution of the statistics: exact moments, the truncated weighted
//! chi-square limit with Imhof tail probabilities, a two-moment gamma match and
//! Monte Carlo tables.

use crate::error::{Error, Result};
use crate::kernels::{Family, KernelSpec};
use crate::rng::stream_rng;
use crate::sampling::sample_uniform;
use crate::specfun::{integrate_adaptive, struct_constants_seq, Dimension};
use crate::statistic::{t_stat, StatValue};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::gamma_ur;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

/// Default number of terms kept in the weighted chi-square limit.
pub const DEFAULT_TRUNCATION: usize = 50;

/// Reference truncation used when measuring truncation errors.
pub const REFERENCE_TRUNCATION: usize = 10_000;

/// Dimensions scanned by [`truncation_error`].
pub const TRUNCATION_DIMENSIONS: [u32; 6] = [1, 2, 3, 4, 5, 10];

/// `Σ_{k≥1} w_k² d_k = b_0(ψ²) - b_0(ψ)²`, the variance of `ψ(X'Y)` under uniformity.
pub fn kernel_variance(spec: &KernelSpec) -> Result<f64> {
    let mut kmax = 64;
    loop {
        let w = spec.sobolev_weights(kmax);
        let sc = struct_constants_seq(kmax, spec.q);
        let terms: Vec<f64> = w.iter().zip(&sc[1..]).map(|(w, c)| w * w * c.d).collect();
        let total: f64 = terms.iter().rev().sum();
        let last: f64 = terms[kmax - 8..].iter().sum();
        let decreasing = terms[kmax - 1] <= terms[kmax - 9];
        if last <= 1e-17 * total && decreasing {
            return Ok(total);
        }
        if kmax >= 1 << 17 {
            return Err(Error::Convergence { what: "null variance series", achieved: last / total });
        }
        kmax *= 2;
    }
}

/// `Var[T_n]` under uniformity: `(2(n-1)/n)(b_0(ψ²) - b_0(ψ)²)`. The null mean is 0.
pub fn null_variance(spec: &KernelSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("need n ≥ 2, got {n}")));
    }
    Ok(2.0 * (n as f64 - 1.0) / n as f64 * kernel_variance(spec)?)
}

/// `Σ_k w_k Y_k - shift` with independent `Y_k ~ χ²_{d_k}`.
///
/// Degrees of freedom are stored as floats because they exceed `u64` for
/// large `q` and `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedChiSq {
    pub weights: Vec<f64>,
    pub dofs: Vec<f64>,
    pub shift: f64,
}

impl WeightedChiSq {
    pub fn new(weights: Vec<f64>, dofs: Vec<f64>, shift: f64) -> Result<Self> {
        if weights.len() != dofs.len() || weights.is_empty() {
            return Err(Error::InvalidParameter("weights and dofs must be non-empty and of equal length".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be positive and finite".into()));
        }
        if dofs.iter().any(|d| !(*d >= 1.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("degrees of freedom must be at least 1".into()));
        }
        if !shift.is_finite() {
            return Err(Error::InvalidParameter("shift must be finite".into()));
        }
        Ok(WeightedChiSq { weights, dofs, shift })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ w_k d_k - shift`.
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.dofs).rev().map(|(w, d)| w * d).sum::<f64>() - self.shift
    }

    /// `2 Σ w_k² d_k`.
    pub fn variance(&self) -> f64 {
        2.0 * self.weights.iter().zip(&self.dofs).rev().map(|(w, d)| w * w * d).sum::<f64>()
    }

    /// `P[Σ w_k Y_k > x + shift]`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        ImhofEngine::new(self).tail(x)
    }
}

/// The limit law of `T_n` truncated to its first `k_tr` terms. Terms whose
/// weight underflows to zero are dropped.
pub fn build_asymptotic(spec: &KernelSpec, k_tr: usize) -> Result<WeightedChiSq> {
    if k_tr < 1 {
        return Err(Error::InvalidParameter("truncation must be at least 1".into()));
    }
    let w = spec.sobolev_weights(k_tr);
    let sc = struct_constants_seq(k_tr, spec.q);
    let keep = w.iter().position(|&v| v <= 0.0).unwrap_or(k_tr).max(1);
    let weights = w[..keep].to_vec();
    let dofs = sc[1..=keep].iter().map(|c| c.d).collect();
    WeightedChiSq::new(weights, dofs, spec.psi_tilde_zero())
}

/// Largest omitted mean accepted by [`sufficient_truncation`], in units of
/// the limit law's standard deviation.
pub const OMITTED_MEAN_TOL: f64 = 1e-4;

/// Smallest truncation `K ≥ k_min` for which the omitted mean
/// `ψ̃(0) - Σ_{k≤K} w_k d_k` is at most [`OMITTED_MEAN_TOL`] standard
/// deviations of the limit law, capped at [`REFERENCE_TRUNCATION`].
pub fn sufficient_truncation(spec: &KernelSpec, k_min: usize) -> Result<usize> {
    let k_min = k_min.max(1);
    let limit = OMITTED_MEAN_TOL * (2.0 * kernel_variance(spec)?).sqrt();
    let shift = spec.psi_tilde_zero();
    let mut kmax = k_min.max(64).min(REFERENCE_TRUNCATION);
    loop {
        let w = spec.sobolev_weights(kmax);
        let sc = struct_constants_seq(kmax, spec.q);
        let mut partial = 0.0;
        for (k, (w, c)) in w.iter().zip(&sc[1..]).enumerate() {
            partial += w * c.d;
            if k + 1 >= k_min && shift - partial <= limit {
                return Ok(k + 1);
            }
        }
        if kmax >= REFERENCE_TRUNCATION {
            return Ok(REFERENCE_TRUNCATION);
        }
        kmax = (2 * kmax).min(REFERENCE_TRUNCATION);
    }
}

/// `P[Σ w_k Y_k > x + shift]` by Imhof's inversion formula.
pub fn imhof_tail(dist: &WeightedChiSq, x: f64) -> Result<f64> {
    dist.tail(x)
}

const RAY_ANGLES: usize = 13;
const GRID_PER_OCTAVE: usize = 4;
const GRID_OCTAVES: usize = 150;
const TAIL_CUTOFF: f64 = 1e-18;
const MAX_GROWTH: f64 = 1e3;
const TAIL_ABS_TOL: f64 = 1e-12;
const GAP_ABS_TOL: f64 = 1e-17;

fn ray_angle(j: usize) -> f64 {
    FRAC_PI_4 / (1u64 << j) as f64
}

/// Reusable evaluator of Imhof's formula for one distribution.
///
/// The inversion integral `1/2 + (1/π)∫_0^∞ Im g(u)/u du`, with
/// `g(u) = exp(-iux/2) Π (1 - i w_k u)^{-d_k/2}`, is evaluated along the ray
/// `u = r e^{-iφ}`, which turns it into `1/2 + (1/π)(∫_0^∞ Im g(r e^{-iφ})/r dr - φ)`
/// and makes the integrand decay exponentially. The angle is the largest
/// candidate for which `|g|` stays below a fixed bound along the ray.
#[derive(Debug)]
pub struct ImhofEngine {
    w: Vec<f64>,
    d: Vec<f64>,
    shift: f64,
    /// Suffix sums `Σ_{k≥j} d_k w_k^p` for `p = 1..=4`.
    suffix: [Vec<f64>; 4],
    radii: Vec<f64>,
    profiles: Vec<OnceLock<Vec<f64>>>,
}

struct Ray {
    phi: f64,
    radius: f64,
    /// `max ln |g|` along the ray.
    peak: f64,
}

impl Ray {
    /// Absolute tolerance scaled to the rounding level of the integrand.
    fn tolerance(&self, base: f64) -> f64 {
        base * self.peak.max(0.0).exp()
    }
}

/// How the truncated law is located in [`ImhofEngine::truncation_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationShift {
    /// Both laws subtract `ψ(0) - b_0`.
    Fixed,
    /// Each law subtracts its own mean `Σ w_k d_k`.
    Centered,
}

/// `Log(1 - z) + z` for `z = x(s + ic)`, `x ≥ 0`, accurate for small `x`.
#[inline]
fn log1m_plus(x: f64, s: f64, c: f64) -> Complex64 {
    if x < 0.1 {
        let z = Complex64::new(x * s, x * c);
        let mut pow = z * z;
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 2..40 {
            let term = pow / n as f64;
            sum -= term;
            if term.norm_sqr() <= 1e-36 * sum.norm_sqr() {
                break;
            }
            pow *= z;
        }
        sum
    } else {
        Complex64::new(0.5 * (x * (x - 2.0 * s)).ln_1p() + x * s, (-x * c).atan2(1.0 - x * s) + x * c)
    }
}

impl ImhofEngine {
    pub fn new(dist: &WeightedChiSq) -> Self {
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| dist.weights[b].total_cmp(&dist.weights[a]));
        let w: Vec<f64> = order.iter().map(|&i| dist.weights[i]).collect();
        let d: Vec<f64> = order.iter().map(|&i| dist.dofs[i]).collect();
        let suffix = std::array::from_fn(|p| {
            let mut s = vec![0.0; w.len() + 1];
            for k in (0..w.len()).rev() {
                s[k] = s[k + 1] + d[k] * w[k].powi(p as i32 + 1);
            }
            s
        });
        let r_min = 1e-3 / w[0];
        let radii = (0..=GRID_PER_OCTAVE * GRID_OCTAVES)
            .map(|i| r_min * 2f64.powf(i as f64 / GRID_PER_OCTAVE as f64))
            .collect();
        ImhofEngine { w, d, shift: dist.shift, suffix, radii, profiles: (0..RAY_ANGLES).map(|_| OnceLock::new()).collect() }
    }

    fn range_sum(&self, p: usize, range: std::ops::Range<usize>) -> f64 {
        self.suffix[p][range.start] - self.suffix[p][range.end]
    }

    /// `Re Σ -(d_k/2)(Log(1 - i w_k u) + i w_k u)` on the radius grid for terms `range`.
    fn compute_profile(&self, phi: f64, range: std::ops::Range<usize>) -> Vec<f64> {
        let (s, c) = phi.sin_cos();
        self.radii
            .iter()
            .map(|&r| -range.clone().map(|k| 0.5 * self.d[k] * log1m_plus(self.w[k] * r, s, c).re).sum::<f64>())
            .collect()
    }

    fn profile(&self, j: usize) -> &[f64] {
        self.profiles[j].get_or_init(|| self.compute_profile(ray_angle(j), 0..self.w.len()))
    }

    /// Picks the ray angle and integration radius. `centre` is `x + shift`
    /// minus the mean of the terms involved; `head` adds the law of the first
    /// terms with its own centre.
    fn choose_ray(&self, centre: f64, head: Option<(usize, f64)>) -> Result<Ray> {
        let mut fallback: Option<(f64, Ray)> = None;
        for j in 0..RAY_ANGLES {
            let phi = ray_angle(j);
            let s = phi.sin();
            let full = self.profile(j);
            let head_profile = head.map(|(k, a)| (self.compute_profile(phi, 0..k), a));
            let log_mag = |i: usize| {
                let r = self.radii[i];
                let m = full[i] - 0.5 * r * s * centre;
                match &head_profile {
                    Some((h, a)) => m.max(h[i] - 0.5 * r * s * a),
                    None => m,
                }
            };
            let peak = (0..self.radii.len()).map(log_mag).fold(f64::NEG_INFINITY, f64::max);
            let last_big = (0..self.radii.len()).rev().find(|&i| log_mag(i) - self.radii[i].ln() > TAIL_CUTOFF.ln());
            let Some(i) = last_big else { continue };
            if i + GRID_PER_OCTAVE >= self.radii.len() {
                continue;
            }
            let ray = Ray { phi, radius: self.radii[i + 1], peak };
            if peak <= MAX_GROWTH.ln() {
                return Ok(ray);
            }
            if fallback.as_ref().is_none_or(|(p, _)| peak < *p) {
                fallback = Some((peak, ray));
            }
        }
        fallback.map(|(_, r)| r).ok_or(Error::Convergence { what: "Imhof integration range", achieved: f64::NAN })
    }

    /// First index whose terms (and all later ones) can be replaced by their
    /// quadratic and cubic Taylor terms on `[0, radius]`.
    fn collapse_index(&self, radius: f64) -> usize {
        let n = self.w.len();
        let mut j = n;
        while j > 0 && self.w[j - 1] * radius <= 0.1 && self.suffix[3][j - 1] * radius.powi(4) / 8.0 <= TAIL_CUTOFF {
            j -= 1;
        }
        j
    }

    /// `-Σ (d_k/2)(Log(1 - i w_k u) + i w_k u)` over `range` at `u = r e^{-iφ}`.
    fn log_factor(&self, r: f64, c: f64, s: f64, range: std::ops::Range<usize>, collapse: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in range.start..range.end.min(collapse) {
            acc -= 0.5 * self.d[k] * log1m_plus(self.w[k] * r, s, c);
        }
        let lo = range.start.max(collapse);
        if lo < range.end {
            let u = Complex64::new(r * c, -r * s);
            let u2 = u * u;
            acc += -u2 * (0.25 * self.range_sum(1, lo..range.end))
                - Complex64::i() * u2 * u * (self.range_sum(2, lo..range.end) / 6.0);
        }
        acc
    }

    fn breaks(&self, radius: f64) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.radii.iter().step_by(GRID_PER_OCTAVE).copied().take_while(|&r| r < radius));
        b.push(radius);
        b
    }

    /// Mean `Σ w_k d_k - shift`.
    pub fn mean(&self) -> f64 {
        self.suffix[0][0] - self.shift
    }

    /// `P[Σ w_k Y_k > x + shift]`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::InvalidParameter("tail argument is NaN".into()));
        }
        if x + self.shift <= 0.0 {
            return Ok(1.0);
        }
        let centre = x - self.mean();
        let ray = self.choose_ray(centre, None)?;
        let (s, c) = ray.phi.sin_cos();
        let collapse = self.collapse_index(ray.radius);
        let n = self.w.len();
        let integrand = |r: f64| {
            let l = self.log_factor(r, c, s, 0..n, collapse) + Complex64::new(-0.5 * r * s * centre, -0.5 * r * c * centre);
            l.re.exp() * l.im.sin() / r
        };
        let integral = integrate_adaptive(integrand, &self.breaks(ray.radius), ray.tolerance(TAIL_ABS_TOL), 0.0, 50_000)?;
        Ok((0.5 + (integral.value - ray.phi) / PI).clamp(0.0, 1.0))
    }

    /// Tail of the law restricted to the first `k_tr` terms minus the tail of
    /// the full law at `x`, evaluated as a single integral so that tiny gaps
    /// are resolved. With [`TruncationShift::Centered`] both laws are centred
    /// exactly and `x` is measured from the full law's mean.
    pub fn truncation_gap(&self, k_tr: usize, x: f64, location: TruncationShift) -> Result<f64> {
        let n = self.w.len();
        if k_tr >= n {
            return Ok(0.0);
        }
        let centre = x - self.mean();
        let head_centre = match location {
            TruncationShift::Fixed => x + self.shift - self.range_sum(0, 0..k_tr),
            TruncationShift::Centered => centre,
        };
        let ray = self.choose_ray(centre, Some((k_tr, head_centre)))?;
        let (s, c) = ray.phi.sin_cos();
        let collapse = self.collapse_index(ray.radius);
        let integrand = |r: f64| {
            let u = Complex64::new(r * c, -r * s);
            let half_iu = Complex64::i() * u * 0.5;
            let head = self.log_factor(r, c, s, 0..k_tr, collapse) - half_iu * head_centre;
            let rest = self.log_factor(r, c, s, k_tr..n, collapse) - half_iu * (centre - head_centre);
            let diff = if rest.re < 0.5 { -head.exp() * expm1(rest) } else { head.exp() - (head + rest).exp() };
            diff.im / r
        };
        let integral = integrate_adaptive(integrand, &self.breaks(ray.radius), ray.tolerance(GAP_ABS_TOL), 1e-6, 50_000)?;
        Ok(integral.value / PI)
    }

    /// `x` with `P[Σ w_k Y_k - shift ≤ x] = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let mean: f64 = self.suffix[0][0].max(1e-300);
        let var = 2.0 * self.suffix[1][0];
        let sd = var.sqrt();
        let guess = Gamma::new(mean * mean / var, mean / var)
            .map(|g| g.inverse_cdf(p))
            .unwrap_or(mean)
            - self.shift;
        let target = 1.0 - p;
        let f = |x: f64| self.tail(x).map(|t| t - target);
        let (mut lo, mut hi) = (guess - sd, guess + sd);
        let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
        let mut step = sd;
        while flo < 0.0 {
            hi = lo;
            fhi = flo;
            step *= 2.0;
            lo = (lo - step).max(-self.shift);
            flo = f(lo)?;
            if lo <= -self.shift {
                break;
            }
        }
        step = sd;
        while fhi > 0.0 {
            lo = hi;
            flo = fhi;
            step *= 2.0;
            hi += step;
            fhi = f(hi)?;
        }
        // Illinois variant of regula falsi
        let mut side = 0i8;
        for _ in 0..200 {
            let x = if fhi != flo { hi - fhi * (hi - lo) / (fhi - flo) } else { 0.5 * (lo + hi) };
            let fx = f(x)?;
            if fx.abs() < 1e-11 || (hi - lo) < 1e-13 * (1.0 + x.abs()) {
                return Ok(x);
            }
            if fx > 0.0 {
                lo = x;
                flo = fx;
                if side == 1 {
                    fhi *= 0.5;
                }
                side = 1;
            } else {
                hi = x;
                fhi = fx;
                if side == -1 {
                    flo *= 0.5;
                }
                side = -1;
            }
        }
        Err(Error::Convergence { what: "weighted chi-square quantile", achieved: hi - lo })
    }
}

fn expm1(z: Complex64) -> Complex64 {
    let (sb, cb) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * cb - 2.0 * half * half, z.re.exp() * sb)
}

/// Largest `|P_{k_tr}(x) - P_{k_max}(x)|` over the `k_max` law's quantiles
/// `0.01, 0.02, …, 0.99` for one kernel.
pub fn truncation_error_at(spec: &KernelSpec, k_tr: usize, k_max: usize, location: TruncationShift) -> Result<f64> {
    Ok(truncation_errors_at(spec, &[k_tr], k_max, location)?[0])
}

/// [`truncation_error_at`] for several truncations sharing one reference law.
pub fn truncation_errors_at(
    spec: &KernelSpec,
    k_trs: &[usize],
    k_max: usize,
    location: TruncationShift,
) -> Result<Vec<f64>> {
    if let Some(&k_tr) = k_trs.iter().find(|&&k| k >= k_max) {
        return Err(Error::InvalidParameter(format!("need K_tr < K_max, got {k_tr} ≥ {k_max}")));
    }
    let engine = ImhofEngine::new(&build_asymptotic(spec, k_max)?);
    let quantiles: Vec<f64> =
        (1..=99).into_par_iter().map(|i| engine.quantile(i as f64 / 100.0)).collect::<Result<_>>()?;
    k_trs
        .iter()
        .map(|&k_tr| {
            let gaps: Vec<f64> = quantiles
                .par_iter()
                .map(|&x| engine.truncation_gap(k_tr, x, location).map(f64::abs))
                .collect::<Result<_>>()?;
            Ok(gaps.into_iter().fold(0.0, f64::max))
        })
        .collect()
}

/// Uniform truncation error of the tail probability over the dimensions
/// [`TRUNCATION_DIMENSIONS`].
pub fn truncation_error(
    family: Family,
    lambda: f64,
    k_tr: usize,
    k_max: usize,
    location: TruncationShift,
) -> Result<f64> {
    Ok(truncation_errors(family, lambda, &[k_tr], k_max, location)?[0])
}

/// [`truncation_error`] for several truncations.
pub fn truncation_errors(
    family: Family,
    lambda: f64,
    k_trs: &[usize],
    k_max: usize,
    location: TruncationShift,
) -> Result<Vec<f64>> {
    let mut worst = vec![0.0_f64; k_trs.len()];
    for q in TRUNCATION_DIMENSIONS {
        let spec = KernelSpec::new(family, lambda, Dimension::new(q)?)?;
        for (w, e) in worst.iter_mut().zip(truncation_errors_at(&spec, k_trs, k_max, location)?) {
            *w = w.max(e);
        }
    }
    Ok(worst)
}

/// Gamma law matched to the first two null moments of `V_n = T_n + ψ(0) - b_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMatch {
    pub shape: f64,
    pub scale: f64,
    /// `ψ(0) - b_0`, added to `T_n` before evaluating the gamma law.
    pub shift: f64,
}

impl GammaMatch {
    /// Upper tail `P[V > t + shift]` at a value `t` of `T_n`.
    pub fn tail(&self, t: f64) -> f64 {
        let v = t + self.shift;
        if v <= 0.0 {
            return 1.0;
        }
        gamma_ur(self.shape, v / self.scale)
    }

    /// Value of `T_n` whose upper tail is `alpha`.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        let g = Gamma::new(self.shape, 1.0 / self.scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(g.inverse_cdf(1.0 - alpha) - self.shift)
    }
}

pub fn gamma_match(spec: &KernelSpec, n: usize) -> Result<GammaMatch> {
    let var = null_variance(spec, n)?;
    let mean = spec.psi_tilde_zero();
    if !(mean > 0.0 && var > 0.0) {
        return Err(Error::Domain(format!("degenerate gamma match for {spec}: ψ(0) - b_0 = {mean}")));
    }
    let scale = var / mean;
    Ok(GammaMatch { shape: mean / scale, scale, shift: mean })
}

/// Sorted null draws of `T_n` from `M` uniform samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTable {
    pub family: Family,
    pub lambda: f64,
    pub q: Dimension,
    pub n: usize,
    pub seed: u64,
    draws: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CacheHeader {
    format: String,
    version: u32,
    family: Family,
    lambda: f64,
    q: u32,
    n: usize,
    m: usize,
    seed: u64,
}

const CACHE_FORMAT: &str = "sphere-unif-null-table";

impl NullTable {
    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn m(&self) -> usize {
        self.draws.len()
    }

    pub fn spec(&self) -> KernelSpec {
        KernelSpec { family: self.family, lambda: self.lambda, q: self.q }
    }

    /// `(1 + #{draws ≥ t})/(M + 1)`.
    pub fn p_value(&self, t: f64) -> f64 {
        let below = self.draws.partition_point(|&d| d < t);
        (1 + self.draws.len() - below) as f64 / (self.draws.len() + 1) as f64
    }

    /// Smallest draw `c` with `p_value(c) ≤ alpha`; `+∞` if none.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let m = self.draws.len();
        // p_value(draws[i]) ≤ (1 + m - i)/(m + 1) with equality for distinct draws
        let needed = (alpha * (m + 1) as f64 - 1.0).floor();
        if needed < 1.0 {
            return f64::INFINITY;
        }
        let i = m - needed as usize;
        let c = self.draws[i];
        if self.p_value(c) <= alpha {
            c
        } else {
            self.draws[i..].iter().copied().find(|&d| self.p_value(d) <= alpha).unwrap_or(f64::INFINITY)
        }
    }

    /// Cache file name for the table key.
    pub fn cache_file_name(spec: &KernelSpec, n: usize, m: usize, seed: u64) -> String {
        format!("null-{}-{:e}-q{}-n{}-m{}-s{}.bin", spec.family, spec.lambda, spec.q, n, m, seed)
    }

    /// Writes the table: one JSON header line, then the sorted draws as little-endian `f64`.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let header = CacheHeader {
            format: CACHE_FORMAT.into(),
            version: 1,
            family: self.family,
            lambda: self.lambda,
            q: self.q.get(),
            n: self.n,
            m: self.draws.len(),
            seed: self.seed,
        };
        let mut buf = serde_json::to_vec(&header).map_err(|e| Error::Io(e.to_string()))?;
        buf.push(b'\n');
        for d in &self.draws {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(fs::File::open(path)?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: CacheHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::Io(format!("bad cache header: {e}")))?;
        if header.format != CACHE_FORMAT || header.version != 1 {
            return Err(Error::Io(format!("unsupported cache format in {}", path.display())));
        }
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * header.m {
            return Err(Error::Io(format!("truncated cache file {}", path.display())));
        }
        let draws: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if draws.windows(2).any(|w| w[0] > w[1]) || draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::Io(format!("corrupt cache file {}", path.display())));
        }
        Ok(NullTable {
            family: header.family,
            lambda: header.lambda,
            q: Dimension::new(header.q)?,
            n: header.n,
            seed: header.seed,
            draws,
        })
    }
}

/// `M` null draws of `T_n`; replicate `i` uses random stream `i` of `seed`.
pub fn build_null_table(spec: &KernelSpec, n: usize, m: usize, seed: u64) -> Result<NullTable> {
    if m < 1 {
        return Err(Error::InvalidParameter("Monte Carlo size must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("need n ≥ 2, got {n}")));
    }
    let mut draws: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let sample = sample_uniform(spec.q, n, &mut rng);
            t_stat(&sample, spec).map(|v| v.value)
        })
        .collect::<Result<_>>()?;
    draws.sort_by(f64::total_cmp);
    Ok(NullTable { family: spec.family, lambda: spec.lambda, q: spec.q, n, seed, draws })
}

/// Reads the table from `dir` when cached, otherwise builds and stores it.
pub fn load_or_build_null_table(dir: &Path, spec: &KernelSpec, n: usize, m: usize, seed: u64) -> Result<NullTable> {
    let path: PathBuf = dir.join(NullTable::cache_file_name(spec, n, m, seed));
    if let Ok(table) = NullTable::read_cache(&path) {
        if table.spec() == *spec && table.n == n && table.m() == m && table.seed == seed {
            return Ok(table);
        }
    }
    let table = build_null_table(spec, n, m, seed)?;
    fs::create_dir_all(dir)?;
    table.write_cache(&path)?;
    Ok(table)
}

/// How p-values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Asymptotic,
    Gamma,
    MonteCarlo,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asymp" | "asymptotic" | "imhof" => Ok(Method::Asymptotic),
            "gamma" => Ok(Method::Gamma),
            "mc" | "montecarlo" | "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::InvalidParameter(format!("unknown p-value method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Asymptotic => "asymp",
            Method::Gamma => "gamma",
            Method::MonteCarlo => "mc",
        })
    }
}

/// A ready-to-use null calibration of `T_n` for one kernel and sample size.
#[derive(Debug)]
pub enum NullCalibration {
    Asymptotic { engine: ImhofEngine, k_tr: usize },
    Gamma(GammaMatch),
    MonteCarlo(NullTable),
}

impl NullCalibration {
    pub fn asymptotic(spec: &KernelSpec, k_tr: usize) -> Result<Self> {
        Ok(NullCalibration::Asymptotic { engine: ImhofEngine::new(&build_asymptotic(spec, k_tr)?), k_tr })
    }

    pub fn gamma(spec: &KernelSpec, n: usize) -> Result<Self> {
        Ok(NullCalibration::Gamma(gamma_match(spec, n)?))
    }

    pub fn method(&self) -> Method {
        match self {
            NullCalibration::Asymptotic { .. } => Method::Asymptotic,
            NullCalibration::Gamma(_) => Method::Gamma,
            NullCalibration::MonteCarlo(_) => Method::MonteCarlo,
        }
    }

    pub fn p_value(&self, t: f64) -> Result<f64> {
        match self {
            NullCalibration::Asymptotic { engine, .. } => engine.tail(t),
            NullCalibration::Gamma(g) => Ok(g.tail(t)),
            NullCalibration::MonteCarlo(table) => Ok(table.p_value(t)),
        }
    }

    /// Threshold `c` such that `T_n > c` rejects at level `alpha`
    /// (`T_n ≥ c` for Monte Carlo tables).
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("significance level must lie in (0, 1), got {alpha}")));
        }
        match self {
            NullCalibration::Asymptotic { engine, .. } => engine.quantile(1.0 - alpha),
            NullCalibration::Gamma(g) => g.critical_value(alpha),
            NullCalibration::MonteCarlo(table) => Ok(table.critical_value(alpha)),
        }
    }
}

/// Method argument of [`p_value`].
#[derive(Debug, Clone, Copy)]
pub enum PValueMethod<'a> {
    Asymptotic { k_tr: usize },
    Gamma,
    MonteCarlo(&'a NullTable),
}

/// Upper-tail p-value of an observed statistic.
pub fn p_value(spec: &KernelSpec, n: usize, t: &StatValue, method: PValueMethod<'_>) -> Result<f64> {
    if t.family != spec.family || t.lambda != spec.lambda || t.q != spec.q || t.n != n {
        return Err(Error::InvalidParameter(format!("statistic was not computed with {spec} and n = {n}")));
    }
    match method {
        PValueMethod::Asymptotic { k_tr } => imhof_tail(&build_asymptotic(spec, k_tr)?, t.value),
        PValueMethod::Gamma => Ok(gamma_match(spec, n)?.tail(t.value)),
        PValueMethod::MonteCarlo(table) => {
            if table.spec() != *spec || table.n != n {
                return Err(Error::Missing(format!("no Monte Carlo table for {spec} and n = {n}")));
            }
            Ok(table.p_value(t.value))
        }
    }
}
