//! Rotationally symmetric alternatives: their expansion coefficients, the
//! moments of `T` under them, the power score and oracle parameters.

use crate::error::{Error, Result};
use crate::kernels::{triple_product, Family, KernelSpec};
use crate::nulldist::null_variance;
use crate::rng::stream_rng;
use crate::sampling::AltSampler;
use crate::specfun::{
    gauss_jacobi, gegenbauer_at_one, ortho_poly_fill, struct_constants_seq, surface_area, Dimension, MAX_NODES,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Default modal projection of the small-circle family.
pub const DEFAULT_NU: f64 = 0.25;

/// Monte Carlo replicates behind the mixture power score.
pub const MIXTURE_REPLICATES: usize = 10_000;

/// Seed of the mixture power-score Monte Carlo.
pub const MIXTURE_SEED: u64 = 1;

/// Largest expansion degree tried before giving up.
const MAX_DEGREE: usize = 2048;

/// Alternative family. The angular functions `f(t)` are
/// `e^{κt}`, `(1-ρ²)/(1-2ρt+ρ²)^{(q+1)/2}` with `ρ = ρ(κ)`, `e^{κt²}` and
/// `e^{-κ(t-ν)²}`; the mixtures put `2(q+1)` equally weighted vMF or
/// Cauchy-like components at `±e_1, …, ±e_{q+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AltFamily {
    Vmf,
    CauchyLike,
    Watson,
    SmallCircle,
    MixVmf,
    MixCauchy,
}

impl AltFamily {
    pub const ALL: [AltFamily; 6] = [
        AltFamily::Vmf,
        AltFamily::CauchyLike,
        AltFamily::Watson,
        AltFamily::SmallCircle,
        AltFamily::MixVmf,
        AltFamily::MixCauchy,
    ];

    pub fn is_mixture(self) -> bool {
        matches!(self, AltFamily::MixVmf | AltFamily::MixCauchy)
    }

    /// Family of a single mixture component (the family itself otherwise).
    pub fn component(self) -> AltFamily {
        match self {
            AltFamily::MixVmf => AltFamily::Vmf,
            AltFamily::MixCauchy => AltFamily::CauchyLike,
            other => other,
        }
    }
}

impl fmt::Display for AltFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AltFamily::Vmf => "vmf",
            AltFamily::CauchyLike => "cauchy",
            AltFamily::Watson => "watson",
            AltFamily::SmallCircle => "smallcircle",
            AltFamily::MixVmf => "mixvmf",
            AltFamily::MixCauchy => "mixcauchy",
        })
    }
}

impl FromStr for AltFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "vmf" | "vonmisesfisher" => Ok(AltFamily::Vmf),
            "cauchy" | "cauchylike" | "ca" => Ok(AltFamily::CauchyLike),
            "watson" | "wa" => Ok(AltFamily::Watson),
            "smallcircle" | "sc" => Ok(AltFamily::SmallCircle),
            "mixvmf" | "mvmf" => Ok(AltFamily::MixVmf),
            "mixcauchy" | "mca" => Ok(AltFamily::MixCauchy),
            other => Err(Error::InvalidParameter(format!("unknown alternative family '{other}'"))),
        }
    }
}

/// An alternative distribution on `S^q`. `kappa_dev = 0` is the uniform law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltSpec {
    pub family: AltFamily,
    pub kappa_dev: f64,
    pub nu: f64,
    pub q: Dimension,
    /// Unit location vector; `None` means `e_{q+1}`. Ignored by mixtures.
    pub location: Option<Vec<f64>>,
}

impl AltSpec {
    pub fn new(family: AltFamily, kappa_dev: f64, q: Dimension) -> Result<Self> {
        if !(kappa_dev >= 0.0 && kappa_dev.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa_dev must be finite and non-negative, got {kappa_dev}")));
        }
        Ok(AltSpec { family, kappa_dev, nu: DEFAULT_NU, q, location: None })
    }

    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        if !(nu.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!("nu must lie in [-1, 1], got {nu}")));
        }
        self.nu = nu;
        Ok(self)
    }

    pub fn with_location(mut self, location: Vec<f64>) -> Result<Self> {
        if location.len() != self.q.ambient() {
            return Err(Error::DimensionMismatch { expected: self.q.get(), found: location.len().saturating_sub(1) as u32 });
        }
        let norm = location.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-8) {
            return Err(Error::InvalidParameter(format!("location must be a unit vector, norm is {norm}")));
        }
        self.location = Some(location.iter().map(|v| v / norm).collect());
        Ok(self)
    }

    pub fn is_uniform(&self) -> bool {
        self.kappa_dev == 0.0
    }

    /// Location of a rotationally symmetric alternative.
    pub fn location(&self) -> Vec<f64> {
        self.location.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; self.q.ambient()];
            e[self.q.get() as usize] = 1.0;
            e
        })
    }

    /// Mixture component locations: component `k = 1..2(q+1)` sits at
    /// `(-1)^k e_{⌈k/2⌉}`.
    pub fn mixture_locations(&self) -> Vec<Vec<f64>> {
        let p = self.q.ambient();
        (1..=2 * p)
            .map(|k| {
                let mut v = vec![0.0; p];
                v[k.div_ceil(2) - 1] = if k % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect()
    }

    /// Angular function `f(t)` of one component, rescaled so that it never overflows.
    pub fn angular(&self, t: f64) -> f64 {
        let k = self.kappa_dev;
        match self.family.component() {
            AltFamily::Vmf => (k * (t - 1.0)).exp(),
            AltFamily::CauchyLike => {
                let rho = cauchy_rho(k);
                let denom = (1.0 - rho) * (1.0 - rho) + 2.0 * rho * (1.0 - t);
                (1.0 - rho * rho) / denom.powf((self.q.get() as f64 + 1.0) / 2.0)
            }
            AltFamily::Watson => (k * (t * t - 1.0)).exp(),
            AltFamily::SmallCircle => (-k * (t - self.nu) * (t - self.nu)).exp(),
            AltFamily::MixVmf | AltFamily::MixCauchy => unreachable!("component family"),
        }
    }

    fn component_spec(&self) -> AltSpec {
        AltSpec { family: self.family.component(), location: None, ..self.clone() }
    }

    fn require_rotsym(&self, op: &str) -> Result<()> {
        if self.family.is_mixture() {
            return Err(Error::InvalidParameter(format!("{op} needs a rotationally symmetric alternative, got {}", self.family)));
        }
        Ok(())
    }
}

impl fmt::Display for AltSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(κ_dev={}, q={})", self.family, self.kappa_dev, self.q)
    }
}

/// `ρ(κ) = ((2κ+1) - √(4κ+1)) / (2κ)`, evaluated as `2κ / ((2κ+1) + √(4κ+1))`.
pub fn cauchy_rho(kappa: f64) -> f64 {
    2.0 * kappa / ((2.0 * kappa + 1.0) + (4.0 * kappa + 1.0).sqrt())
}

/// Coefficients `e_0..=e_K` of an angular density in the polynomial basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltCoeffs {
    pub q: Dimension,
    pub e: Vec<f64>,
}

impl AltCoeffs {
    /// Highest degree `K`.
    pub fn degree(&self) -> usize {
        self.e.len() - 1
    }

    /// Angular density `g(t) = Σ e_k P_k(t)`.
    pub fn density(&self, t: f64) -> f64 {
        let mut p = vec![0.0; self.e.len()];
        ortho_poly_fill(self.q, t.clamp(-1.0, 1.0), &mut p);
        p.iter().zip(&self.e).map(|(a, b)| a * b).sum()
    }
}

/// Coefficients `e_0..=e_K` of a rotationally symmetric alternative. The vMF and
/// Cauchy-like families use their kernel closed forms, the rest use quadrature.
pub fn alt_coefficients(alt: &AltSpec, k: usize) -> Result<AltCoeffs> {
    alt.require_rotsym("alt_coefficients")?;
    let e = match closed_form_coefficients(alt, k) {
        Some(e) => e,
        None => quadrature_coefficients(alt, k)?,
    };
    Ok(AltCoeffs { q: alt.q, e })
}

/// Coefficients by Gauss–Jacobi quadrature of the normalized angular density.
pub fn alt_coefficients_quadrature(alt: &AltSpec, k: usize) -> Result<AltCoeffs> {
    alt.require_rotsym("alt_coefficients_quadrature")?;
    Ok(AltCoeffs { q: alt.q, e: quadrature_coefficients(alt, k)? })
}

fn uniform_coefficients(q: Dimension, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0 / surface_area(q.get());
    e
}

/// vMF: `e_k = b_k(ψ_1; κ) / (ω_q b_0(ψ_1; κ))`. Cauchy-like: `e_k = b_k(ψ_2; ρ) / ω_q`.
fn closed_form_coefficients(alt: &AltSpec, k: usize) -> Option<Vec<f64>> {
    if alt.is_uniform() {
        return Some(uniform_coefficients(alt.q, k));
    }
    let area = surface_area(alt.q.get());
    match alt.family.component() {
        AltFamily::Vmf => {
            let b = KernelSpec::smooth_max(alt.kappa_dev, alt.q).ok()?.gegen_coefs(k);
            let b0 = b[0];
            Some(b.iter().map(|v| v / (area * b0)).collect())
        }
        AltFamily::CauchyLike => {
            let b = KernelSpec::poisson(cauchy_rho(alt.kappa_dev), alt.q).ok()?.gegen_coefs(k);
            Some(b.iter().map(|v| v / area).collect())
        }
        _ => None,
    }
}

fn quadrature_coefficients(alt: &AltSpec, k: usize) -> Result<Vec<f64>> {
    let q = alt.q;
    if alt.is_uniform() {
        return Ok(uniform_coefficients(q, k));
    }
    let consts = struct_constants_seq(k, q);
    let area_below = surface_area(q.get() - 1);
    let mut n = 256usize.max((2 * k + 64).next_power_of_two());
    let mut prev: Option<Vec<f64>> = None;
    let mut p = vec![0.0; k + 1];
    loop {
        let rule = gauss_jacobi(n.min(MAX_NODES), q)?;
        let mut mass = 0.0;
        let mut acc = vec![0.0; k + 1];
        let mut scale = vec![0.0; k + 1];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            ortho_poly_fill(q, x, &mut p);
            let f = alt.angular(x) * w;
            mass += f;
            for j in 0..=k {
                acc[j] += f * p[j];
                scale[j] += (f * p[j]).abs();
            }
        }
        let norm = 1.0 / (area_below * mass);
        let mut e: Vec<f64> = (0..=k).map(|j| acc[j] * norm / consts[j].c).collect();
        // Values below the rounding floor of the sum are zero (odd Watson terms and far tails).
        for j in 1..=k {
            if e[j].abs() <= 64.0 * f64::EPSILON * scale[j] * norm / consts[j].c {
                e[j] = 0.0;
            }
        }
        if let Some(old) = prev {
            let worst = (0..=k)
                .map(|j| (e[j] - old[j]).abs() / (1e-12 * scale[j] * norm / consts[j].c).max(1e-300))
                .fold(0.0f64, f64::max);
            if worst <= 1.0 {
                return Ok(e);
            }
            if n >= MAX_NODES {
                return Err(Error::Convergence { what: "alternative coefficients", achieved: worst * 1e-12 });
            }
        }
        prev = Some(e);
        n *= 2;
    }
}

/// Expansion of an alternative with enough terms for the moment series, plus the
/// per-degree factor multiplying `ω_q² b_k e_k²` in `E[ψ(X'Y)]`.
#[derive(Debug, Clone)]
struct Expansion {
    q: Dimension,
    e: Vec<f64>,
    pair_factor: Vec<f64>,
}

impl Expansion {
    fn new(alt: &AltSpec) -> Result<Self> {
        let comp = alt.component_spec();
        let mut k = 32;
        loop {
            let e = alt_coefficients(&comp, k)?.e;
            let factor = pair_factors(alt, k);
            let terms: Vec<f64> = (1..=k).map(|j| (factor[j] * e[j] * e[j]).abs()).collect();
            let peak = terms.iter().fold(0.0f64, |a, &b| a.max(b));
            let tail = terms[k - 8..].iter().fold(0.0f64, |a, &b| a.max(b));
            if tail <= 1e-30 * peak || peak == 0.0 {
                return Ok(Expansion { q: alt.q, e, pair_factor: factor });
            }
            if k >= MAX_DEGREE {
                return Err(Error::Convergence { what: "alternative expansion", achieved: tail / peak });
            }
            k *= 2;
        }
    }

    fn degree(&self) -> usize {
        self.e.len() - 1
    }

    /// `E_{H1}[ψ(X'Y)] - b_0` for a kernel.
    fn pair_excess(&self, spec: &KernelSpec) -> Result<f64> {
        let k = self.degree();
        let b = spec.gegen_coefs(k);
        let area = surface_area(self.q.get());
        let terms: Vec<f64> = (1..=k).map(|j| self.pair_factor[j] * b[j] * self.e[j] * self.e[j]).collect();
        let total: f64 = terms.iter().rev().sum();
        let tail: f64 = terms[k - 8..].iter().map(|t| t.abs()).sum();
        if tail > 1e-12 * total.abs() && tail > 1e-300 {
            return Err(Error::Convergence { what: "expectation series", achieved: tail / total.abs() });
        }
        Ok(area * area * total)
    }
}

/// Factor of `ω_q² b_k e_k²` in `E[ψ(X'Y)]`: `τ_k` for a single component and
/// `τ_k` times the average of `P_k(μ_i'μ_j) / P_k(1)` over mixture component pairs.
fn pair_factors(alt: &AltSpec, k: usize) -> Vec<f64> {
    let q = alt.q;
    let tau: Vec<f64> = struct_constants_seq(k, q).iter().map(|c| c.tau).collect();
    if !alt.family.is_mixture() {
        return tau;
    }
    let m = 2.0 * q.ambient() as f64;
    let mut at_zero = vec![0.0; k + 1];
    ortho_poly_fill(q, 0.0, &mut at_zero);
    (0..=k)
        .map(|j| {
            let antipodal = if j % 2 == 0 { 2.0 } else { 0.0 };
            tau[j] * (antipodal + (m - 2.0) * at_zero[j] / gegenbauer_at_one(j, q)) / m
        })
        .collect()
}

fn check_dims(spec: &KernelSpec, alt: &AltSpec) -> Result<()> {
    if spec.q != alt.q {
        return Err(Error::DimensionMismatch { expected: spec.q.get(), found: alt.q.get() });
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("need n ≥ 2, got {n}")));
    }
    Ok(())
}

/// `E_{H1}[T_n] = ω_q² (n-1) Σ_{k≥1} τ_k b_k e_k²`. Mixtures use the exact
/// component-pair average.
pub fn exp_alt(spec: &KernelSpec, alt: &AltSpec, n: usize) -> Result<f64> {
    check_dims(spec, alt)?;
    check_n(n)?;
    Ok((n - 1) as f64 * Expansion::new(alt)?.pair_excess(spec)?)
}

/// `Var_{H1}[T_n] = (2(n-1)/n)(2(n-2)η_1 + η_2)` for a rotationally symmetric alternative.
pub fn var_alt(spec: &KernelSpec, alt: &AltSpec, n: usize) -> Result<f64> {
    check_dims(spec, alt)?;
    check_n(n)?;
    alt.require_rotsym("var_alt")?;
    let m = alt_moments(spec, alt)?;
    let nf = n as f64;
    Ok(2.0 * (nf - 1.0) / nf * (2.0 * (nf - 2.0) * m.eta1 + m.eta2))
}

/// Pieces of the variance under an alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltMoments {
    /// `E[E[ψ(X'Y) | X]²]`.
    pub alpha1: f64,
    /// `E[ψ(X'Y)²]`.
    pub alpha2: f64,
    /// `E[ψ(X'Y)]`.
    pub beta: f64,
    /// `α_1 - β²`, clamped at zero.
    pub eta1: f64,
    /// `α_2 - β²`.
    pub eta2: f64,
}

/// Moments `α_1`, `α_2`, `β` of the kernel under a rotationally symmetric alternative.
pub fn alt_moments(spec: &KernelSpec, alt: &AltSpec) -> Result<AltMoments> {
    check_dims(spec, alt)?;
    alt.require_rotsym("alt_moments")?;
    let ex = Expansion::new(alt)?;
    let q = alt.q;
    let area = surface_area(q.get());
    let kmax = ex.degree();
    let b = spec.gegen_coefs(kmax);
    let b_sq = spec.gegen_coefs_squared(kmax)?;
    let tau = &ex.pair_factor;
    let e = &ex.e;
    let beta = area * area * (0..=kmax).rev().map(|k| tau[k] * b[k] * e[k] * e[k]).sum::<f64>();
    let alpha2 = area * area * (0..=kmax).rev().map(|k| tau[k] * b_sq[k] * e[k] * e[k]).sum::<f64>();
    let alpha1 = area * area * triple_sum(q, &b, e);
    Ok(AltMoments { alpha1, alpha2, beta, eta1: (alpha1 - beta * beta).max(0.0), eta2: alpha2 - beta * beta })
}

/// `Σ ζ_{k1,k2} b_{k1} b_{k2} e_{k1} e_{k2} e_{k3} t_{k1,k2,k3}`, doubling the cut-off
/// from 30 until the outermost shell is below `1e-10` of the total.
fn triple_sum(q: Dimension, b: &[f64], e: &[f64]) -> f64 {
    let kmax = e.len() - 1;
    let zeta_factor: Vec<f64> = (0..=kmax)
        .map(|k| {
            if q.get() == 1 {
                if k == 0 {
                    2.0
                } else {
                    1.0
                }
            } else {
                1.0 / (1.0 + 2.0 * k as f64 / (q.get() as f64 - 1.0))
            }
        })
        .collect();
    let zeta_scale = if q.get() == 1 { 0.5 } else { surface_area(q.get() - 1) };
    // Triples whose largest index lies in `(lo, hi]`.
    let shell_sum = |lo: Option<usize>, hi: usize| -> f64 {
        let mut s = 0.0;
        for k1 in 0..=hi {
            let a1 = zeta_factor[k1] * b[k1] * e[k1];
            if a1 == 0.0 {
                continue;
            }
            for k2 in k1..=hi {
                let a2 = zeta_factor[k2] * b[k2] * e[k2];
                if a2 == 0.0 {
                    continue;
                }
                let pair = if k1 == k2 { a1 * a2 } else { 2.0 * a1 * a2 };
                let mut k3 = k2 - k1;
                while k3 <= (k1 + k2).min(hi) {
                    if lo.is_none_or(|lo| k2.max(k3) > lo) && e[k3] != 0.0 {
                        s += pair * e[k3] * triple_product(k1, k2, k3, q);
                    }
                    k3 += if q.get() == 1 { 2 * k1.max(1) } else { 2 };
                }
            }
        }
        zeta_scale * s
    };
    let mut cut = 30.min(kmax);
    let mut total = shell_sum(None, cut);
    while cut < kmax {
        let next = (2 * cut).min(kmax);
        let shell = shell_sum(Some(cut), next);
        total += shell;
        cut = next;
        if shell.abs() <= 1e-10 * total.abs() {
            break;
        }
    }
    total
}

/// Power score `E_{H1}[T(λ)] / √Var_{H0}[T(λ)]`.
pub fn power_score(spec: &KernelSpec, alt: &AltSpec, n: usize) -> Result<f64> {
    Ok(power_scores(spec.family, &[spec.lambda], alt, n)?[0])
}

/// Power scores over a grid. Mixture numerators are Monte Carlo estimates from
/// [`MIXTURE_REPLICATES`] seeded pairs shared by every grid value.
pub fn power_scores(family: Family, grid: &[f64], alt: &AltSpec, n: usize) -> Result<Vec<f64>> {
    check_n(n)?;
    let specs: Vec<KernelSpec> = grid.iter().map(|&l| KernelSpec::new(family, l, alt.q)).collect::<Result<_>>()?;
    let excess: Vec<f64> = if alt.family.is_mixture() && !alt.is_uniform() {
        let cosines = mixture_pair_cosines(alt, MIXTURE_REPLICATES, MIXTURE_SEED)?;
        specs
            .par_iter()
            .map(|s| cosines.iter().map(|&c| s.psi_cos(c)).sum::<f64>() / cosines.len() as f64 - s.b0())
            .collect()
    } else {
        let ex = Expansion::new(alt)?;
        specs.par_iter().map(|s| ex.pair_excess(s)).collect::<Result<_>>()?
    };
    specs
        .par_iter()
        .zip(excess)
        .map(|(s, d)| Ok((n - 1) as f64 * d / null_variance(s, n)?.sqrt()))
        .collect()
}

/// `x'y` for `m` independent pairs drawn from the alternative; pair `i` uses stream `i`.
pub fn mixture_pair_cosines(alt: &AltSpec, m: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = AltSampler::new(alt)?;
    let p = alt.q.ambient();
    Ok((0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let (mut x, mut y) = (vec![0.0; p], vec![0.0; p]);
            sampler.fill_point(&mut rng, &mut x);
            sampler.fill_point(&mut rng, &mut y);
            x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
        })
        .collect())
}

/// Grid maximiser of the power score; ties go to the smaller parameter.
pub fn oracle_param(family: Family, alt: &AltSpec, grid: &[f64], n: usize) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    let scores = power_scores(family, grid, alt, n)?;
    Ok(argmax_smallest(grid, &scores))
}

pub(crate) fn argmax_smallest(grid: &[f64], scores: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..grid.len() {
        let better = scores[i] > scores[best] || (scores[i] == scores[best] && grid[i] < grid[best]);
        if better {
            best = i;
        }
    }
    grid[best]
}
