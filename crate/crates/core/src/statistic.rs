//! Test statistics computed from a sample of unit vectors.

use crate::error::{Error, Result};
use crate::kernels::{Family, KernelSpec};
use crate::specfun::Dimension;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

/// Rows whose squared norm deviates from 1 by more than this are rejected by [`Sample::new`].
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Samples at least this large compute pairwise sums on the rayon pool.
const PARALLEL_MIN_N: usize = 1024;

/// `n` points on `S^q`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    q: Dimension,
    n: usize,
    data: Vec<f64>,
}

impl Sample {
    /// Builds a sample from rows of length `q + 1`, renormalising each row.
    /// Rows with norm farther than [`NORM_TOLERANCE`] from 1 are rejected.
    pub fn new(q: Dimension, rows: &[Vec<f64>]) -> Result<Self> {
        Self::with_tolerance(q, rows, NORM_TOLERANCE)
    }

    /// As [`Sample::new`] with a custom norm tolerance.
    pub fn with_tolerance(q: Dimension, rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let p = q.ambient();
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: q.get(), found: row.len().saturating_sub(1) as u32 });
            }
            push_normalised(&mut data, row, tol).map_err(|norm| {
                Error::Domain(format!("row {} has norm {norm}, not within {tol} of 1", i + 1))
            })?;
        }
        Ok(Sample { q, n: rows.len(), data })
    }

    /// Builds a sample from a flat row-major buffer.
    pub fn from_flat(q: Dimension, flat: Vec<f64>) -> Result<Self> {
        let p = q.ambient();
        if flat.len() % p != 0 {
            return Err(Error::InvalidParameter(format!("buffer length {} is not a multiple of {p}", flat.len())));
        }
        let mut data = Vec::with_capacity(flat.len());
        for (i, row) in flat.chunks(p).enumerate() {
            push_normalised(&mut data, row, NORM_TOLERANCE).map_err(|norm| {
                Error::Domain(format!("row {} has norm {norm}, not within {NORM_TOLERANCE} of 1", i + 1))
            })?;
        }
        Ok(Sample { q, n: flat.len() / p, data })
    }

    /// Wraps rows known to be unit vectors (no checks).
    pub(crate) fn from_unit_rows(q: Dimension, data: Vec<f64>) -> Self {
        let n = data.len() / q.ambient();
        Sample { q, n, data }
    }

    /// Points `(cos a, sin a)` on the circle.
    pub fn from_angles(angles: &[f64]) -> Self {
        let data = angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
        Sample { q: Dimension::new(1).expect("q = 1"), n: angles.len(), data }
    }

    pub fn q(&self) -> Dimension {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient dimension `q + 1`.
    pub fn dim(&self) -> usize {
        self.q.ambient()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.dim();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.dim())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Sample {
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Sample { q: self.q, n: indices.len(), data }
    }

    /// Inner products `X_i'X_j`, `i < j`, row by row, clamped to `[-1, 1]`.
    pub fn pair_cosines(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            let xi = self.row(i);
            for j in i + 1..self.n {
                out.push(dot(xi, self.row(j)).clamp(-1.0, 1.0));
            }
        }
        out
    }

    fn need_pairs(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InsufficientData(format!("need n ≥ 2 points, got {}", self.n)));
        }
        Ok(())
    }

    fn check_kernel(&self, spec: &KernelSpec) -> Result<()> {
        if spec.q != self.q {
            return Err(Error::DimensionMismatch { expected: spec.q.get(), found: self.q.get() });
        }
        self.need_pairs()
    }

    /// `Σ_{i<j} f(X_i'X_j)`, reduced row by row in index order.
    fn pair_sum<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> f64 {
        let row_sum = |i: usize| -> f64 {
            let xi = self.row(i);
            (i + 1..self.n).map(|j| f(dot(xi, self.row(j)).clamp(-1.0, 1.0))).sum::<f64>()
        };
        if self.n >= PARALLEL_MIN_N {
            let partial: Vec<f64> = (0..self.n).into_par_iter().map(row_sum).collect();
            partial.iter().sum()
        } else {
            (0..self.n).map(row_sum).sum()
        }
    }
}

fn push_normalised(data: &mut Vec<f64>, row: &[f64], tol: f64) -> std::result::Result<(), f64> {
    let norm = dot(row, row).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > tol {
        return Err(norm);
    }
    // Rows already unit to rounding are kept bit for bit.
    if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        data.extend_from_slice(row);
    } else {
        data.extend(row.iter().map(|v| v / norm));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A computed statistic with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub value: f64,
    pub family: Family,
    pub lambda: f64,
    pub n: usize,
    pub q: Dimension,
}

/// `T_n = (2/n) Σ_{i<j} ψ(θ_ij) - (n-1) b_0`.
pub fn t_stat(sample: &Sample, spec: &KernelSpec) -> Result<StatValue> {
    sample.check_kernel(spec)?;
    let n = sample.n();
    let sum = sample.pair_sum(|c| spec.psi_cos(c));
    Ok(StatValue { value: finish_t(sum, n, spec), family: spec.family, lambda: spec.lambda, n, q: spec.q })
}

/// `T_n` from precomputed pair cosines (as returned by [`Sample::pair_cosines`]).
pub fn t_stat_from_cosines(cosines: &[f64], n: usize, spec: &KernelSpec) -> f64 {
    let sum: f64 = cosines.iter().map(|&c| spec.psi_cos(c)).sum();
    finish_t(sum, n, spec)
}

fn finish_t(pair_sum: f64, n: usize, spec: &KernelSpec) -> f64 {
    2.0 / n as f64 * pair_sum - (n as f64 - 1.0) * spec.b0()
}

/// `V_n = T_n + ψ(0) - b_0`.
pub fn v_stat(sample: &Sample, spec: &KernelSpec) -> Result<f64> {
    Ok(t_stat(sample, spec)?.value + spec.psi_tilde_zero())
}

/// `κ^{-1} log Σ_{i<j} exp(κ X_i'X_j)`.
pub fn lse_stat(sample: &Sample, kappa: f64) -> Result<f64> {
    sample.need_pairs()?;
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("LSE concentration must be positive, got {kappa}")));
    }
    let top = max_pairwise(sample)?;
    let sum = sample.pair_sum(|c| (kappa * (c - top)).exp());
    Ok(top + sum.ln() / kappa)
}

/// `(q+1)/n Σ_{i,j} X_i'X_j = (q+1)/n ‖Σ X_i‖²`.
pub fn rayleigh_stat(sample: &Sample) -> Result<f64> {
    if sample.n() == 0 {
        return Err(Error::InsufficientData("need n ≥ 1 points".into()));
    }
    let mut total = vec![0.0; sample.dim()];
    for row in sample.rows() {
        total.iter_mut().zip(row).for_each(|(t, v)| *t += v);
    }
    Ok(sample.dim() as f64 / sample.n() as f64 * dot(&total, &total))
}

/// Upper tail of the Rayleigh statistic's `χ²_{q+1}` null limit.
pub fn rayleigh_p_value(stat: f64, q: Dimension) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_ur(q.ambient() as f64 / 2.0, stat / 2.0)
}

/// `max_{i<j} X_i'X_j`.
pub fn max_pairwise(sample: &Sample) -> Result<f64> {
    sample.need_pairs()?;
    let mut best = f64::NEG_INFINITY;
    for i in 0..sample.n() {
        let xi = sample.row(i);
        for j in i + 1..sample.n() {
            best = best.max(dot(xi, sample.row(j)));
        }
    }
    Ok(best.clamp(-1.0, 1.0))
}

/// `(e^κ b_0 - 1)/κ` by its power series.
fn smooth_max_mean_slope(kappa: f64, q: Dimension) -> f64 {
    let lam = if q.get() == 1 { 0.0 } else { q.lambda() };
    let z = kappa * kappa / 4.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    for m in 1..10_000 {
        term *= z / (m as f64 * (lam + m as f64));
        sum += term;
        if m as f64 > kappa && term < 1e-17 * sum {
            break;
        }
    }
    sum / kappa
}

/// Monotone transform of the smooth-maximum statistic that tends to the
/// Rayleigh statistic as `κ → 0`:
/// `(q+1)(e^κ T/κ + 1 + (n-1)(e^κ b_0 - 1)/κ)`.
pub fn smooth_max_rayleigh_transform(t: f64, kappa: f64, n: usize, q: Dimension) -> f64 {
    let qp1 = q.ambient() as f64;
    qp1 * (kappa.exp() * t / kappa + 1.0 + (n as f64 - 1.0) * smooth_max_mean_slope(kappa, q))
}

/// Monotone transform `(T - 1 + ψ(0))/ρ` of the Poisson statistic, tending to
/// the Rayleigh statistic as `ρ → 0`.
pub fn poisson_rayleigh_transform(t: f64, rho: f64, q: Dimension) -> f64 {
    let psi0 = (1.0 + rho) / (1.0 - rho).powi(q.get() as i32);
    (t - 1.0 + psi0) / rho
}

/// LSE from the smooth-maximum statistic: `κ^{-1} log(n e^κ (T + (n-1)b_0)/2)`.
pub fn lse_from_t(t: f64, spec: &KernelSpec, n: usize) -> f64 {
    let c = (n as f64 - 1.0) * spec.b0();
    ((n as f64 / 2.0).ln() + spec.lambda + (t + c).ln()) / spec.lambda
}
