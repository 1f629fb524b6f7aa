//! Random generation on the sphere.

use crate::altdist::AltSpec;
use crate::error::{Error, Result};
use crate::specfun::Dimension;
use crate::statistic::Sample;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Cells of the tabulated angular CDF.
pub const CDF_POINTS: usize = 4096;

/// Largest probability a single CDF cell may carry.
const MAX_CELL_MASS: f64 = 0.02;

/// `n` independent uniform points on `S^q` (normalised Gaussian vectors).
pub fn sample_uniform<R: Rng + ?Sized>(q: Dimension, n: usize, rng: &mut R) -> Sample {
    let p = q.ambient();
    let mut data = Vec::with_capacity(n * p);
    let mut v = vec![0.0; p];
    for _ in 0..n {
        uniform_point(rng, &mut v);
        data.extend_from_slice(&v);
    }
    Sample::from_unit_rows(q, data)
}

/// Fills `out` with a uniform point on the sphere of dimension `out.len() - 1`.
pub(crate) fn uniform_point<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// `n` points from a rotationally symmetric alternative.
pub fn sample_rotsym<R: Rng + ?Sized>(alt: &AltSpec, n: usize, rng: &mut R) -> Result<Sample> {
    if alt.family.is_mixture() {
        return Err(Error::InvalidParameter(format!("{} is a mixture; use sample_mixture", alt.family)));
    }
    Ok(AltSampler::new(alt)?.sample(n, rng))
}

/// `n` points from a canonical-axes mixture.
pub fn sample_mixture<R: Rng + ?Sized>(alt: &AltSpec, n: usize, rng: &mut R) -> Result<Sample> {
    if !alt.family.is_mixture() {
        return Err(Error::InvalidParameter(format!("{} is not a mixture family", alt.family)));
    }
    Ok(AltSampler::new(alt)?.sample(n, rng))
}

/// `n` points from any alternative.
pub fn sample_alternative<R: Rng + ?Sized>(alt: &AltSpec, n: usize, rng: &mut R) -> Result<Sample> {
    Ok(AltSampler::new(alt)?.sample(n, rng))
}

/// Tangent-normal sampler: the angle to the location is drawn by inverting a
/// tabulated CDF on a uniform angle grid (Chebyshev-spaced in `t = cos θ`), the
/// tangent direction uniformly, and the point is reflected onto its location.
#[derive(Debug, Clone)]
pub struct AltSampler {
    q: Dimension,
    cdf: Vec<f64>,
    /// Householder vectors `e_{q+1} - μ` per component; `None` is the identity.
    reflections: Vec<Option<Vec<f64>>>,
}

impl AltSampler {
    pub fn new(alt: &AltSpec) -> Result<Self> {
        let q = alt.q;
        let h = PI / CDF_POINTS as f64;
        // 4-point Gauss–Legendre per cell
        const X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let density = |theta: f64| alt.angular(theta.cos()) * theta.sin().powi(q.get() as i32 - 1);
        let mut cdf = Vec::with_capacity(CDF_POINTS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut max_cell: f64 = 0.0;
        for i in 0..CDF_POINTS {
            let c = (i as f64 + 0.5) * h;
            let mut m = 0.0;
            for j in 0..2 {
                let d = 0.5 * h * X[j];
                m += W[j] * (density(c - d) + density(c + d));
            }
            m *= 0.5 * h;
            acc += m;
            max_cell = max_cell.max(m);
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::Convergence { what: "angular CDF tabulation", achieved: acc });
        }
        if max_cell / acc > MAX_CELL_MASS {
            return Err(Error::Convergence { what: "angular CDF resolution (concentration too high)", achieved: max_cell / acc });
        }
        cdf.iter_mut().for_each(|v| *v /= acc);
        cdf[CDF_POINTS] = 1.0;
        let locations = if alt.family.is_mixture() { alt.mixture_locations() } else { vec![alt.location()] };
        let reflections = locations.iter().map(|mu| householder(mu)).collect();
        Ok(AltSampler { q, cdf, reflections })
    }

    pub fn components(&self) -> usize {
        self.reflections.len()
    }

    /// Angle to the location, `θ ∈ [0, π]`.
    fn draw_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = (self.cdf.partition_point(|&c| c <= u) - 1).min(CDF_POINTS - 1);
        let width = self.cdf[i + 1] - self.cdf[i];
        let frac = if width > 0.0 { ((u - self.cdf[i]) / width).clamp(0.0, 1.0) } else { 0.5 };
        (i as f64 + frac) * PI / CDF_POINTS as f64
    }

    /// Writes one point into `out` and returns its component index.
    pub(crate) fn fill_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> usize {
        let component = if self.components() > 1 { rng.random_range(0..self.components()) } else { 0 };
        let theta = self.draw_angle(rng);
        let last = self.q.get() as usize;
        uniform_point(rng, &mut out[..last]);
        let s = theta.sin();
        out[..last].iter_mut().for_each(|v| *v *= s);
        out[last] = theta.cos();
        if let Some(v) = &self.reflections[component] {
            let vv: f64 = v.iter().map(|a| a * a).sum();
            let vy: f64 = v.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * vy / vv;
            out.iter_mut().zip(v).for_each(|(o, a)| *o -= f * a);
        }
        component
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Sample {
        self.sample_labelled(n, rng).0
    }

    /// Sample plus the component index of every point.
    pub fn sample_labelled<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Sample, Vec<usize>) {
        let p = self.q.ambient();
        let mut data = vec![0.0; n * p];
        let labels = data.chunks_mut(p).map(|row| self.fill_point(rng, row)).collect();
        (Sample::from_unit_rows(self.q, data), labels)
    }
}

/// Reflection vector taking `e_{q+1}` to `mu`.
fn householder(mu: &[f64]) -> Option<Vec<f64>> {
    let last = mu.len() - 1;
    if 1.0 - mu[last] < 1e-15 {
        return None;
    }
    let mut v: Vec<f64> = mu.iter().map(|x| -x).collect();
    v[last] += 1.0;
    Some(v)
}
