//! Data-splitting tests: the K-fold test with harmonic-mean p-value
//! aggregation and the single-partition split test.

use crate::altdist::argmax_smallest;
use crate::error::{Error, Result};
use crate::grid::default_grid;
use crate::kernels::{Family, KernelSpec};
use crate::nulldist::{
    build_null_table, load_or_build_null_table, null_variance, sufficient_truncation, Method, NullCalibration,
    DEFAULT_TRUNCATION,
};
use crate::rng::{derive_seed, stream_rng};
use crate::specfun::{integrate_adaptive, Dimension};
use crate::statistic::{t_stat, t_stat_from_cosines, Sample};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

pub const DEFAULT_FOLDS: usize = 10;

/// Default Monte Carlo size for null tables built inside data-splitting tests.
pub const DEFAULT_MC_DRAWS: usize = 1000;

/// Location offset of the Landau law calibrating the harmonic mean p-value.
pub const LANDAU_OFFSET: f64 = 0.874;

/// Label mixed into the seed of Monte Carlo null tables.
const TABLE_SEED_LABEL: u64 = 0x6e75_6c6c;

const LANDAU_T_MAX: f64 = 30.0;
const LANDAU_S_MAX: f64 = 50.0;
const LANDAU_DECAY: f64 = 45.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldConfig {
    pub folds: usize,
    pub family: Family,
    pub grid: Vec<f64>,
    pub method: Method,
    pub mc_draws: usize,
    /// Truncation of the asymptotic law; a lower bound when `adaptive_truncation` is set.
    pub k_tr: usize,
    #[serde(default = "yes")]
    pub adaptive_truncation: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl KFoldConfig {
    /// Ten folds, the default grid of `family` and asymptotic p-values.
    pub fn new(family: Family) -> Self {
        KFoldConfig {
            folds: DEFAULT_FOLDS,
            family,
            grid: default_grid(family),
            method: Method::Asymptotic,
            mc_draws: DEFAULT_MC_DRAWS,
            k_tr: DEFAULT_TRUNCATION,
            adaptive_truncation: true,
            seed: 0,
            cache_dir: None,
        }
    }

    pub fn with_folds(mut self, folds: usize) -> Self {
        self.folds = folds;
        self
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("empty parameter grid".into()));
        }
        for &l in &self.grid {
            self.family.check_lambda(l)?;
        }
        Ok(())
    }
}

/// A fixed-parameter test of uniformity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub family: Family,
    pub lambda: f64,
    pub q: Dimension,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldResult {
    pub lambdas: Vec<f64>,
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub p_harmonic: f64,
    pub p_final: f64,
    /// Indices of the points in each fold.
    pub folds: Vec<Vec<usize>>,
    pub config: KFoldConfig,
}

impl KFoldResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_final <= alpha
    }
}

struct Entry {
    calibration: NullCalibration,
}

/// Null calibrations and null standard deviations, built on first use and
/// shared across folds, replicates and threads.
pub struct Calibrator {
    method: Method,
    k_tr: usize,
    adaptive_truncation: bool,
    mc_draws: usize,
    table_seed: u64,
    cache_dir: Option<PathBuf>,
    calibrations: Mutex<HashMap<(u64, usize), Arc<Entry>>>,
    null_sds: Mutex<HashMap<(Family, u64, u32, usize), f64>>,
}

impl Calibrator {
    pub fn new(method: Method) -> Self {
        Calibrator {
            method,
            k_tr: DEFAULT_TRUNCATION,
            adaptive_truncation: true,
            mc_draws: DEFAULT_MC_DRAWS,
            table_seed: derive_seed(0, TABLE_SEED_LABEL),
            cache_dir: None,
            calibrations: Mutex::new(HashMap::new()),
            null_sds: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(config: &KFoldConfig) -> Self {
        let mut c = Calibrator::new(config.method)
            .with_truncation(config.k_tr, config.adaptive_truncation)
            .with_monte_carlo(config.mc_draws, config.seed);
        c.cache_dir = config.cache_dir.clone();
        c
    }

    /// Truncation `k_tr`, raised by [`sufficient_truncation`] when `adaptive` is set.
    pub fn with_truncation(mut self, k_tr: usize, adaptive: bool) -> Self {
        self.k_tr = k_tr;
        self.adaptive_truncation = adaptive;
        self
    }

    /// Table size and master seed for Monte Carlo calibration.
    pub fn with_monte_carlo(mut self, draws: usize, seed: u64) -> Self {
        self.mc_draws = draws;
        self.table_seed = derive_seed(seed, TABLE_SEED_LABEL);
        self
    }

    pub fn with_cache_dir(mut self, dir: PathBuf) -> Self {
        self.cache_dir = Some(dir);
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    fn entry(&self, spec: &KernelSpec, n: usize) -> Result<Arc<Entry>> {
        // The asymptotic law does not depend on n.
        let key_n = if self.method == Method::Asymptotic { 0 } else { n };
        let key = (spec.lambda.to_bits() ^ (spec.family.index() as u64) << 62 ^ (spec.q.get() as u64) << 52, key_n);
        if let Some(e) = self.calibrations.lock().expect("calibration cache").get(&key) {
            return Ok(Arc::clone(e));
        }
        let calibration = match self.method {
            Method::Asymptotic => {
                let k_tr = if self.adaptive_truncation { sufficient_truncation(spec, self.k_tr)? } else { self.k_tr };
                NullCalibration::asymptotic(spec, k_tr)?
            }
            Method::Gamma => NullCalibration::gamma(spec, n)?,
            Method::MonteCarlo => NullCalibration::MonteCarlo(match &self.cache_dir {
                Some(dir) => load_or_build_null_table(dir, spec, n, self.mc_draws, self.table_seed)?,
                None => build_null_table(spec, n, self.mc_draws, self.table_seed)?,
            }),
        };
        let entry = Arc::new(Entry { calibration });
        let mut map = self.calibrations.lock().expect("calibration cache");
        Ok(Arc::clone(map.entry(key).or_insert(entry)))
    }

    /// Upper-tail p-value of `T_n = t` under the null.
    pub fn p_value(&self, spec: &KernelSpec, n: usize, t: f64) -> Result<f64> {
        self.entry(spec, n)?.calibration.p_value(t)
    }

    pub fn critical_value(&self, spec: &KernelSpec, n: usize, alpha: f64) -> Result<f64> {
        self.entry(spec, n)?.calibration.critical_value(alpha)
    }

    /// `√Var[T_n]` under the null.
    pub fn null_sd(&self, spec: &KernelSpec, n: usize) -> Result<f64> {
        let key = (spec.family, spec.lambda.to_bits(), spec.q.get(), n);
        if let Some(&sd) = self.null_sds.lock().expect("variance cache").get(&key) {
            return Ok(sd);
        }
        let sd = null_variance(spec, n)?.sqrt();
        self.null_sds.lock().expect("variance cache").insert(key, sd);
        Ok(sd)
    }

    /// Fixed-parameter test of `sample`.
    pub fn test(&self, sample: &Sample, spec: &KernelSpec) -> Result<TestResult> {
        let t = t_stat(sample, spec)?;
        let p = self.p_value(spec, sample.n(), t.value)?;
        Ok(TestResult {
            family: spec.family,
            lambda: spec.lambda,
            q: spec.q,
            n: sample.n(),
            statistic: t.value,
            p_value: p,
            method: self.method,
        })
    }

    fn estimate(&self, sample: &Sample, family: Family, grid: &[f64]) -> Result<f64> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("empty parameter grid".into()));
        }
        let n = sample.n();
        if n < 2 {
            return Err(Error::InsufficientData(format!("need n ≥ 2 points to estimate the parameter, got {n}")));
        }
        let cosines = sample.pair_cosines();
        let scores = grid
            .iter()
            .map(|&lambda| {
                let spec = KernelSpec::new(family, lambda, sample.q())?;
                Ok(t_stat_from_cosines(&cosines, n, &spec) / self.null_sd(&spec, n)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(argmax_smallest(grid, &scores))
    }
}

/// Grid value maximising the standardised statistic `T_n/√Var[T_n]` on
/// `subsample`; ties go to the smaller value.
pub fn estimate_lambda(subsample: &Sample, family: Family, grid: &[f64]) -> Result<f64> {
    Calibrator::new(Method::Asymptotic).estimate(subsample, family, grid)
}

/// `[Σ_k (K p_k)⁻¹]⁻¹` for `K = pvals.len()`.
pub fn hmp(pvals: &[f64]) -> Result<f64> {
    if pvals.is_empty() {
        return Err(Error::InvalidParameter("no p-values to combine".into()));
    }
    let k = pvals.len() as f64;
    let mut inv = 0.0;
    for &p in pvals {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("p-values must lie in (0, 1], got {p}")));
        }
        inv += 1.0 / (k * p);
    }
    Ok(1.0 / inv)
}

/// Survival function of the standard Landau law with density
/// `π⁻¹∫_0^∞ exp(-tx - (2/π) t log t) sin(2t) dt`.
pub fn landau_sf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::Domain("Landau argument is NaN".into()));
    }
    if z == f64::INFINITY {
        return Ok(0.0);
    }
    if z == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let p = if z >= 0.0 {
        let upper = if z > 0.0 { LANDAU_T_MAX.min(LANDAU_DECAY / z) } else { LANDAU_T_MAX };
        let f = |t: f64| {
            if t == 0.0 {
                2.0
            } else {
                (-t * z - FRAC_2_PI * t * t.ln()).exp() * (2.0 * t).sin() / t
            }
        };
        integrate_adaptive(f, &landau_breaks(upper), 0.0, 1e-11, 20_000)?.value / PI
    } else {
        // Ray rotated onto the imaginary axis, where the integrand decays like e^{-s}.
        let f = |s: f64| (-s).exp() * (FRAC_2_PI * s * s.ln() + s * z).sin() / s;
        0.5 - integrate_adaptive(f, &landau_breaks(LANDAU_S_MAX), 1e-13, 0.0, 20_000)?.value / PI
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Geometric points towards 0 plus unit steps up to `upper`.
fn landau_breaks(upper: f64) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=60).rev().map(|j| upper * 0.5f64.powi(j)).collect();
    b.extend((1..upper.ceil() as usize).map(|i| i as f64).filter(|&x| x > 0.5 * upper && x < upper));
    b.insert(0, 0.0);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Calibrated p-value of a harmonic mean `p_ring` of `k` p-values: the
/// Landau tail beyond `1/p_ring` with location `log k + 0.874` and scale `π/2`.
pub fn landau_hmp_pvalue(p_ring: f64, k: usize) -> Result<f64> {
    if !(p_ring > 0.0 && p_ring <= 1.0) {
        return Err(Error::Domain(format!("harmonic mean p-value must lie in (0, 1], got {p_ring}")));
    }
    if k < 1 {
        return Err(Error::InvalidParameter("need at least one p-value".into()));
    }
    landau_sf((1.0 / p_ring - (k as f64).ln() - LANDAU_OFFSET) / FRAC_PI_2)
}

/// Random permutation of `0..n` cut into `k` contiguous blocks; the first
/// `n mod k` blocks hold one extra point.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, 0));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(perm[start..start + len].to_vec());
        start += len;
    }
    out
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; n];
    for &i in fold {
        inside[i] = true;
    }
    (0..n).filter(|&i| !inside[i]).collect()
}

/// Estimates the parameter on `estimation` and tests the points in `testing`.
fn two_step(
    sample: &Sample,
    estimation: &[usize],
    testing: &[usize],
    family: Family,
    grid: &[f64],
    calibrator: &Calibrator,
) -> Result<TestResult> {
    let lambda = calibrator.estimate(&sample.subset(estimation), family, grid)?;
    let spec = KernelSpec::new(family, lambda, sample.q())?;
    let mut result = calibrator.test(&sample.subset(testing), &spec)?;
    // Exact zeros cannot enter the harmonic mean.
    result.p_value = result.p_value.max(f64::MIN_POSITIVE);
    Ok(result)
}

/// The K-fold test with a fresh [`Calibrator`].
pub fn kfold_test(sample: &Sample, config: &KFoldConfig) -> Result<KFoldResult> {
    kfold_test_with(sample, config, &Calibrator::from_config(config))
}

/// The K-fold test: fold `k` selects the parameter, its complement is tested,
/// and the K p-values are combined by the Landau-calibrated harmonic mean.
pub fn kfold_test_with(sample: &Sample, config: &KFoldConfig, calibrator: &Calibrator) -> Result<KFoldResult> {
    config.validate()?;
    let n = sample.n();
    if n < 2 * config.folds {
        return Err(Error::InsufficientData(format!("need n ≥ 2K = {}, got {n}", 2 * config.folds)));
    }
    let folds = fold_assignment(n, config.folds, config.seed);
    let results = folds
        .par_iter()
        .map(|fold| two_step(sample, fold, &complement(n, fold), config.family, &config.grid, calibrator))
        .collect::<Result<Vec<_>>>()?;
    let p_values: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let p_harmonic = hmp(&p_values)?;
    let p_final = landau_hmp_pvalue(p_harmonic, config.folds)?;
    Ok(KFoldResult {
        lambdas: results.iter().map(|r| r.lambda).collect(),
        statistics: results.iter().map(|r| r.statistic).collect(),
        p_values,
        p_harmonic,
        p_final,
        folds,
        config: config.clone(),
    })
}

/// Split test: the parameter is estimated on a random `(1 - p)` share of the
/// sample and the remaining `p` share is tested. The `folds` field of `config`
/// is ignored; the permutation is the one used by [`kfold_test`].
pub fn split_test(sample: &Sample, p: f64, config: &KFoldConfig) -> Result<TestResult> {
    split_test_with(sample, p, config, &Calibrator::from_config(config))
}

pub fn split_test_with(sample: &Sample, p: f64, config: &KFoldConfig, calibrator: &Calibrator) -> Result<TestResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction must lie in (0, 1), got {p}")));
    }
    config.clone().with_folds(2).validate()?;
    let n = sample.n();
    let m = (p * n as f64).round() as usize;
    if m < 2 || n - m < 2 {
        return Err(Error::InsufficientData(format!("both parts need at least 2 points (n = {n}, p = {p})")));
    }
    let perm = fold_assignment(n, 1, config.seed).remove(0);
    let (estimation, testing) = perm.split_at(n - m);
    two_step(sample, estimation, testing, config.family, &config.grid, calibrator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_uniform;
    use crate::specfun::bessel_i_scaled;

    fn dim(q: u32) -> Dimension {
        Dimension::new(q).unwrap()
    }

    /// Landau density by direct quadrature of its defining integral.
    fn landau_pdf_oracle(x: f64) -> f64 {
        let f = |t: f64| if t == 0.0 { 0.0 } else { (-t * x - FRAC_2_PI * t * t.ln()).exp() * (2.0 * t).sin() };
        // exp(-(2/π) T log T) < 1e-12 at T = 20.
        let breaks: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        integrate_adaptive(f, &breaks, 1e-15, 0.0, 100_000).unwrap().value / PI
    }

    /// Tail by integrating the density up to `x_max` plus `2/(π x_max)`.
    fn landau_sf_oracle(z: f64, x_max: f64, pieces: usize) -> f64 {
        let ratio = (x_max / z).powf(1.0 / pieces as f64);
        let breaks: Vec<f64> = (0..=pieces).map(|i| z * ratio.powi(i as i32)).collect();
        integrate_adaptive(landau_pdf_oracle, &breaks, 1e-13, 0.0, 100_000).unwrap().value + 2.0 / (PI * x_max)
    }

    #[test]
    fn hmp_examples() {
        assert!((hmp(&[0.3; 5]).unwrap() - 0.3).abs() < 1e-15);
        assert!((hmp(&[0.1, 0.9]).unwrap() - 0.18).abs() < 1e-15);
        assert!(hmp(&[0.1, 0.95]).unwrap() > hmp(&[0.1, 0.9]).unwrap());
        assert!(hmp(&[0.1, 0.0]).is_err());
        assert!(hmp(&[1.2]).is_err());
        assert!(hmp(&[]).is_err());
    }

    #[test]
    fn hmp_below_max() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..200 {
            let k = rand::Rng::random_range(&mut rng, 1..12);
            let p: Vec<f64> = (0..k).map(|_| rand::Rng::random_range(&mut rng, 1e-6..=1.0)).collect();
            let max = p.iter().copied().fold(0.0, f64::max);
            assert!(hmp(&p).unwrap() <= max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn landau_reference_values() {
        // Reference values of the standard Landau survival function (scipy.stats.landau.sf).
        let cases = [
            (10, 0.005, 0.005196112605133816),
            (10, 0.05, 0.06605393466309148),
            (10, 0.5, 0.8421294966679748),
            (10, 1.0, 0.9698067794940727),
            (2, 0.01, 0.010550408304766513),
            (2, 0.2, 0.2789999244962725),
            (100, 0.9, 0.9999999991421474),
            (1000, 1.0, 1.0),
        ];
        for (k, p_ring, expected) in cases {
            let p = landau_hmp_pvalue(p_ring, k).unwrap();
            assert!((p - expected).abs() < 1e-9, "K={k} p̊={p_ring}: {p} vs {expected}");
        }
        let tiny = landau_hmp_pvalue(1e-9, 10).unwrap();
        assert!((tiny / 1.0000000230254844e-09 - 1.0).abs() < 1e-8, "{tiny}");
    }

    #[test]
    fn landau_against_double_quadrature() {
        let z = (1.0 / 0.005 - 10f64.ln() - LANDAU_OFFSET) / FRAC_PI_2;
        let coarse = landau_sf_oracle(z, 1e4, 40);
        let fine = landau_sf_oracle(z, 1e5, 400);
        assert!((coarse - fine).abs() < 1e-5);
        let p = landau_hmp_pvalue(0.005, 10).unwrap();
        assert!((p - fine).abs() < 1e-5, "{p} vs {fine}");
        for z in [0.7, 3.0, 20.0] {
            let oracle = landau_sf_oracle(z, 1e5, 400);
            assert!((landau_sf(z).unwrap() - oracle).abs() < 1e-5, "z={z}");
        }
    }

    #[test]
    fn landau_monotone_and_bounded() {
        let mut last = 0.0;
        for i in 1..=200 {
            let p_ring = i as f64 / 200.0;
            let p = landau_hmp_pvalue(p_ring, 10).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= last, "not monotone at {p_ring}");
            last = p;
        }
        assert!(last > 0.96);
        assert!(landau_hmp_pvalue(0.0, 10).is_err());
        assert!(landau_hmp_pvalue(1.5, 10).is_err());
        assert_eq!(landau_sf(f64::INFINITY).unwrap(), 0.0);
        let far = landau_hmp_pvalue(f64::MIN_POSITIVE, 10).unwrap();
        assert!(far > 0.0 && far < 1e-300);
    }

    #[test]
    fn folds_partition() {
        for (n, k) in [(20, 10), (23, 10), (101, 7), (4, 2)] {
            let folds = fold_assignment(n, k, 9);
            assert_eq!(folds.len(), k);
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(fold_assignment(30, 3, 5), fold_assignment(30, 3, 5));
        assert_ne!(fold_assignment(30, 3, 5), fold_assignment(30, 3, 6));
    }

    #[test]
    fn identical_points_pick_large_kappa() {
        let sample = Sample::from_angles(&[0.3, 0.3]);
        assert_eq!(estimate_lambda(&sample, Family::SmoothMax, &[0.1, 50.0]).unwrap(), 50.0);
        // Circle: T_2 = 1 - b_0 and Var = e^{-2κ}I_0(2κ) - (e^{-κ}I_0(κ))².
        let score = |k: f64| {
            let b0 = bessel_i_scaled(0.0, k).unwrap();
            (1.0 - b0) / (bessel_i_scaled(0.0, 2.0 * k).unwrap() - b0 * b0).sqrt()
        };
        assert!(score(50.0) > score(0.1));
        assert_eq!(estimate_lambda(&sample, Family::SmoothMax, &[2.0]).unwrap(), 2.0);
        assert!(estimate_lambda(&Sample::from_angles(&[0.3]), Family::SmoothMax, &[2.0]).is_err());
    }

    #[test]
    fn estimate_matches_direct_scores() {
        let sample = sample_uniform(dim(2), 30, &mut stream_rng(4, 0));
        let grid = [0.2, 0.5, 0.8];
        let direct: Vec<f64> = grid
            .iter()
            .map(|&r| {
                let spec = KernelSpec::poisson(r, dim(2)).unwrap();
                t_stat(&sample, &spec).unwrap().value / null_variance(&spec, 30).unwrap().sqrt()
            })
            .collect();
        let best = grid[(0..3).max_by(|&a, &b| direct[a].total_cmp(&direct[b])).unwrap()];
        assert_eq!(estimate_lambda(&sample, Family::Poisson, &grid).unwrap(), best);
    }

    #[test]
    fn kfold_runs_and_is_deterministic() {
        let sample = sample_uniform(dim(1), 40, &mut stream_rng(11, 0));
        let config = KFoldConfig::new(Family::SmoothMax).with_folds(4).with_seed(7);
        let a = kfold_test(&sample, &config).unwrap();
        let b = kfold_test(&sample, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.p_values.len(), 4);
        assert!(a.p_harmonic <= a.p_values.iter().copied().fold(0.0, f64::max) * (1.0 + 1e-12));
        assert!((0.0..=1.0).contains(&a.p_final));
        for (k, fold) in a.folds.iter().enumerate() {
            let spec = KernelSpec::smooth_max(a.lambdas[k], dim(1)).unwrap();
            let rest = sample.subset(&complement(40, fold));
            assert_eq!(t_stat(&rest, &spec).unwrap().value, a.statistics[k]);
            let lambda = estimate_lambda(&sample.subset(fold), Family::SmoothMax, &config.grid).unwrap();
            assert_eq!(lambda, a.lambdas[k]);
        }
        let json = serde_json::to_string(&a).unwrap();
        let back: KFoldResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn kfold_rejects_concentrated_data() {
        let angles: Vec<f64> = (0..60).map(|i| 0.02 * (i as f64 - 30.0)).collect();
        let sample = Sample::from_angles(&angles);
        let config = KFoldConfig::new(Family::Poisson).with_folds(3).with_seed(1);
        assert!(kfold_test(&sample, &config).unwrap().p_final < 1e-6);
    }

    #[test]
    fn kfold_errors() {
        let sample = sample_uniform(dim(1), 19, &mut stream_rng(1, 0));
        let config = KFoldConfig::new(Family::SmoothMax);
        assert!(matches!(kfold_test(&sample, &config), Err(Error::InsufficientData(_))));
        assert!(kfold_test(&sample, &config.clone().with_folds(1)).is_err());
        assert!(kfold_test(&sample, &config.clone().with_folds(2).with_grid(vec![])).is_err());
        assert!(kfold_test(&sample, &KFoldConfig::new(Family::Poisson).with_folds(2).with_grid(vec![1.5])).is_err());
    }

    #[test]
    fn split_half_equals_first_fold_of_two() {
        let sample = sample_uniform(dim(2), 30, &mut stream_rng(21, 0));
        for method in [Method::Asymptotic, Method::Gamma, Method::MonteCarlo] {
            let mut config = KFoldConfig::new(Family::Poisson).with_folds(2).with_seed(3).with_method(method);
            config.mc_draws = 200;
            let split = split_test(&sample, 0.5, &config).unwrap();
            let kfold = kfold_test(&sample, &config).unwrap();
            assert_eq!(split.lambda, kfold.lambdas[0]);
            assert_eq!(split.statistic, kfold.statistics[0]);
            assert_eq!(split.p_value, kfold.p_values[0]);
            assert_eq!(split.n, 15);
        }
        let config = KFoldConfig::new(Family::Poisson);
        assert!(split_test(&sample, 0.03, &config).is_err());
        assert!(split_test(&sample, 1.0, &config).is_err());
        assert_eq!(split_test(&sample, 0.2, &config).unwrap().n, 6);
    }

    #[test]
    fn monte_carlo_p_values_respect_table_floor() {
        let sample = Sample::from_angles(&(0..20).map(|i| 0.001 * i as f64).collect::<Vec<_>>());
        let mut config = KFoldConfig::new(Family::SmoothMax).with_folds(2).with_method(Method::MonteCarlo);
        config.mc_draws = 99;
        let r = kfold_test(&sample, &config).unwrap();
        for p in &r.p_values {
            assert!((p - 0.01).abs() < 1e-15);
        }
        assert!((r.p_harmonic - 0.01).abs() < 1e-15);
    }

    #[test]
    fn calibrator_reuses_tables() {
        let calibrator = Calibrator::new(Method::MonteCarlo).with_monte_carlo(50, 2);
        let spec = KernelSpec::smooth_max(1.0, dim(1)).unwrap();
        let a = calibrator.entry(&spec, 10).unwrap();
        let b = calibrator.entry(&spec, 10).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = calibrator.entry(&spec, 11).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
    }

    #[test]
    fn small_level_check() {
        let config = KFoldConfig::new(Family::SmoothMax).with_folds(2).with_grid(vec![0.5, 2.0, 8.0]);
        let calibrator = Calibrator::from_config(&config);
        let reps = 200;
        let p: Vec<f64> = (0..reps)
            .map(|i| {
                let sample = sample_uniform(dim(1), 40, &mut stream_rng(100, i));
                kfold_test_with(&sample, &config.clone().with_seed(i), &calibrator).unwrap().p_final
            })
            .collect();
        let rejections = p.iter().filter(|&&x| x <= 0.1).count();
        // Binomial(200, 0.1) lies in [9, 33] with probability > 0.999.
        assert!((9..=33).contains(&rejections), "{rejections}");
    }
}
