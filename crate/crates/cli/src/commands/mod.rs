mod power;
mod tables;

pub use power::power;
pub use tables::tables;

use crate::error::{CliError, CliResult};
use crate::input::{read_sample, InputOptions};
use crate::output::{num, write_json, write_table, Format};
use crate::{CriticalArgs, OracleArgs, SampleArgs, TestArgs};
use rayon::prelude::*;
use serde_json::json;
use sphere_unif::altdist::{oracle_param, AltFamily, AltSpec};
use sphere_unif::grid::{default_grid, parse_grid};
use sphere_unif::kfold::{kfold_test_with, Calibrator, KFoldConfig, TestResult, DEFAULT_FOLDS};
use sphere_unif::nulldist::Method;
use sphere_unif::rng::stream_rng;
use sphere_unif::sampling::{sample_alternative, sample_uniform};
use sphere_unif::{Dimension, Family, KernelSpec};
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

pub(crate) fn parse_list<T>(text: &str, what: &str) -> CliResult<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| CliError::Usage(format!("bad {what} '{s}': {e}"))))
        .collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("empty {what} list")));
    }
    Ok(items)
}

pub(crate) fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn families(family: Option<Family>) -> Vec<Family> {
    family.map_or_else(|| vec![Family::SmoothMax, Family::Poisson], |f| vec![f])
}

pub(crate) fn grid_for(text: Option<&str>, family: Family) -> CliResult<Vec<f64>> {
    Ok(match text {
        Some(t) => parse_grid(t, family)?,
        None => default_grid(family),
    })
}

pub(crate) fn calibrator(method: Method, k_tr: usize, draws: usize, seed: u64, cache_dir: Option<PathBuf>) -> Calibrator {
    let c = Calibrator::new(method).with_truncation(k_tr, true).with_monte_carlo(draws, seed);
    match cache_dir {
        Some(dir) => c.with_cache_dir(dir),
        None => c,
    }
}

fn needs_family(flag: &str, family: Option<Family>) -> CliResult<Family> {
    family.ok_or_else(|| CliError::Usage(format!("{flag} needs --family")))
}

fn test_json(r: &TestResult, alpha: f64) -> serde_json::Value {
    json!({
        "family": r.family,
        "lambda": r.lambda,
        "statistic": r.statistic,
        "p_value": r.p_value,
        "method": r.method,
        "reject": r.rejects(alpha),
    })
}

pub fn test(a: TestArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let sample = read_sample(&a.input, &InputOptions { period: a.period, q: a.q })?;
    let q = sample.q();
    let cal = &a.calibration;
    let calibrator = calibrator(cal.method, cal.k_tr, a.draws, a.common.seed, cal.cache_dir.clone());
    let lambdas: Option<Vec<f64>> = a.lambda.as_deref().map(|t| parse_list(t, "lambda")).transpose()?;
    if lambdas.is_some() {
        needs_family("--lambda", a.family)?;
    }
    let mut fixed = Vec::new();
    let mut kfold = Vec::new();
    for family in families(a.family) {
        for &lambda in lambdas.iter().flatten() {
            fixed.push(calibrator.test(&sample, &KernelSpec::new(family, lambda, q)?)?);
        }
        if a.folds.is_some() || lambdas.is_none() {
            let mut config = KFoldConfig::new(family)
                .with_folds(a.folds.unwrap_or(DEFAULT_FOLDS))
                .with_grid(grid_for(a.grid.as_deref(), family)?)
                .with_method(cal.method)
                .with_seed(a.common.seed);
            config.k_tr = cal.k_tr;
            config.mc_draws = a.draws;
            config.cache_dir = cal.cache_dir.clone();
            kfold.push(kfold_test_with(&sample, &config, &calibrator)?);
        }
    }
    let out = a.common.out.as_deref();
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let report = json!({
                "n": sample.n(),
                "q": q.get(),
                "alpha": a.alpha,
                "method": cal.method,
                "seed": a.common.seed,
                "fixed": fixed.iter().map(|r| test_json(r, a.alpha)).collect::<Vec<_>>(),
                "kfold": kfold.iter().map(|r| json!({
                    "family": r.config.family,
                    "folds": r.config.folds,
                    "lambdas": r.lambdas,
                    "statistics": r.statistics,
                    "p_values": r.p_values,
                    "p_harmonic": r.p_harmonic,
                    "p_final": r.p_final,
                    "reject": r.rejects(a.alpha),
                    "config": r.config,
                })).collect::<Vec<_>>(),
            });
            write_json(out, &report)
        }
        Format::Csv => {
            let header = ["test", "family", "lambda", "statistic", "p_value", "method", "reject"];
            let mut rows = Vec::new();
            for r in &fixed {
                rows.push(vec![
                    "fixed".into(),
                    r.family.to_string(),
                    r.lambda.to_string(),
                    num(r.statistic),
                    num(r.p_value),
                    r.method.to_string(),
                    r.rejects(a.alpha).to_string(),
                ]);
            }
            for r in &kfold {
                let family = r.config.family.to_string();
                for (k, ((l, t), p)) in r.lambdas.iter().zip(&r.statistics).zip(&r.p_values).enumerate() {
                    let reject = (*p <= a.alpha).to_string();
                    rows.push(vec![format!("fold{}", k + 1), family.clone(), l.to_string(), num(*t), num(*p), cal.method.to_string(), reject]);
                }
                rows.push(vec![
                    format!("kfold{}", r.config.folds),
                    family,
                    String::new(),
                    String::new(),
                    num(r.p_final),
                    cal.method.to_string(),
                    r.rejects(a.alpha).to_string(),
                ]);
            }
            write_table(out, Format::Csv, &header, &rows)
        }
    }
}

pub fn sample(a: SampleArgs) -> CliResult<()> {
    let q = Dimension::new(a.q)?;
    let mut rng = stream_rng(a.common.seed, 0);
    let sample = match a.alt {
        None => sample_uniform(q, a.n, &mut rng),
        Some(family) => {
            let mut alt = AltSpec::new(family, a.kappa_dev, q)?;
            if let Some(nu) = a.nu {
                alt = alt.with_nu(nu)?;
            }
            sample_alternative(&alt, a.n, &mut rng)?
        }
    };
    let header: Vec<String> = (1..=q.ambient()).map(|j| format!("x{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = sample.rows().map(|r| r.iter().map(|&v| num(v)).collect()).collect();
    write_table(a.common.out.as_deref(), a.common.format.unwrap_or(Format::Csv), &header, &rows)
}

pub fn oracle(a: OracleArgs) -> CliResult<()> {
    let alts: Vec<AltFamily> = match &a.alt {
        Some(t) => parse_list(t, "alternative")?,
        None => AltFamily::ALL.to_vec(),
    };
    if a.grid.is_some() {
        needs_family("--grid", a.family)?;
    }
    let kappas: Vec<f64> = parse_list(&a.kappa_dev, "kappa-dev")?;
    let qs: Vec<u32> = parse_list(&a.q, "q")?;
    let mut cells = Vec::new();
    for &alt in &alts {
        for &kappa in &kappas {
            for &q in &qs {
                for family in families(a.family) {
                    cells.push((alt, kappa, q, family));
                }
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(alt, kappa, q, family)| {
            let spec = AltSpec::new(alt, kappa, Dimension::new(q)?)?;
            let lambda = oracle_param(family, &spec, &grid_for(a.grid.as_deref(), family)?, a.n)?;
            Ok(vec![alt.to_string(), kappa.to_string(), q.to_string(), a.n.to_string(), family.to_string(), lambda.to_string()])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let header = ["alt", "kappa_dev", "q", "n", "family", "lambda"];
    write_table(a.common.out.as_deref(), a.common.format.unwrap_or(Format::Csv), &header, &rows)
}

pub fn critical(a: CriticalArgs) -> CliResult<()> {
    let q = Dimension::new(a.q)?;
    let lambdas: Vec<f64> = parse_list(&a.lambda, "lambda")?;
    let alphas: Vec<f64> = parse_list(&a.alpha, "alpha")?;
    for &alpha in &alphas {
        check_alpha(alpha)?;
    }
    let cal = &a.calibration;
    let calibrator = calibrator(cal.method, cal.k_tr, a.draws, a.common.seed, cal.cache_dir.clone());
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let spec = KernelSpec::new(a.family, lambda, q)?;
        for &alpha in &alphas {
            let c = calibrator.critical_value(&spec, a.n, alpha)?;
            rows.push(vec![
                a.family.to_string(),
                lambda.to_string(),
                a.q.to_string(),
                a.n.to_string(),
                cal.method.to_string(),
                alpha.to_string(),
                num(c),
            ]);
        }
    }
    let header = ["family", "lambda", "q", "n", "method", "alpha", "critical_value"];
    write_table(a.common.out.as_deref(), a.common.format.unwrap_or(Format::Csv), &header, &rows)
}
