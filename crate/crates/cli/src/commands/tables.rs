use super::{calibrator, check_alpha, families, grid_for, parse_list};
use crate::error::{CliError, CliResult};
use crate::output::{num, write_table, Format};
use crate::TablesArgs;
use rayon::prelude::*;
use sphere_unif::kfold::{kfold_test_with, KFoldConfig};
use sphere_unif::nulldist::{truncation_errors, Method, TruncationShift, DEFAULT_TRUNCATION};
use sphere_unif::rng::{derive_seed, stream_rng};
use sphere_unif::sampling::sample_uniform;
use sphere_unif::statistic::t_stat_from_cosines;
use sphere_unif::{Dimension, Family, KernelSpec};

const TABLE2_REPS: usize = 10_000;
const TABLE3_REPS: usize = 1_000;

pub fn tables(a: TablesArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let (header, rows) = match a.table {
        1 => truncation_table(&a)?,
        2 => fixed_level_table(&a)?,
        _ => kfold_level_table(&a)?,
    };
    write_table(a.common.out.as_deref(), a.common.format.unwrap_or(Format::Csv), &header, &rows)
}

fn parameters(a: &TablesArgs, kappa_default: &str) -> CliResult<Vec<(Family, f64)>> {
    let mut out = Vec::new();
    for family in families(a.family) {
        let (text, default) = match family {
            Family::SmoothMax => (a.kappa.as_deref(), kappa_default),
            Family::Poisson => (a.rho.as_deref(), "0.25,0.5,0.75"),
        };
        for lambda in parse_list::<f64>(text.unwrap_or(default), "parameter")? {
            family.check_lambda(lambda)?;
            out.push((family, lambda));
        }
    }
    Ok(out)
}

fn cell_seed(seed: u64, q: u32, n: usize) -> u64 {
    derive_seed(seed, (q as u64) << 32 | n as u64)
}

fn rate(rejections: usize, reps: usize) -> String {
    num(rejections as f64 / reps as f64)
}

type Table = (Vec<&'static str>, Vec<Vec<String>>);

fn truncation_table(a: &TablesArgs) -> CliResult<Table> {
    let k_trs: Vec<usize> = parse_list(a.k_tr.as_deref().unwrap_or("10,50,100,1000"), "Ktr")?;
    let mut rows = Vec::new();
    for (family, lambda) in parameters(a, "0.1,1,5,30,60")? {
        let errors = truncation_errors(family, lambda, &k_trs, a.k_max, TruncationShift::Centered)?;
        for (k_tr, e) in k_trs.iter().zip(errors) {
            rows.push(vec![family.to_string(), lambda.to_string(), k_tr.to_string(), a.k_max.to_string(), num(e)]);
        }
    }
    Ok((vec!["family", "lambda", "k_tr", "k_max", "error"], rows))
}

fn fixed_level_table(a: &TablesArgs) -> CliResult<Table> {
    let qs: Vec<u32> = parse_list(a.q.as_deref().unwrap_or("1,2,3,5"), "q")?;
    let ns: Vec<usize> = parse_list(a.n.as_deref().unwrap_or("10,50,200"), "n")?;
    let methods: Vec<Method> = parse_list(a.method.as_deref().unwrap_or("asymp,gamma,mc"), "method")?;
    let reps = a.reps.unwrap_or(TABLE2_REPS);
    let params = parameters(a, "0.1,1,5")?;
    let calibrators: Vec<_> = methods
        .iter()
        .map(|&m| calibrator(m, DEFAULT_TRUNCATION, a.mc_draws, a.common.seed, a.cache_dir.clone()))
        .collect();
    let mut rows = Vec::new();
    for &q in &qs {
        let dim = Dimension::new(q)?;
        let specs = params.iter().map(|&(f, l)| KernelSpec::new(f, l, dim)).collect::<Result<Vec<_>, _>>()?;
        for &n in &ns {
            if n < 2 {
                return Err(CliError::Usage(format!("need n ≥ 2, got {n}")));
            }
            let seed = cell_seed(a.common.seed, q, n);
            let stats: Vec<Vec<f64>> = (0..reps)
                .into_par_iter()
                .map(|i| {
                    let cosines = sample_uniform(dim, n, &mut stream_rng(seed, i as u64)).pair_cosines();
                    specs.iter().map(|s| t_stat_from_cosines(&cosines, n, s)).collect()
                })
                .collect();
            for (method, cal) in methods.iter().zip(&calibrators) {
                for (j, spec) in specs.iter().enumerate() {
                    let c = cal.critical_value(spec, n, a.alpha)?;
                    let hits = stats.iter().filter(|s| s[j] > c).count();
                    rows.push(vec![
                        q.to_string(),
                        n.to_string(),
                        method.to_string(),
                        spec.family.to_string(),
                        spec.lambda.to_string(),
                        a.alpha.to_string(),
                        rate(hits, reps),
                        reps.to_string(),
                    ]);
                }
            }
        }
    }
    Ok((vec!["q", "n", "method", "family", "lambda", "alpha", "rejection", "reps"], rows))
}

fn kfold_level_table(a: &TablesArgs) -> CliResult<Table> {
    let qs: Vec<u32> = parse_list(a.q.as_deref().unwrap_or("1,2,3,5"), "q")?;
    let ns: Vec<usize> = parse_list(a.n.as_deref().unwrap_or("100"), "n")?;
    let methods: Vec<Method> = parse_list(a.method.as_deref().unwrap_or("asymp,gamma"), "method")?;
    let folds: Vec<usize> = parse_list(a.folds.as_deref().unwrap_or("2,4,10,20"), "K")?;
    let reps = a.reps.unwrap_or(TABLE3_REPS);
    let mut rows = Vec::new();
    for &method in &methods {
        let cal = calibrator(method, DEFAULT_TRUNCATION, a.mc_draws, a.common.seed, a.cache_dir.clone());
        for family in families(a.family) {
            let grid = grid_for(a.grid.as_deref(), family)?;
            for &k in &folds {
                for &q in &qs {
                    let dim = Dimension::new(q)?;
                    for &n in &ns {
                        let seed = cell_seed(a.common.seed, q, n);
                        let mut config = KFoldConfig::new(family).with_folds(k).with_grid(grid.clone()).with_method(method);
                        config.mc_draws = a.mc_draws;
                        let hits = (0..reps)
                            .into_par_iter()
                            .map(|i| {
                                let sample = sample_uniform(dim, n, &mut stream_rng(seed, i as u64));
                                let config = config.clone().with_seed(derive_seed(seed, i as u64));
                                Ok(kfold_test_with(&sample, &config, &cal)?.rejects(a.alpha))
                            })
                            .collect::<CliResult<Vec<bool>>>()?
                            .into_iter()
                            .filter(|&r| r)
                            .count();
                        rows.push(vec![
                            family.to_string(),
                            method.to_string(),
                            k.to_string(),
                            q.to_string(),
                            n.to_string(),
                            a.alpha.to_string(),
                            rate(hits, reps),
                            reps.to_string(),
                        ]);
                    }
                }
            }
        }
    }
    Ok((vec!["family", "method", "K", "q", "n", "alpha", "rejection", "reps"], rows))
}
