use super::{calibrator, check_alpha, families, grid_for, needs_family, parse_list};
use crate::error::CliResult;
use crate::output::{num, write_table, Format};
use crate::PowerArgs;
use rayon::prelude::*;
use sphere_unif::altdist::{oracle_param, AltSpec};
use sphere_unif::kfold::{kfold_test_with, KFoldConfig};
use sphere_unif::rng::{derive_seed, stream_rng};
use sphere_unif::sampling::AltSampler;
use sphere_unif::statistic::{rayleigh_p_value, rayleigh_stat, t_stat_from_cosines};
use sphere_unif::{Dimension, KernelSpec};

/// One column of the power study.
enum Procedure {
    Rayleigh,
    Fixed { name: &'static str, spec: KernelSpec },
    KFold(KFoldConfig),
}

impl Procedure {
    fn name(&self) -> String {
        match self {
            Procedure::Rayleigh => "rayleigh".into(),
            Procedure::Fixed { name, .. } => (*name).into(),
            Procedure::KFold(c) => format!("kfold{}", c.folds),
        }
    }

    fn family(&self) -> String {
        match self {
            Procedure::Rayleigh => String::new(),
            Procedure::Fixed { spec, .. } => spec.family.to_string(),
            Procedure::KFold(c) => c.family.to_string(),
        }
    }

    fn lambda(&self) -> String {
        match self {
            Procedure::Fixed { spec, .. } => spec.lambda.to_string(),
            _ => String::new(),
        }
    }
}

pub fn power(a: PowerArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let q = Dimension::new(a.q)?;
    let kappas: Vec<f64> = parse_list(&a.kappa_dev, "kappa-dev")?;
    let lambdas: Vec<f64> = match &a.lambda {
        Some(t) => {
            needs_family("--lambda", a.family)?;
            parse_list(t, "lambda")?
        }
        None => Vec::new(),
    };
    let cal = &a.calibration;
    let calibrator = calibrator(cal.method, cal.k_tr, a.mc_draws, a.common.seed, cal.cache_dir.clone());
    let mut rows = Vec::new();
    for (row, &kappa) in kappas.iter().enumerate() {
        let alt = AltSpec::new(a.alt, kappa, q)?;
        let mut procedures = vec![Procedure::Rayleigh];
        for family in families(a.family) {
            for &lambda in &lambdas {
                procedures.push(Procedure::Fixed { name: "fixed", spec: KernelSpec::new(family, lambda, q)? });
            }
            let grid = grid_for(a.grid.as_deref(), family)?;
            if !alt.is_uniform() {
                let oracle = oracle_param(family, &alt, &grid, a.n)?;
                procedures.push(Procedure::Fixed { name: "oracle", spec: KernelSpec::new(family, oracle, q)? });
            }
            let mut config = KFoldConfig::new(family).with_folds(a.folds).with_grid(grid).with_method(cal.method);
            config.k_tr = cal.k_tr;
            config.mc_draws = a.mc_draws;
            procedures.push(Procedure::KFold(config));
        }
        let sampler = AltSampler::new(&alt)?;
        let seed = derive_seed(a.common.seed, row as u64);
        let decisions = (0..a.reps)
            .into_par_iter()
            .map(|i| {
                let sample = sampler.sample(a.n, &mut stream_rng(seed, i as u64));
                let cosines = sample.pair_cosines();
                procedures
                    .iter()
                    .map(|p| {
                        let pv = match p {
                            Procedure::Rayleigh => rayleigh_p_value(rayleigh_stat(&sample)?, q),
                            Procedure::Fixed { spec, .. } => {
                                calibrator.p_value(spec, a.n, t_stat_from_cosines(&cosines, a.n, spec))?
                            }
                            Procedure::KFold(config) => {
                                let config = config.clone().with_seed(derive_seed(seed, i as u64));
                                kfold_test_with(&sample, &config, &calibrator)?.p_final
                            }
                        };
                        Ok(pv <= a.alpha)
                    })
                    .collect::<CliResult<Vec<bool>>>()
            })
            .collect::<CliResult<Vec<_>>>()?;
        for (j, p) in procedures.iter().enumerate() {
            let hits = decisions.iter().filter(|d| d[j]).count();
            rows.push(vec![
                a.alt.to_string(),
                kappa.to_string(),
                a.q.to_string(),
                a.n.to_string(),
                p.name(),
                p.family(),
                p.lambda(),
                a.alpha.to_string(),
                num(hits as f64 / a.reps as f64),
                a.reps.to_string(),
            ]);
        }
    }
    let header = ["alt", "kappa_dev", "q", "n", "test", "family", "lambda", "alpha", "power", "reps"];
    write_table(a.common.out.as_deref(), a.common.format.unwrap_or(Format::Csv), &header, &rows)
}
