//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and
//! exits with a failure status if any criterion fails.

mod common;

use common::{dim, gauss_legendre, kernel_coef_oracle, rel_err};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sphere_unif::altdist::{exp_alt, oracle_param, power_scores, var_alt, AltFamily, AltSpec};
use sphere_unif::grid::{default_kappa_grid, default_rho_grid};
use sphere_unif::kfold::{hmp, kfold_test, kfold_test_with, Calibrator, KFoldConfig};
use sphere_unif::nulldist::{
    build_null_table, gamma_match, null_variance, truncation_error, NullCalibration, TruncationShift,
    REFERENCE_TRUNCATION,
};
use sphere_unif::rng::stream_rng;
use sphere_unif::sampling::{sample_alternative, sample_uniform, AltSampler};
use sphere_unif::specfun::struct_constants_seq;
use sphere_unif::statistic::{
    lse_stat, max_pairwise, poisson_rayleigh_transform, rayleigh_stat, smooth_max_rayleigh_transform, t_stat,
    t_stat_from_cosines,
};
use sphere_unif::{Family, KernelSpec, Sample};
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn coefficient_oracle() -> Outcome {
    let rule = gauss_legendre(600);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for q in 1..=5 {
        let specs = [0.1, 1.0, 5.0, 30.0]
            .map(|k| KernelSpec::smooth_max(k, dim(q)).unwrap())
            .into_iter()
            .chain([0.25, 0.5, 0.75].map(|r| KernelSpec::poisson(r, dim(q)).unwrap()));
        for spec in specs {
            for (k, &b) in spec.gegen_coefs(30).iter().enumerate() {
                let oracle = kernel_coef_oracle(spec.family, spec.lambda, q, k, &rule);
                worst = worst.max(rel_err(b, oracle));
                cases += 1;
            }
        }
    }
    outcome(worst <= 1e-9, format!("{cases} coefficients, max relative error {worst:.2e} (limit 1e-9)"))
}

fn truncation_table() -> Outcome {
    let cells = [
        ("K_tr=10, kappa=30", Family::SmoothMax, 30.0, 10, 2e-2),
        ("K_tr=50, kappa=30", Family::SmoothMax, 30.0, 50, 5e-14),
        ("K_tr=50, rho=0.75", Family::Poisson, 0.75, 50, 1e-7),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, family, lambda, k_tr, target) in cells {
        match truncation_error(family, lambda, k_tr, REFERENCE_TRUNCATION, TruncationShift::Centered) {
            Ok(err) => {
                let ok = err > 0.0 && (err / target).log10().abs() <= 1.0;
                pass &= ok;
                parts.push(format!("{label}: {err:.1e} vs {target:.0e} {}", if ok { "ok" } else { "off" }));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{label}: error {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn null_rejection_table() -> Outcome {
    let (n, m, alpha) = (200, 10_000u64, 0.05);
    let spec = KernelSpec::smooth_max(0.1, dim(1)).unwrap();
    let asymp = NullCalibration::asymptotic(&spec, 50).unwrap().critical_value(alpha).unwrap();
    let gamma = NullCalibration::gamma(&spec, n).unwrap().critical_value(alpha).unwrap();
    let table = build_null_table(&spec, n, m as usize, 2).unwrap();
    let mut counts = [0usize; 3];
    for i in 0..m {
        let sample = sample_uniform(dim(1), n, &mut stream_rng(3, i));
        let t = t_stat(&sample, &spec).unwrap().value;
        counts[0] += usize::from(t > asymp);
        counts[1] += usize::from(t > gamma);
        counts[2] += usize::from(table.p_value(t) <= alpha);
    }
    let rates = counts.map(|c| c as f64 / m as f64);
    let pass = rates.iter().all(|r| (r - 0.05).abs() <= 0.006);
    outcome(
        pass,
        format!(
            "q=1 n=200 kappa=0.1 M=1e4: asymptotic {:.4} (reference 0.0493), gamma {:.4} (0.0496), Monte Carlo {:.4} (0.0504); band 0.05 +/- 0.006",
            rates[0], rates[1], rates[2]
        ),
    )
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0);
    (m, var.sqrt())
}

fn moments_vs_sampling() -> Outcome {
    let (n, reps) = (100, 10_000u64);
    let mut worst_z: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let mut failures = Vec::new();
    for family in [AltFamily::Vmf, AltFamily::CauchyLike, AltFamily::Watson, AltFamily::SmallCircle] {
        for kappa_dev in [0.5, 1.0, 2.0] {
            for q in 1..=3 {
                let alt = AltSpec::new(family, kappa_dev, dim(q)).unwrap();
                let specs = [KernelSpec::smooth_max(1.0, dim(q)).unwrap(), KernelSpec::poisson(0.5, dim(q)).unwrap()];
                let sampler = AltSampler::new(&alt).unwrap();
                let mut values = [Vec::new(), Vec::new()];
                for i in 0..reps {
                    let cosines = sampler.sample(n, &mut stream_rng(11, i)).pair_cosines();
                    for (v, spec) in values.iter_mut().zip(&specs) {
                        v.push(t_stat_from_cosines(&cosines, n, spec));
                    }
                }
                for (v, spec) in values.iter().zip(&specs) {
                    let (mean, sd) = mean_sd(v);
                    let z = (mean - exp_alt(spec, &alt, n).unwrap()) / (sd / (reps as f64).sqrt());
                    let vr = rel_err(sd * sd, var_alt(spec, &alt, n).unwrap());
                    worst_z = worst_z.max(z.abs());
                    worst_var = worst_var.max(vr);
                    if z.abs() > 3.0 || vr > 0.10 {
                        failures.push(format!("{family} {kappa_dev} q={q} {spec}: z={z:.2}, var err {vr:.3}"));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("72 cells, max |z| {worst_z:.2} (limit 3), max variance error {worst_var:.3} (limit 0.10){}", fail_list(&failures)),
    )
}

fn fail_list(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failures.join(", "))
    }
}

fn oracle_spot_checks() -> Outcome {
    let cells = [
        (AltFamily::Vmf, 2.0, 1, Family::SmoothMax, 0.7),
        (AltFamily::Watson, 1.0, 2, Family::SmoothMax, 5.8),
        (AltFamily::MixVmf, 6.0, 1, Family::Poisson, 0.90),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (family, kappa_dev, q, kernel, expected) in cells {
        let alt = AltSpec::new(family, kappa_dev, dim(q)).unwrap();
        let grid = match kernel {
            Family::SmoothMax => default_kappa_grid(),
            Family::Poisson => default_rho_grid(),
        };
        let got = oracle_param(kernel, &alt, &grid, 100).unwrap();
        let ok = (got - expected).abs() < 1e-9;
        pass &= ok;
        parts.push(format!("{family} {kappa_dev} q={q} {kernel}: {got} (reference {expected}) {}", if ok { "ok" } else { "off" }));
    }
    outcome(pass, parts.join("; "))
}

fn kfold_level() -> Outcome {
    let (n, reps) = (100, 1000u64);
    let mut pass = true;
    let mut parts = Vec::new();
    for family in [Family::SmoothMax, Family::Poisson] {
        for folds in [2, 10] {
            for q in 1..=3 {
                let config = KFoldConfig::new(family).with_folds(folds);
                let calibrator = Calibrator::from_config(&config);
                let mut rejections = 0;
                for i in 0..reps {
                    let sample = sample_uniform(dim(q), n, &mut stream_rng(5, i));
                    let result = kfold_test_with(&sample, &config.clone().with_seed(i), &calibrator).unwrap();
                    rejections += usize::from(result.rejects(0.05));
                }
                let rate = rejections as f64 / reps as f64;
                let ok = rate > 0.036 && rate < 0.064;
                pass &= ok;
                parts.push(format!("{family} K={folds} q={q}: {rate:.3}{}", if ok { "" } else { " (outside)" }));
            }
        }
    }
    outcome(pass, format!("band (0.036, 0.064): {}", parts.join(", ")))
}

fn limit_connections() -> Outcome {
    let mut worst = [0.0f64; 3];
    for s in 0..20u64 {
        let q = 1 + (s % 3) as u32;
        let n = 50;
        let sample = sample_uniform(dim(q), n, &mut stream_rng(7, s));
        let rayleigh = rayleigh_stat(&sample).unwrap();
        let t1 = t_stat(&sample, &KernelSpec::smooth_max(1e-6, dim(q)).unwrap()).unwrap().value;
        let t2 = t_stat(&sample, &KernelSpec::poisson(1e-6, dim(q)).unwrap()).unwrap().value;
        worst[0] = worst[0].max((smooth_max_rayleigh_transform(t1, 1e-6, n, dim(q)) - rayleigh).abs());
        worst[1] = worst[1].max((poisson_rayleigh_transform(t2, 1e-6, dim(q)) - rayleigh).abs());
        worst[2] = worst[2].max((lse_stat(&sample, 1e3).unwrap() - max_pairwise(&sample).unwrap()).abs());
    }
    let pass = worst[0] <= 1e-4 && worst[1] <= 1e-4 && worst[2] <= 1e-2;
    outcome(
        pass,
        format!(
            "20 samples: smooth-max vs Rayleigh {:.1e}, Poisson vs Rayleigh {:.1e} (limit 1e-4); LSE vs max {:.1e} (limit 1e-2)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn gamma_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for q in [1, 2, 3, 4, 5, 10] {
        for n in [2, 10, 50, 100, 200, 1000] {
            let specs = default_kappa_grid()
                .into_iter()
                .map(|k| KernelSpec::smooth_max(k, dim(q)).unwrap())
                .chain(default_rho_grid().into_iter().map(|r| KernelSpec::poisson(r, dim(q)).unwrap()));
            for spec in specs {
                let g = gamma_match(&spec, n).unwrap();
                worst = worst.max(rel_err(g.shape * g.scale, spec.psi_tilde_zero()));
                worst = worst.max(rel_err(g.shape * g.scale * g.scale, null_variance(&spec, n).unwrap()));
                cases += 1;
            }
        }
    }
    outcome(worst <= 1e-12, format!("{cases} (family, lambda, q, n) cases, max relative error {worst:.1e} (limit 1e-12)"))
}

fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    // Gram–Schmidt on Gaussian columns.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

fn determinism_under_workers() -> std::result::Result<(), String> {
    let run = || {
        let spec = KernelSpec::poisson(0.6, dim(2)).unwrap();
        let table = build_null_table(&spec, 30, 300, 4).unwrap();
        let big = sample_uniform(dim(2), 1500, &mut stream_rng(8, 0));
        let big_t = t_stat(&big, &spec).unwrap().value;
        let alt = AltSpec::new(AltFamily::MixCauchy, 4.0, dim(2)).unwrap();
        let scores = power_scores(Family::Poisson, &[0.2, 0.5, 0.8], &alt, 100).unwrap();
        let drawn = sample_alternative(&alt, 50, &mut stream_rng(9, 1)).unwrap();
        let config = KFoldConfig::new(Family::SmoothMax).with_folds(5).with_seed(3);
        let kfold = kfold_test(&drawn, &config).unwrap();
        (table.draws().to_vec(), big_t, scores, drawn.as_flat().to_vec(), kfold)
    };
    let results: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(run))
        .collect();
    if results.windows(2).all(|w| w[0] == w[1]) {
        Ok(())
    } else {
        Err("results differ between 1, 2 and 4 worker threads".into())
    }
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();
    // Rotation and permutation invariance.
    let mut worst: f64 = 0.0;
    for q in 1..=4 {
        let mut rng = stream_rng(12, q as u64);
        let sample = sample_uniform(dim(q), 60, &mut rng);
        let rot = random_rotation(q as usize + 1, &mut rng);
        let mut perm: Vec<usize> = (0..60).collect();
        perm.reverse();
        perm.swap(3, 17);
        let rows: Vec<Vec<f64>> = perm
            .iter()
            .map(|&i| rot.iter().map(|r| r.iter().zip(sample.row(i)).map(|(a, b)| a * b).sum()).collect())
            .collect();
        let moved = Sample::new(dim(q), &rows).unwrap();
        for spec in [KernelSpec::smooth_max(3.0, dim(q)).unwrap(), KernelSpec::poisson(0.7, dim(q)).unwrap()] {
            let a = t_stat(&sample, &spec).unwrap().value;
            let b = t_stat(&moved, &spec).unwrap().value;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    if worst > 1e-10 {
        failures.push(format!("invariance error {worst:.1e}"));
    }
    // Weight-dof identity at K = 500.
    let mut identity: f64 = 0.0;
    for q in [1, 2, 3, 5, 10] {
        let sc = struct_constants_seq(500, dim(q));
        for spec in [0.1, 1.0, 5.0]
            .map(|k| KernelSpec::smooth_max(k, dim(q)).unwrap())
            .into_iter()
            .chain([0.1, 0.25, 0.5].map(|r| KernelSpec::poisson(r, dim(q)).unwrap()))
        {
            let w = spec.sobolev_weights(500);
            let sum: f64 = w.iter().zip(&sc[1..]).map(|(w, c)| w * c.d).sum();
            identity = identity.max(rel_err(sum, spec.psi_tilde_zero()));
        }
    }
    if identity > 1e-6 {
        failures.push(format!("weight-dof identity error {identity:.1e}"));
    }
    // Harmonic mean bound.
    let mut rng = stream_rng(13, 0);
    for _ in 0..1000 {
        let k = rng.random_range(1..20);
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(1e-8..=1.0)).collect();
        let max = p.iter().copied().fold(0.0, f64::max);
        if hmp(&p).unwrap() > max * (1.0 + 1e-12) {
            failures.push("harmonic mean above max".into());
            break;
        }
    }
    if let Err(e) = determinism_under_workers() {
        failures.push(e);
    }
    outcome(
        failures.is_empty(),
        format!("invariance {worst:.1e}, weight-dof identity {identity:.1e}, HMP bound, worker determinism{}", fail_list(&failures)),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("coefficient oracle equivalence", coefficient_oracle),
        ("truncation error table", truncation_table),
        ("null rejection table", null_rejection_table),
        ("moments vs sampling", moments_vs_sampling),
        ("oracle parameters", oracle_spot_checks),
        ("K-fold level", kfold_level),
        ("limit connections", limit_connections),
        ("gamma-match identities", gamma_identities),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let Outcome { pass, detail } = check();
        failed += usize::from(!pass);
        println!(
            "criterion {} ({name}): {} [{:.1} s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
