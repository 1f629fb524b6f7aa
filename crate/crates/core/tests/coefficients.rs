mod common;

use common::{dim, gauss_legendre, kernel_coef_oracle, rel_err};
use sphere_unif::kernels::triple_product;
use sphere_unif::nulldist::{build_asymptotic, kernel_variance};
use sphere_unif::{Family, KernelSpec};

#[test]
fn closed_forms_match_rodrigues_quadrature() {
    let rule = gauss_legendre(400);
    for q in [1, 2, 3, 6] {
        for (family, lambda) in [(Family::SmoothMax, 0.5), (Family::SmoothMax, 12.0), (Family::Poisson, 0.3), (Family::Poisson, 0.7)] {
            let spec = KernelSpec::new(family, lambda, dim(q)).unwrap();
            let b = spec.gegen_coefs(40);
            for (k, bk) in b.iter().enumerate() {
                let oracle = kernel_coef_oracle(family, lambda, q, k, &rule);
                assert!(rel_err(*bk, oracle) < 1e-10, "{spec} k={k}: {bk} vs {oracle}");
            }
        }
    }
}

#[test]
fn poisson_oracle_reproduces_geometric_coefficients() {
    // On the circle the Poisson kernel is 1 + 2Σρ^k cos kθ.
    let rule = gauss_legendre(400);
    for k in 0..20 {
        let expected = if k == 0 { 1.0 } else { 2.0 * 0.4f64.powi(k as i32) };
        assert!(rel_err(kernel_coef_oracle(Family::Poisson, 0.4, 1, k, &rule), expected) < 1e-12);
    }
}

#[test]
fn asymptotic_law_matches_kernel_moments() {
    for q in [1, 2, 4] {
        let spec = KernelSpec::poisson(0.5, dim(q)).unwrap();
        let law = build_asymptotic(&spec, 400).unwrap();
        assert!(law.mean().abs() < 1e-10 * spec.psi_tilde_zero());
        assert!(rel_err(law.variance(), 2.0 * kernel_variance(&spec).unwrap()) < 1e-10);
    }
}

#[test]
fn triple_products_vanish_off_parity() {
    for q in [1, 2, 3] {
        assert_eq!(triple_product(1, 1, 1, dim(q)), 0.0);
        assert_eq!(triple_product(2, 3, 6, dim(q)), 0.0);
        assert!(triple_product(2, 3, 5, dim(q)) > 0.0);
    }
}
