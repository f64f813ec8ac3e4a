use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use qdslab::catalog::{self, CatalogEntry, RateFormula};
use qdslab::resolvent::{
    conservativity_verdict, ell_lambda, ell_lambda_quadrature, predual_annihilator_check, q_lambda, q_power_limit,
    truncation_sweep, verify_explosion_solution, LaplaceContext, QMethod, Trend, Verdict,
};
use qdslab::semigroup::explosion_transform_quadrature;
use qdslab::{linalg, Execution, HermitianForm, ModelSpec, Tolerances};

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn diag(v: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|x| c(*x))))
}

fn birth_12() -> ModelSpec {
    catalog::build_pure_birth(&RateFormula::List { rates: vec![1.0, 2.0] }, 1).unwrap()
}

fn laplace_ctx(spec: &ModelSpec, lambda: f64) -> LaplaceContext<'_> {
    LaplaceContext::new(spec, lambda, Tolerances::default()).unwrap()
}

// Probability that the chain started at 0 climbs past the top before an independent Exp(λ) clock rings.
fn escape_before_clock(rates: &[f64], lambda: f64) -> f64 {
    rates.iter().map(|q| q / (q + lambda)).product()
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    a.adjoint() * a
}

#[test]
fn two_state_resolvent_maps() {
    for lambda in [0.5, 1.0, 3.0] {
        let spec = birth_12();
        let ctx = laplace_ctx(&spec, lambda);
        let q = q_lambda(&ctx, &HermitianForm::identity(2), QMethod::Sylvester).unwrap();
        assert!((&q.matrix - diag(&[1.0 / (1.0 + lambda), 0.0])).norm() < 1e-14);
        let x = HermitianForm::observable(diag(&[0.0, 1.0])).unwrap();
        let q = q_lambda(&ctx, &x, QMethod::Sylvester).unwrap();
        assert!((&q.matrix - diag(&[1.0 / (1.0 + lambda), 0.0])).norm() < 1e-14);
        let ell = ell_lambda(&ctx).unwrap();
        assert!((&ell.matrix - diag(&[0.0, 2.0 / (lambda * (lambda + 2.0))])).norm() < 1e-14);
    }
    let spec = birth_12();
    let ctx = laplace_ctx(&spec, 1.0);
    let ell = ell_lambda(&ctx).unwrap();
    assert!((ell.matrix[(1, 1)].re - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn sylvester_and_quadrature_agree() {
    let spec = catalog::build_bounded_lindblad(5, 21, 2).unwrap();
    let ctx = laplace_ctx(&spec, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = HermitianForm::observable(random_psd(&mut rng, 5)).unwrap();
    let a = q_lambda(&ctx, &x, QMethod::Sylvester).unwrap();
    let b = q_lambda(&ctx, &x, QMethod::Quadrature).unwrap();
    assert!((&a.matrix - &b.matrix).norm() < 1e-6 * a.matrix.norm().max(1.0));

    let spec = catalog::build_pure_birth(&RateFormula::Linear, 6).unwrap();
    let ctx = laplace_ctx(&spec, 1.3);
    let a = ell_lambda(&ctx).unwrap();
    let b = ell_lambda_quadrature(&ctx).unwrap();
    assert!((&a.matrix - &b.matrix).norm() < 1e-6);
}

#[test]
fn power_iteration_is_nilpotent_on_birth_chains() {
    for top in [1usize, 3, 7, 12] {
        let spec = catalog::build_pure_birth(&RateFormula::Quadratic, top).unwrap();
        let ctx = laplace_ctx(&spec, 1.0);
        let q = q_power_limit(&ctx, 1000, 0.0).unwrap();
        assert!(q.converged);
        assert!(q.iterations <= top + 2, "top={top} iterations={}", q.iterations);
        assert_eq!(q.limit.norm(), 0.0);
    }
}

#[test]
fn unitary_has_no_explosion() {
    let spec = catalog::build_unitary(4, 3).unwrap();
    let ctx = laplace_ctx(&spec, 1.0);
    let cert = conservativity_verdict(&ctx).unwrap();
    assert!(cert.ell_norm < 1e-12 && cert.q_limit_norm < 1e-12);
    assert_eq!(cert.verdict, Verdict::Conservative);
}

#[test]
fn linear_chain_mass_telescopes() {
    let spec = catalog::build_pure_birth(&RateFormula::Linear, 9).unwrap();
    let cert = conservativity_verdict(&laplace_ctx(&spec, 2.0)).unwrap();
    assert!((cert.explosion_mass - 1.0 / 66.0).abs() < 1e-12);
    assert_eq!(cert.verdict, Verdict::Explosive);
}

#[test]
fn certificate_matches_time_domain_transform() {
    let tol = Tolerances::default();
    let spec = catalog::build_pure_birth(&RateFormula::Quadratic, 5).unwrap();
    let cert = conservativity_verdict(&laplace_ctx(&spec, 1.0)).unwrap();
    let oracle = explosion_transform_quadrature(&spec, 1.0, &tol).unwrap();
    assert!((&cert.transform().matrix - &oracle).norm() < 1e-6);
}

#[test]
fn two_state_solution_and_annihilator() {
    let spec = birth_12();
    let ctx = laplace_ctx(&spec, 1.0);
    let cert = conservativity_verdict(&ctx).unwrap();
    assert_eq!(cert.verdict, Verdict::Explosive);
    assert!((cert.explosion_mass - 1.0 / 3.0).abs() < 1e-14);
    let check = verify_explosion_solution(&ctx, &cert).unwrap();
    assert!(check.applicable && check.passed);

    // D = span{e0}: one real equation on four real unknowns.
    let ann = predual_annihilator_check(&ctx).unwrap();
    assert_eq!(ann.dimension, 3);
    assert!(!ann.ambiguous && ann.psd_element_found);
    let x = ann.psd_element.unwrap();
    let eq = spec.generator(&x) - &x * c(1.0);
    assert!(eq[(0, 0)].norm() < 1e-8);
    assert!(linalg::min_eig(&x) > -1e-10);
    assert!((x.trace().re - 1.0).abs() < 1e-8);
}

#[test]
fn conservative_models_have_trivial_annihilator() {
    let spec = catalog::build_bounded_lindblad(4, 7, 2).unwrap();
    let ctx = laplace_ctx(&spec, 1.0);
    assert_eq!(conservativity_verdict(&ctx).unwrap().verdict, Verdict::Conservative);
    let ann = predual_annihilator_check(&ctx).unwrap();
    assert_eq!(ann.dimension, 0);
    assert!(!ann.psd_element_found);
}

#[test]
fn sweeps_classify_families() {
    let tol = Tolerances::default();
    let unitary = CatalogEntry::BoundedLindblad { dim: 2, seed: 3, kraus: 0 };
    let s = truncation_sweep(&unitary, 1.0, &[2, 4, 8], &tol, Execution::Parallel).unwrap();
    assert_eq!(s.trend, Trend::DecayingToZero);

    let linear = CatalogEntry::PureBirth { rates: RateFormula::Linear, top: 1 };
    let s = truncation_sweep(&linear, 1.0, &[16, 32, 64], &tol, Execution::Parallel).unwrap();
    assert_eq!(s.trend, Trend::DecayingToZero);
    for (n, v) in s.dims.iter().zip(&s.observable_trace) {
        assert!((v - 1.0 / (*n as f64 + 2.0)).abs() < 1e-10);
    }

    let quadratic = CatalogEntry::PureBirth { rates: RateFormula::Quadratic, top: 1 };
    let s = truncation_sweep(&quadratic, 1.0, &[16, 32, 64], &tol, Execution::Sequential).unwrap();
    assert_eq!(s.trend, Trend::StabilizingPositive);
    let limit = std::f64::consts::PI / std::f64::consts::PI.sinh();
    assert!((s.extrapolated_limit.unwrap() - limit).abs() < 5e-3);

    assert!(truncation_sweep(&linear, 1.0, &[8, 4], &tol, Execution::Sequential).is_err());
}

#[test]
fn sweep_is_execution_independent() {
    let tol = Tolerances::default();
    let family = CatalogEntry::PureBirth { rates: RateFormula::Power { exponent: 1.5 }, top: 1 };
    let a = truncation_sweep(&family, 0.7, &[4, 8, 16], &tol, Execution::Sequential).unwrap();
    let b = truncation_sweep(&family, 0.7, &[4, 8, 16], &tol, Execution::Parallel).unwrap();
    assert_eq!(a.observable_trace, b.observable_trace);
    assert_eq!(a.trend, b.trend);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn resolvent_map_preserves_positivity(seed in any::<u64>(), dim in 1usize..5, kraus in 0usize..3, lambda in 0.1f64..5.0) {
        let spec = catalog::build_bounded_lindblad(dim, seed, kraus).unwrap();
        let ctx = laplace_ctx(&spec, lambda);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let x = random_psd(&mut rng, dim);
        let scale = x.norm().max(1.0);
        let q = q_lambda(&ctx, &HermitianForm::observable(x).unwrap(), QMethod::Sylvester).unwrap();
        prop_assert!(q.min_eig() >= -1e-10 * scale);
        prop_assert!(ell_lambda(&ctx).unwrap().min_eig() >= -1e-10);
    }

    #[test]
    fn explosion_transform_is_between_zero_and_identity(top in 1usize..12, p in 0.0f64..2.5, lambda in 0.2f64..4.0) {
        let spec = catalog::build_pure_birth(&RateFormula::Power { exponent: p }, top).unwrap();
        let cert = conservativity_verdict(&laplace_ctx(&spec, lambda)).unwrap();
        let x = &cert.transform().matrix;
        prop_assert!(linalg::min_eig(x) >= -1e-12);
        let id = CMat::identity(top + 1, top + 1) * c(1.0 / lambda);
        prop_assert!(linalg::min_eig(&(id - x)) >= -1e-12);
    }

    #[test]
    fn birth_mass_is_exact(rates in prop::collection::vec(0.05f64..20.0, 1..10), lambda in 0.1f64..5.0) {
        let top = rates.len() - 1;
        let spec = catalog::build_pure_birth(&RateFormula::List { rates: rates.clone() }, top).unwrap();
        let cert = conservativity_verdict(&laplace_ctx(&spec, lambda)).unwrap();
        let oracle = escape_before_clock(&rates, lambda);
        prop_assert!((cert.explosion_mass - oracle).abs() <= 1e-10 * oracle.max(1e-3));
    }

    #[test]
    fn birth_mass_decreases_with_truncation(p in 0.0f64..2.5, lambda in 0.2f64..3.0, base in 2usize..8) {
        let family = CatalogEntry::PureBirth { rates: RateFormula::Power { exponent: p }, top: 1 };
        let dims = [base, base + 3, base + 7];
        let s = truncation_sweep(&family, lambda, &dims, &Tolerances::default(), Execution::Sequential).unwrap();
        for w in s.observable_trace.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }
}
