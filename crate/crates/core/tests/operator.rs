use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use qdslab::catalog::{self, RateFormula};
use qdslab::operator::choi_matrix;
use qdslab::{apply_generator, apply_phi, linalg, predual_generator, validate_model, ConditionVerdict, Domain, HermitianForm, ModelSpec, Tolerances};

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn diag(v: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|x| c(*x))))
}

fn birth_12() -> ModelSpec {
    catalog::build_pure_birth(&RateFormula::List { rates: vec![1.0, 2.0] }, 1).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CMat {
    CMat::from_fn(n, m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = gaussian(rng, n, n);
    (&a + a.adjoint()) * c(0.5)
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

#[test]
fn validate_examples() {
    let tol = Tolerances::default();
    let unitary = catalog::build_unitary(4, 3).unwrap();
    let r = validate_model(&unitary, &tol).unwrap();
    assert!(r.dissipativity_residual < 1e-12);
    assert!(r.condition_iii_residual < 1e-12 && r.condition_iii_prime_residual < 1e-12 && r.condition_iv_residual < 1e-12);

    let r = validate_model(&birth_12(), &tol).unwrap();
    assert!((r.condition_iii_prime_residual - 2.0).abs() < 1e-12);
    assert!(r.dissipativity_residual == 0.0 && r.condition_iii_residual < 1e-12 && r.condition_iv_residual < 1e-12);
    assert_eq!(r.condition_iii_prime, ConditionVerdict::Fail);
    assert!(r.is_valid());

    let expansive = ModelSpec::new("expansive", -CMat::identity(2, 2), vec![], Domain::full(2)).unwrap();
    let r = validate_model(&expansive, &tol).unwrap();
    assert!((r.dissipativity_residual - 2.0).abs() < 1e-12);
    assert_eq!(r.dissipativity, ConditionVerdict::Fail);
    assert!(!r.is_valid());
}

#[test]
fn phi_and_generator_examples() {
    let spec = birth_12();
    let unitary = catalog::build_unitary(3, 1).unwrap();
    let x = HermitianForm::observable(diag(&[0.3, -1.2, 4.0])).unwrap();
    assert_eq!(max_abs(&apply_phi(&unitary, &x).unwrap().matrix), 0.0);
    assert!(max_abs(&apply_generator(&unitary, &HermitianForm::identity(3)).unwrap().matrix) < 1e-14);

    let phi_id = apply_phi(&spec, &HermitianForm::identity(2)).unwrap();
    assert!(max_abs(&(&phi_id.matrix - diag(&[1.0, 0.0]))) < 1e-15);
    for (a, b) in [(0.7, -0.4), (2.0, 3.0), (-1.0, 0.25)] {
        let x = HermitianForm::observable(diag(&[a, b])).unwrap();
        let phi = apply_phi(&spec, &x).unwrap();
        assert!(max_abs(&(&phi.matrix - diag(&[b, 0.0]))) < 1e-15);
        let l = apply_generator(&spec, &x).unwrap();
        assert!(max_abs(&(&l.matrix - diag(&[b - a, -2.0 * b]))) < 1e-14);
    }
    let l = apply_generator(&spec, &HermitianForm::identity(2)).unwrap();
    assert!(max_abs(&(&l.matrix - diag(&[0.0, -2.0]))) < 1e-15);
}

#[test]
fn predual_examples() {
    let tol = Tolerances::default();
    let e0 = nalgebra::DVector::from_vec(vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
    let unitary = catalog::build_unitary(4, 5).unwrap();
    let r = predual_generator(&unitary, &e0, &e0, &tol).unwrap();
    assert!(r.trace().norm() < 1e-14);

    let spec = birth_12();
    let e0 = nalgebra::DVector::from_vec(vec![c(1.0), c(0.0)]);
    let r = predual_generator(&spec, &e0, &e0, &tol).unwrap();
    assert!(r.trace().norm() < 1e-14);
    let e1 = nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]);
    assert!(predual_generator(&spec, &e1, &e0, &tol).is_err());
}

#[test]
fn duality_on_random_lindblad() {
    let tol = Tolerances::default();
    let spec = catalog::build_bounded_lindblad(4, 11, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = gaussian(&mut rng, 4, 1).column(0).into_owned();
        let v = gaussian(&mut rng, 4, 1).column(0).into_owned();
        let x = random_hermitian(&mut rng, 4);
        let dual = predual_generator(&spec, &u, &v, &tol).unwrap();
        let lhs = (&x * &dual).trace();
        let rhs = (u.adjoint() * spec.generator(&x) * &v)[(0, 0)];
        worst = worst.max((lhs - rhs).norm());
    }
    assert!(worst <= 1e-10, "{worst}");
}

fn catalog_specs() -> Vec<ModelSpec> {
    catalog::standard_catalog().into_iter().filter_map(|e| e.build_model().ok()).collect()
}

#[test]
fn catalog_validates_and_respects_condition_iii() {
    let tol = Tolerances::default();
    for spec in catalog_specs() {
        let r = validate_model(&spec, &tol).unwrap();
        assert!(r.is_valid(), "{}", spec.name);
        let l = apply_generator(&spec, &HermitianForm::identity(spec.dim())).unwrap();
        assert!(linalg::max_eig(&l.matrix) <= tol.psd_tol, "{}", spec.name);
        let choi = choi_matrix(&spec);
        let scale = choi.norm().max(1.0);
        assert!(linalg::min_eig(&choi) >= -1e-12 * scale, "{} {} {}", spec.name, linalg::min_eig(&choi), scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn phi_and_generator_are_linear(seed in any::<u64>(), dim in 1usize..6, kraus in 0usize..4, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let spec = catalog::build_bounded_lindblad(dim, seed, kraus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x = random_hermitian(&mut rng, dim);
        let y = random_hermitian(&mut rng, dim);
        let comb = &x * c(a) + &y * c(b);
        for f in [ModelSpec::phi, ModelSpec::generator] {
            let lhs = f(&spec, &comb);
            let rhs = f(&spec, &x) * c(a) + f(&spec, &y) * c(b);
            let scale = lhs.norm().max(rhs.norm()).max(1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn generator_preserves_hermiticity(seed in any::<u64>(), dim in 1usize..6, kraus in 0usize..4) {
        let spec = catalog::build_bounded_lindblad(dim, seed, kraus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let x = random_hermitian(&mut rng, dim);
        let l = spec.generator(&x);
        prop_assert!((&l - l.adjoint()).norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn choi_matrix_is_psd(seed in any::<u64>(), dim in 1usize..6, kraus in 0usize..4) {
        let spec = catalog::build_bounded_lindblad(dim, seed, kraus).unwrap();
        prop_assert!(linalg::min_eig(&choi_matrix(&spec)) >= -1e-10);
    }

    #[test]
    fn predual_is_trace_dual(seed in any::<u64>(), dim in 1usize..6, kraus in 0usize..4) {
        let tol = Tolerances::default();
        let spec = catalog::build_bounded_lindblad(dim, seed, kraus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(3));
        let u = gaussian(&mut rng, dim, 1).column(0).into_owned();
        let v = gaussian(&mut rng, dim, 1).column(0).into_owned();
        let x = random_hermitian(&mut rng, dim);
        let dual = predual_generator(&spec, &u, &v, &tol).unwrap();
        let lhs = (&x * &dual).trace();
        let rhs = (u.adjoint() * spec.generator(&x) * &v)[(0, 0)];
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn birth_chains_satisfy_condition_iii(top in 1usize..20, p in 0.0f64..3.0) {
        let tol = Tolerances::default();
        let spec = catalog::build_pure_birth(&RateFormula::Power { exponent: p }, top).unwrap();
        let r = validate_model(&spec, &tol).unwrap();
        prop_assert!(r.is_valid());
        prop_assert!(linalg::max_eig(&spec.generator_at_identity()) <= tol.psd_tol);
    }
}

#[test]
fn sparse_choi_spectrum_is_finite() {
    // One Kraus operator: the Choi matrix is the rank-one projector onto vec(L) scaled by |L|_F^2.
    let spec = catalog::build_pure_birth(&RateFormula::Power { exponent: 2.0 }, 8).unwrap();
    let ev = linalg::eigvalsh(&choi_matrix(&spec));
    assert!(ev.iter().all(|e| e.is_finite()));
    let top = spec.kraus_ops[0].norm_squared();
    assert!((ev[ev.len() - 1] - top).abs() <= 1e-12 * top);
    assert!(ev[..ev.len() - 1].iter().all(|e| e.abs() <= 1e-12 * top));
}
