use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use qdslab::catalog::{build_shift_isometry, build_tau_f_transport};
use qdslab::deficiency::{
    cayley_deficiency_from_isometry, deficiency_indices_tau_f, deficiency_vectors_tau_f, isometric_restriction_verdict,
    prop42_convergence, von_neumann_extension, ExtensionSpec, IsometrySpec, Orientation, RestrictionVerdict, TailClass,
    TauFModel,
};
use qdslab::semigroup::{evolve_observable, propagator};
use qdslab::{Error, HermitianForm, Tolerances};

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ∫_0^x dτ/(1+τ)^α
fn primitive(alpha: f64, x: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-15 {
        (1.0 + x).ln()
    } else {
        ((1.0 + x).powf(1.0 - alpha) - 1.0) / (1.0 - alpha)
    }
}

fn candidate(alpha: f64, power: f64, x: f64) -> f64 {
    (1.0 + x).powf(alpha * power) * (-primitive(alpha, x)).exp()
}

// max |f u' + f'u/2 + u| by central differences, relative to max |u|
fn symmetric_residual(alpha: f64, power: f64, length: f64, intervals: usize) -> f64 {
    let h = length / intervals as f64;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 1..intervals {
        let x = j as f64 * h;
        let f = (1.0 + x).powf(alpha);
        let df = alpha * (1.0 + x).powf(alpha - 1.0);
        let u = candidate(alpha, power, x);
        let du = (candidate(alpha, power, x + h) - candidate(alpha, power, x - h)) / (2.0 * h);
        worst = worst.max((f * du + 0.5 * df * u + u).abs());
        scale = scale.max(u.abs());
    }
    worst / scale
}

#[test]
fn closed_form_vectors() {
    let m = TauFModel::power(0.0, 10.0, 1000, 1.0).unwrap();
    let v = deficiency_vectors_tau_f(&m).unwrap();
    for (x, (p, q)) in v.x.iter().zip(v.u_plus.iter().zip(&v.u_minus)) {
        assert!((p - (-x).exp()).abs() <= 1e-12 * p.max(1.0));
        assert!((q - x.exp()).abs() <= 1e-12 * q);
    }
    let m = TauFModel::power(1.0, 8.0, 800, 1.0).unwrap();
    let v = deficiency_vectors_tau_f(&m).unwrap();
    for (x, p) in v.x.iter().zip(&v.u_plus) {
        assert!((p - (1.0 + x).powf(-1.5)).abs() < 1e-13);
    }
}

#[test]
fn residual_is_first_order_for_half_power() {
    let coarse = deficiency_vectors_tau_f(&TauFModel::power(0.5, 10.0, 400, 1.0).unwrap()).unwrap();
    let fine = deficiency_vectors_tau_f(&TauFModel::power(0.5, 10.0, 800, 1.0).unwrap()).unwrap();
    for (a, b) in [(coarse.residual_plus, fine.residual_plus), (coarse.residual_minus, fine.residual_minus)] {
        let ratio = b / a;
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn only_inverse_square_root_prefactor_solves_the_equation() {
    for alpha in [0.5, 1.0] {
        let good = symmetric_residual(alpha, -0.5, 10.0, 4000);
        let bad = symmetric_residual(alpha, 0.5, 10.0, 4000);
        assert!(good < 1e-4, "alpha={alpha} good={good}");
        assert!(bad > 0.1, "alpha={alpha} bad={bad}");
    }
}

#[test]
fn coarse_grid_reports_residual() {
    let m = TauFModel::power(0.5, 40.0, 10, 1.0).unwrap();
    match deficiency_vectors_tau_f(&m) {
        Err(Error::GridTooCoarse { achieved, .. }) => assert!(achieved > 0.1),
        other => panic!("expected a grid error, got {other:?}"),
    }
}

#[test]
fn norm_identity_examples() {
    let r = deficiency_indices_tau_f(&TauFModel::power(0.0, 40.0, 4000, 1.0).unwrap(), 1e-8).unwrap();
    assert_eq!((r.n_plus, r.n_minus), (1, 0));
    assert!((r.norm_plus.unwrap() - 0.5).abs() < 1e-8);

    let r = deficiency_indices_tau_f(&TauFModel::power(1.0, 20.0, 4000, 2.0).unwrap(), 1e-8).unwrap();
    assert_eq!((r.n_plus, r.n_minus), (1, 0));
    assert!((r.norm_plus.unwrap() - 2.0).abs() < 1e-8);
    assert!(r.norm_minus.is_none());
}

#[test]
fn half_power_minus_branch_diverges() {
    let r = deficiency_indices_tau_f(&TauFModel::power(0.5, 40.0, 4000, 1.0).unwrap(), 1e-8).unwrap();
    assert_eq!(r.norm_minus_tail, TailClass::Divergent);
    let logs = &r.probe_minus.log_partial_norms;
    assert!(logs.windows(2).all(|w| w[1] > w[0]));
    assert!(logs.last().unwrap().exp() > 1e3);
    assert!(r.probe_minus.ratios.iter().all(|q| *q > 1.05));
}

#[test]
fn adjoint_orientation_swaps_indices() {
    let m = TauFModel::power(0.0, 40.0, 4000, 1.0).unwrap().with_orientation(Orientation::Adjoint);
    let r = deficiency_indices_tau_f(&m, 1e-8).unwrap();
    assert_eq!((r.n_plus, r.n_minus), (0, 1));
}

#[test]
fn cayley_shift_indices() {
    let r = cayley_deficiency_from_isometry(&build_shift_isometry(1, 10).unwrap()).unwrap();
    assert_eq!((r.n_plus, r.n_minus), (0, 1));

    let r = cayley_deficiency_from_isometry(&build_shift_isometry(3, 12).unwrap()).unwrap();
    assert_eq!((r.n_plus, r.n_minus), (0, 3));
    let b = &r.n_minus_basis;
    let projector = b * b.adjoint();
    let mut expected = CMat::zeros(12, 12);
    for k in 0..3 {
        expected[(k, k)] = c(1.0);
    }
    assert!((projector - expected).norm() < 1e-10);
}

#[test]
fn identity_isometry_is_refused() {
    let iso = IsometrySpec::new(0, vec![1.0], 6).unwrap();
    assert!(matches!(cayley_deficiency_from_isometry(&iso), Err(Error::Refused(_))));
    assert!(build_shift_isometry(0, 6).is_err());
}

#[test]
fn unextended_operator_is_itself() {
    let h = CMat::from_fn(4, 4, |i, j| Complex64::new((i + j) as f64, i as f64 - j as f64));
    let ext = ExtensionSpec::unextended(CMat::identity(4, 4), h.clone()).unwrap();
    assert_eq!(ext.extended_indices(), (0, 0));
    let ev = von_neumann_extension(&ext).unwrap();
    assert!(ev.symmetry_residual() < 1e-12);
    assert!((ev.full_matrix().unwrap() - h).norm() < 1e-12);
}

#[test]
fn forward_transport_admits_no_isometry() {
    let m = TauFModel::power(0.0, 20.0, 2000, 1.0).unwrap();
    let r = deficiency_indices_tau_f(&m, 1e-8).unwrap();
    let n = r.u_plus_samples.len();
    let norm = r.u_plus_samples.iter().map(|u| u * u).sum::<f64>().sqrt();
    let n_plus = CMat::from_iterator(n, 1, r.u_plus_samples.iter().map(|u| c(u / norm)));
    let err = ExtensionSpec::new(CMat::identity(n, n), CMat::zeros(n, n), n_plus, CMat::zeros(n, 0), CMat::zeros(0, 1))
        .unwrap_err();
    assert!(err.to_string().contains("n_+ > n_−"), "{err}");
    assert_eq!(isometric_restriction_verdict(r.n_plus, r.n_minus), RestrictionVerdict::DoesNot);
}

#[test]
fn shift_extension_matches_cayley_inverse() {
    let n = 8;
    let iso = build_shift_isometry(1, n).unwrap();
    let w = Complex64::from_polar(1.0, 0.4);
    let ext = ExtensionSpec::from_isometry(&iso, CMat::from_element(1, 1, w)).unwrap();
    assert_eq!(ext.extended_indices(), (0, 0));
    let ev = von_neumann_extension(&ext).unwrap();
    assert!(ev.symmetry_residual() <= 1e-8);
    let h = ev.full_matrix().unwrap();

    // Unitary completion: e_j ↦ e_{j+1} below the edge, e_{n-1} ↦ −w e_0.
    let mut u = CMat::zeros(n, n);
    for j in 0..n - 1 {
        u[(j + 1, j)] = c(1.0);
    }
    u[(0, n - 1)] = -w;
    let id = CMat::identity(n, n);
    let oracle = (&id + &u) * Complex64::new(0.0, 1.0) * (&id - &u).try_inverse().unwrap();
    assert!((&h - &oracle).norm() < 1e-10 * oracle.norm());
    assert!((&h - h.adjoint()).norm() < 1e-10 * oracle.norm());

    let probe = DVector::from_fn(n, |k, _| Complex64::new(k as f64, 1.0));
    assert!((ev.apply(&probe).unwrap() - &h * &probe).norm() < 1e-9 * probe.norm() * oracle.norm());
}

#[test]
fn certificate_converges_with_refinement() {
    let m = TauFModel::power(0.0, 20.0, 200, 1.0).unwrap();
    let conv = prop42_convergence(&m).unwrap();
    assert!(conv.coarse.polarized_residual.is_finite());
    assert!(conv.fine.polarized_residual <= 0.6 * conv.coarse.polarized_residual);
    assert!(conv.order >= 0.7);
    assert!(conv.coarse.far_tail_residual <= 1e-10);
    assert!(conv.fine.far_tail_residual <= 1e-10);

    let adjoint = m.with_orientation(Orientation::Adjoint);
    assert!(matches!(prop42_convergence(&adjoint), Err(Error::Refused(_))));
}

#[test]
fn restriction_verdicts_agree_with_dynamics() {
    assert_eq!(isometric_restriction_verdict(1, 0), RestrictionVerdict::DoesNot);
    assert_eq!(isometric_restriction_verdict(0, 1), RestrictionVerdict::ExtendsToIsometryGenerator);
    assert_eq!(isometric_restriction_verdict(2, 2), RestrictionVerdict::ExtendsToIsometryGenerator);

    let tol = Tolerances::default();
    let forward = TauFModel::power(0.0, 8.0, 160, 1.0).unwrap();
    let spec = build_tau_f_transport(&forward, None).unwrap();
    let w = propagator(&spec, 1.0, &tol).unwrap().w;
    let e = DVector::from_fn(spec.dim(), |k, _| c(if k == 1 { 1.0 } else { 0.0 }));
    assert!((&w * &e).norm() < 1.0 - 1e-3);

    let adjoint = forward.with_orientation(Orientation::Adjoint);
    let spec = build_tau_f_transport(&adjoint, None).unwrap();
    let n = spec.dim();
    let r = evolve_observable(&spec, &HermitianForm::identity(n), &[2.0], &tol).unwrap();
    assert!((&r.observables[0].matrix - CMat::identity(n, n)).norm() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn norm_identity_holds(alpha in 0.0f64..=1.0, c1 in 0.2f64..5.0) {
        let m = TauFModel::power(alpha, 40.0, 4000, c1).unwrap();
        let r = deficiency_indices_tau_f(&m, 1e-8).unwrap();
        prop_assert_eq!((r.n_plus, r.n_minus), (1, 0));
        let expected = 0.5 * c1 * c1;
        prop_assert!((r.norm_plus.unwrap() - expected).abs() <= 1e-8 * expected.max(1.0));
    }

    #[test]
    fn shift_indices_stabilize(m in 1usize..=4, extra in 1usize..12) {
        let iso = build_shift_isometry(m, 2 * m + extra).unwrap();
        let r = cayley_deficiency_from_isometry(&iso).unwrap();
        prop_assert_eq!((r.n_plus, r.n_minus), (0, m));
        prop_assert_eq!(r.levels.len(), 2);
        prop_assert!(r.levels.iter().all(|l| (l.n_plus, l.n_minus) == (0, m)));
    }
}
