//! Time-domain objects: the contraction semigroup `W_t = e^{-tG}`, the
//! minimal semigroup `P_t` on the truncation, the monotone iteration
//! `P^(n)_t`, and the explosion observable `ℰ_t(I) = I − P_t(I)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::ode::{self, OdeOptions};
use crate::operator::{FormTag, HermitianForm, ModelSpec};
use crate::parallel::Execution;
use crate::quadrature::GaussLegendre;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagator {
    pub t: f64,
    #[serde(with = "crate::operator::cmat_serde")]
    pub w: CMat,
}

impl Propagator {
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.w)
    }
}

fn check_dissipative(spec: &ModelSpec, tol: &Tolerances) -> Result<()> {
    let residual = (-linalg::min_eig(&(&spec.g + spec.g.adjoint()))).max(0.0);
    if residual > tol.validation_eps {
        return Err(Error::NotDissipative { residual });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

/// `W_t = exp(−tG)`.
pub fn propagator(spec: &ModelSpec, t: f64, tol: &Tolerances) -> Result<Propagator> {
    check_time(t)?;
    check_dissipative(spec, tol)?;
    let w = if t == 0.0 { linalg::identity(spec.dim()) } else { linalg::expm(&(&spec.g * c64(-t, 0.0))) };
    Ok(Propagator { t, w })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub observables: Vec<HermitianForm>,
    /// `ℰ_t(I) = I − P_t(I)`, present when the initial observable is `I`.
    pub explosion: Option<Vec<HermitianForm>>,
}

fn ode_options(tol: &Tolerances) -> OdeOptions {
    OdeOptions { atol: tol.ode_atol, rtol: tol.ode_rtol, ..OdeOptions::default() }
}

fn is_identity(x: &CMat, tol: f64) -> bool {
    (x - linalg::identity(x.nrows())).norm() <= tol
}

/// Solve `X' = ℒ(X)`, `X(0) = x` and sample at `times`.
pub fn evolve_observable(spec: &ModelSpec, x: &HermitianForm, times: &[f64], tol: &Tolerances) -> Result<EvolutionResult> {
    if x.dim() != spec.dim() {
        return Err(Error::Dimension(format!("form has dimension {}, model has {}", x.dim(), spec.dim())));
    }
    check_dissipative(spec, tol)?;
    let states = ode::integrate(
        |_, y: &Vec<CMat>| vec![spec.generator(&y[0])],
        |y: &mut Vec<CMat>| linalg::symmetrize_in_place(&mut y[0]),
        vec![x.matrix.clone()],
        times,
        &ode_options(tol),
    )?;
    let observables: Vec<HermitianForm> =
        states.into_iter().map(|mut s| HermitianForm::trusted(s.swap_remove(0), FormTag::Observable)).collect();
    let explosion = is_identity(&x.matrix, tol.hermitian_tol).then(|| {
        let id = linalg::identity(spec.dim());
        observables.iter().map(|p| HermitianForm::trusted(&id - &p.matrix, FormTag::Explosion)).collect()
    });
    Ok(EvolutionResult { times: times.to_vec(), observables, explosion })
}

/// Solve `ρ' = ℒ†(ρ)` up to time `t`.
pub fn predual_evolve(spec: &ModelSpec, rho: &CMat, t: f64, tol: &Tolerances) -> Result<CMat> {
    check_time(t)?;
    check_dissipative(spec, tol)?;
    if rho.shape() != (spec.dim(), spec.dim()) {
        return Err(Error::Dimension(format!("state is {:?}, model has dimension {}", rho.shape(), spec.dim())));
    }
    if linalg::hermitian_defect(rho) > tol.hermitian_tol * rho.norm().max(1.0) {
        return Err(Error::Refused("state is not Hermitian".into()));
    }
    let min_eig = linalg::min_eig(rho);
    if min_eig < -tol.psd_tol {
        return Err(Error::NotPositive { min_eig });
    }
    let trace = linalg::trace(rho).re;
    if trace > 1.0 + tol.psd_tol {
        return Err(Error::Refused(format!("state has trace {trace} > 1")));
    }
    let mut out = ode::integrate(
        |_, y: &Vec<CMat>| vec![spec.generator_dual(&y[0])],
        |y: &mut Vec<CMat>| linalg::symmetrize_in_place(&mut y[0]),
        vec![rho.clone()],
        &[t],
        &ode_options(tol),
    )?;
    Ok(out.pop().and_then(|mut s| s.pop()).expect("one sample requested"))
}

/// `∫₀^∞ e^{−λt} P_t(x) dt`, by integrating `R' = e^{−λt}X` alongside the
/// master equation up to the horizon where the remaining tail is below 1e-10.
pub fn resolvent_quadrature(spec: &ModelSpec, lambda: f64, x: &CMat, tol: &Tolerances) -> Result<CMat> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    check_dissipative(spec, tol)?;
    let scale = linalg::herm_norm(x).max(f64::MIN_POSITIVE);
    let horizon = ((scale / (lambda * 1e-10)).ln() / lambda).max(1.0 / lambda);
    let n = spec.dim();
    let mut out = ode::integrate(
        |t, y: &Vec<CMat>| vec![spec.generator(&y[0]), &y[0] * c64((-lambda * t).exp(), 0.0)],
        |y: &mut Vec<CMat>| {
            linalg::symmetrize_in_place(&mut y[0]);
            linalg::symmetrize_in_place(&mut y[1]);
        },
        vec![x.clone(), CMat::zeros(n, n)],
        &[horizon],
        &ode_options(tol),
    )?;
    Ok(out.pop().and_then(|mut s| s.pop()).expect("one sample requested"))
}

/// `∫₀^∞ e^{−λt} ℰ_t(I) dt = I/λ − ∫₀^∞ e^{−λt} P_t(I) dt`.
pub fn explosion_transform_quadrature(spec: &ModelSpec, lambda: f64, tol: &Tolerances) -> Result<CMat> {
    let id = linalg::identity(spec.dim());
    let r = resolvent_quadrature(spec, lambda, &id, tol)?;
    Ok(id * c64(1.0 / lambda, 0.0) - r)
}

/// Settings for [`minimal_iteration`].
#[derive(Debug, Clone, Copy)]
pub struct IterationOptions {
    pub nodes_per_panel: usize,
    pub max_panels: usize,
    pub execution: Execution,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions { nodes_per_panel: 8, max_panels: 1 << 14, execution: Execution::default() }
    }
}

/// Precomputed propagators for one panel width.
struct PanelRule {
    h: f64,
    xi: Vec<f64>,
    w: Vec<f64>,
    step: CMat,
    /// `W_{hξ_k}`
    to_node: Vec<CMat>,
    /// `W_{hξ_k(1−ξ_l)}`, indexed `[k][l]`
    sub: Vec<Vec<CMat>>,
    /// `W_{h(1−ξ_l)}`
    to_end: Vec<CMat>,
    /// Lagrange basis `L_j(ξ_k ξ_l)`, indexed `[k][l][j]`
    lagrange: Vec<Vec<Vec<f64>>>,
}

impl PanelRule {
    fn new(g: &CMat, h: f64, m: usize) -> Self {
        let gl = GaussLegendre::new(m);
        let prop = |s: f64| linalg::expm(&(g * c64(-s, 0.0)));
        let xi = gl.nodes.clone();
        let to_node = xi.iter().map(|&k| prop(h * k)).collect();
        let sub = xi.iter().map(|&k| xi.iter().map(|&l| prop(h * k * (1.0 - l))).collect()).collect();
        let to_end = xi.iter().map(|&l| prop(h * (1.0 - l))).collect();
        let lagrange = xi
            .iter()
            .map(|&k| {
                xi.iter()
                    .map(|&l| {
                        let s = k * l;
                        (0..m)
                            .map(|j| (0..m).filter(|&i| i != j).map(|i| (s - xi[i]) / (xi[j] - xi[i])).product())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        PanelRule { h, xi, w: gl.weights, step: prop(h), to_node, sub, to_end, lagrange }
    }
}

/// One layer of the iteration sampled on the panel grid.
struct Layer {
    /// Values at panel starts `p h`, `p = 0..=P`.
    starts: Vec<CMat>,
    /// Values at `p h + h ξ_k`, indexed `[p][k]`.
    nodes: Vec<Vec<CMat>>,
}

/// Next layer from `F(a + δ) = W_δ* F(a) W_δ + ∫_0^δ W_{δ−σ}* φ(F_prev(a + σ)) W_{δ−σ} dσ`.
fn next_layer(spec: &ModelSpec, x: &CMat, rule: &PanelRule, panels: usize, prev: Option<&Layer>, exec: Execution) -> Layer {
    let n = spec.dim();
    let m = rule.xi.len();
    // Forcing terms do not depend on the current layer, so every panel can
    // be evaluated independently before the sequential sweep.
    let forcing: Vec<(Vec<CMat>, CMat)> = match prev {
        None => vec![(vec![CMat::zeros(n, n); m], CMat::zeros(n, n)); panels],
        Some(prev) => exec.map_range(panels, |p| {
            let phi_nodes: Vec<CMat> = prev.nodes[p].iter().map(|v| spec.phi(v)).collect();
            let node_force = (0..m)
                .map(|k| {
                    let mut acc = CMat::zeros(n, n);
                    for l in 0..m {
                        let mut interp = CMat::zeros(n, n);
                        for (j, pj) in phi_nodes.iter().enumerate() {
                            interp += pj * c64(rule.lagrange[k][l][j], 0.0);
                        }
                        let e = &rule.sub[k][l];
                        acc += e.adjoint() * interp * e * c64(rule.w[l], 0.0);
                    }
                    acc * c64(rule.h * rule.xi[k], 0.0)
                })
                .collect();
            let mut end_force = CMat::zeros(n, n);
            for (l, pl) in phi_nodes.iter().enumerate() {
                let e = &rule.to_end[l];
                end_force += e.adjoint() * pl * e * c64(rule.w[l], 0.0);
            }
            (node_force, end_force * c64(rule.h, 0.0))
        }),
    };
    let mut starts = Vec::with_capacity(panels + 1);
    let mut nodes = Vec::with_capacity(panels);
    let mut s = x.clone();
    for (node_force, end_force) in forcing {
        let at_nodes: Vec<CMat> = rule
            .to_node
            .iter()
            .zip(node_force)
            .map(|(e, f)| {
                let mut v = e.adjoint() * &s * e + f;
                linalg::symmetrize_in_place(&mut v);
                v
            })
            .collect();
        let mut next = rule.step.adjoint() * &s * &rule.step + end_force;
        linalg::symmetrize_in_place(&mut next);
        starts.push(std::mem::replace(&mut s, next));
        nodes.push(at_nodes);
    }
    starts.push(s);
    Layer { starts, nodes }
}

fn iterate_layers(spec: &ModelSpec, x: &CMat, t: f64, n_max: usize, panels: usize, opts: &IterationOptions) -> Vec<CMat> {
    let rule = PanelRule::new(&spec.g, t / panels as f64, opts.nodes_per_panel);
    let mut out = Vec::with_capacity(n_max);
    let mut prev: Option<Layer> = None;
    for _ in 0..n_max {
        let layer = next_layer(spec, x, &rule, panels, prev.as_ref(), opts.execution);
        out.push(layer.starts[panels].clone());
        prev = Some(layer);
    }
    out
}

/// `P^(1)_t(x), …, P^(n_max)_t(x)` with
/// `P^(n)_t(x) = W_t* x W_t + ∫_0^t W_{t−τ}* φ(P^(n−1)_τ(x)) W_{t−τ} dτ`.
///
/// Panel collocation with Gauss–Legendre nodes; the number of panels doubles
/// until the last iterate changes by less than `quadrature_tol`.
pub fn minimal_iteration(
    spec: &ModelSpec,
    x: &HermitianForm,
    t: f64,
    n_max: usize,
    quadrature_tol: f64,
    opts: &IterationOptions,
) -> Result<Vec<HermitianForm>> {
    check_time(t)?;
    check_dissipative(spec, &Tolerances::default())?;
    if x.dim() != spec.dim() {
        return Err(Error::Dimension(format!("form has dimension {}, model has {}", x.dim(), spec.dim())));
    }
    if n_max == 0 {
        return Ok(Vec::new());
    }
    let min_eig = x.min_eig();
    if min_eig < -Tolerances::default().psd_tol {
        return Err(Error::NotPositive { min_eig });
    }
    if t == 0.0 {
        return Ok(vec![HermitianForm::trusted(x.matrix.clone(), FormTag::Observable); n_max]);
    }
    let phi_norm: f64 = spec.kraus_ops.iter().map(|l| linalg::op_norm(l).powi(2)).sum();
    let rate = 2.0 * linalg::op_norm(&spec.g) + phi_norm;
    let mut panels = ((t * rate).ceil() as usize).max(1);
    let mut prev = iterate_layers(spec, &x.matrix, t, n_max, panels, opts);
    loop {
        if 2 * panels > opts.max_panels {
            let achieved = f64::NAN;
            return Err(Error::Quadrature { achieved });
        }
        panels *= 2;
        let next = iterate_layers(spec, &x.matrix, t, n_max, panels, opts);
        let change = (&next[n_max - 1] - &prev[n_max - 1]).norm();
        if change < quadrature_tol {
            return Ok(next.into_iter().map(|m| HermitianForm::trusted(m, FormTag::Observable)).collect());
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_pure_birth, RateFormula};
    use crate::linalg::diag;
    use crate::operator::Domain;

    fn birth_12() -> ModelSpec {
        build_pure_birth(&RateFormula::List { rates: vec![1.0, 2.0] }, 1).unwrap()
    }

    #[test]
    fn propagator_examples() {
        let tol = Tolerances::default();
        let spec = birth_12();
        assert_eq!(propagator(&spec, 0.0, &tol).unwrap().w, linalg::identity(2));
        let w = propagator(&spec, 2.0, &tol).unwrap().w;
        assert!((w - diag(&[(-1.0f64).exp(), (-2.0f64).exp()])).norm() < 1e-14);
        let p = propagator(&spec, 1.0, &tol).unwrap();
        assert!((p.norm() - (-0.5f64).exp()).abs() < 1e-14);
        assert!(propagator(&spec, -1.0, &tol).is_err());
        let bad = ModelSpec::new("expansive", -linalg::identity(2), vec![], Domain::full(2)).unwrap();
        assert!(matches!(propagator(&bad, 1.0, &tol), Err(Error::NotDissipative { .. })));
    }

    #[test]
    fn two_state_survival() {
        // p0' = x1 − x0, p1' = −2 p1 with p(0) = (1, 1): p1 = e^{−2t}, p0 = 2e^{−t} − e^{−2t}
        let tol = Tolerances::default();
        let r = evolve_observable(&birth_12(), &HermitianForm::identity(2), &[0.5, 1.0, 4.0], &tol).unwrap();
        for (t, p) in r.times.iter().zip(&r.observables) {
            let expected = 2.0 * (-t).exp() - (-2.0 * t).exp();
            assert!((p.matrix[(0, 0)].re - expected).abs() < 1e-8);
            assert!((p.matrix[(1, 1)].re - (-2.0 * t).exp()).abs() < 1e-8);
        }
        assert!(r.explosion.is_some());
    }

    #[test]
    fn first_iterate_is_congruence() {
        let spec = birth_12();
        let it = minimal_iteration(&spec, &HermitianForm::identity(2), 1.0, 1, 1e-10, &IterationOptions::default()).unwrap();
        let w = propagator(&spec, 1.0, &Tolerances::default()).unwrap().w;
        assert!((&it[0].matrix - w.adjoint() * &w).norm() < 1e-12);
    }

    #[test]
    fn iteration_refuses_indefinite_input() {
        let x = HermitianForm::observable(diag(&[1.0, -1.0])).unwrap();
        assert!(matches!(
            minimal_iteration(&birth_12(), &x, 1.0, 3, 1e-9, &IterationOptions::default()),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn predual_refuses_non_state() {
        let tol = Tolerances::default();
        assert!(predual_evolve(&birth_12(), &diag(&[1.0, -0.5]), 1.0, &tol).is_err());
        assert!(predual_evolve(&birth_12(), &diag(&[1.0, 0.5]), 1.0, &tol).is_err());
    }
}
