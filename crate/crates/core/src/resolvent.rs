//! Laplace-domain diagnostics: `Q_λ`, `ℓ_λ(I)`, the explosion transform
//! `Ẽ_λ(I)`, conservativity verdicts and truncation ladders.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::lyapunov::LyapunovSolver;
use crate::operator::{FormTag, HermitianForm, ModelSpec};
use crate::parallel::Execution;
use crate::quadrature::{laplace_congruence, LaplaceQuadrature};
use crate::tolerance::Tolerances;

/// A model, a Laplace parameter and the Schur factorization of `G`.
#[derive(Debug, Clone)]
pub struct LaplaceContext<'a> {
    pub spec: &'a ModelSpec,
    pub lambda: f64,
    pub tol: Tolerances,
    pub execution: Execution,
    solver: LyapunovSolver,
}

impl<'a> LaplaceContext<'a> {
    pub fn new(spec: &'a ModelSpec, lambda: f64, tol: Tolerances) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        spec.check_structure()?;
        let residual = (-linalg::min_eig(&(&spec.g + spec.g.adjoint()))).max(0.0);
        if residual > tol.validation_eps {
            return Err(Error::NotDissipative { residual });
        }
        let solver = LyapunovSolver::new(&spec.g)?;
        Ok(LaplaceContext { spec, lambda, tol, execution: Execution::default(), solver })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn quadrature_options(&self) -> LaplaceQuadrature {
        LaplaceQuadrature { tol: self.tol.quadrature_tol, execution: self.execution, ..LaplaceQuadrature::default() }
    }

    /// `Y` with `λY + G*Y + YG = c`, i.e. `∫e^{−λt} W_t* c W_t dt`.
    pub fn laplace(&self, c: &CMat) -> Result<CMat> {
        self.solver.solve(self.lambda, c)
    }

    /// `Q_λ(y)` on a raw matrix.
    pub fn q_map(&self, y: &CMat) -> Result<CMat> {
        self.laplace(&self.spec.phi(y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMethod {
    Sylvester,
    Quadrature,
}

/// `Q_λ(x) = ∫₀^∞ e^{−λt} W_t* φ(x) W_t dt`.
pub fn q_lambda(ctx: &LaplaceContext, x: &HermitianForm, method: QMethod) -> Result<HermitianForm> {
    if x.dim() != ctx.spec.dim() {
        return Err(Error::Dimension(format!("form has dimension {}, model has {}", x.dim(), ctx.spec.dim())));
    }
    let rhs = ctx.spec.phi(&x.matrix);
    let y = match method {
        QMethod::Sylvester => ctx.laplace(&rhs)?,
        QMethod::Quadrature => laplace_congruence(&ctx.spec.g, ctx.lambda, &rhs, &ctx.quadrature_options())?,
    };
    Ok(HermitianForm::trusted(y, FormTag::ResolventMapValue))
}

/// `ℓ_λ(I) = Z/λ` with `λZ + G*Z + ZG = −ℒ(I)`.
pub fn ell_lambda(ctx: &LaplaceContext) -> Result<HermitianForm> {
    let loss = -ctx.spec.generator_at_identity();
    let z = ctx.laplace(&loss)?;
    Ok(HermitianForm::trusted(z * c64(1.0 / ctx.lambda, 0.0), FormTag::LaplaceForm))
}

/// `ℓ_λ(I)` by direct quadrature of `(1/λ)∫e^{−λt} W_t*(−ℒ(I))W_t dt`.
pub fn ell_lambda_quadrature(ctx: &LaplaceContext) -> Result<HermitianForm> {
    let loss = -ctx.spec.generator_at_identity();
    let z = laplace_congruence(&ctx.spec.g, ctx.lambda, &loss, &ctx.quadrature_options())?;
    Ok(HermitianForm::trusted(z * c64(1.0 / ctx.lambda, 0.0), FormTag::LaplaceForm))
}

/// `∫₀^∞ e^{−λt}(I − W_t*W_t) dt` by quadrature.
pub fn first_iterate_transform(ctx: &LaplaceContext) -> Result<HermitianForm> {
    let n = ctx.spec.dim();
    let id = linalg::identity(n);
    let ww = laplace_congruence(&ctx.spec.g, ctx.lambda, &id, &ctx.quadrature_options())?;
    Ok(HermitianForm::trusted(id * c64(1.0 / ctx.lambda, 0.0) - ww, FormTag::LaplaceForm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLimit {
    pub limit: HermitianForm,
    pub iterations: usize,
    /// Norm of the last increment `Y_{n+1} − Y_n`.
    pub increment: f64,
    pub converged: bool,
}

/// Iterate `Y_{n+1} = Q_λ(Y_n)` from `Y_0 = I` until the increment stalls.
pub fn q_power_limit(ctx: &LaplaceContext, max_iters: usize, stall_tol: f64) -> Result<QLimit> {
    let mut y = linalg::identity(ctx.spec.dim());
    let mut increment = f64::INFINITY;
    for k in 1..=max_iters {
        let next = ctx.q_map(&y)?;
        increment = linalg::herm_norm(&(&next - &y));
        y = next;
        if increment <= stall_tol {
            return Ok(QLimit {
                limit: HermitianForm::trusted(y, FormTag::ResolventMapValue),
                iterations: k,
                increment,
                converged: true,
            });
        }
    }
    Ok(QLimit {
        limit: HermitianForm::trusted(y, FormTag::ResolventMapValue),
        iterations: max_iters,
        increment,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionSeries {
    pub transform: HermitianForm,
    pub terms_used: usize,
    pub last_term_norm: f64,
    pub converged: bool,
}

/// `Ẽ_λ(I) = (1/λ) lim Q^n_λ(I) + Σ_{n≥0} Q^n_λ(ℓ_λ(I))`.
pub fn explosion_series(ctx: &LaplaceContext, ell: &HermitianForm, q_limit: &QLimit) -> Result<ExplosionSeries> {
    let max_terms = ctx.tol.max_terms(ctx.spec.dim());
    let mut sum = &q_limit.limit.matrix * c64(1.0 / ctx.lambda, 0.0);
    let mut term = ell.matrix.clone();
    let mut last_term_norm = linalg::herm_norm(&term);
    let mut terms_used = 0;
    let mut converged = false;
    while terms_used < max_terms {
        sum += &term;
        terms_used += 1;
        if last_term_norm < ctx.tol.series_tail_tol {
            converged = true;
            break;
        }
        term = ctx.q_map(&term)?;
        last_term_norm = linalg::herm_norm(&term);
    }
    Ok(ExplosionSeries {
        transform: HermitianForm::trusted(sum, FormTag::Explosion),
        terms_used,
        last_term_norm,
        converged,
    })
}

pub fn explosion_transform(ctx: &LaplaceContext) -> Result<ExplosionSeries> {
    let ell = ell_lambda(ctx)?;
    let q = q_power_limit(ctx, ctx.tol.max_terms(ctx.spec.dim()), ctx.tol.stall_tol)?;
    explosion_series(ctx, &ell, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Conservative,
    Explosive,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionCertificate {
    pub lambda: f64,
    /// `‖ℓ_λ(I)‖`
    pub ell_norm: f64,
    /// `‖lim_n Q^n_λ(I)‖`
    pub q_limit_norm: f64,
    #[serde(skip)]
    pub explosion_transform: Option<HermitianForm>,
    /// `λ⟨e_0, Ẽ_λ(I) e_0⟩`
    pub explosion_mass: f64,
    pub explosion_min_eig: f64,
    pub series_terms_used: usize,
    pub q_iterations: usize,
    pub q_converged: bool,
    pub series_converged: bool,
    /// Largest eigenvalue of `I/λ − R^min_λ(I) = Ẽ_λ(I)`.
    pub resolvent_gap: f64,
    pub verdict: Verdict,
    pub decision_threshold: f64,
    pub inconclusive_floor: f64,
    pub note: String,
}

impl ExplosionCertificate {
    pub fn transform(&self) -> &HermitianForm {
        self.explosion_transform.as_ref().expect("certificate carries its transform until serialized")
    }
}

/// Decision rule shared by single runs and sweeps.
pub fn decide(ell_norm: f64, q_limit_norm: f64, gap: f64, converged: bool, tol: &Tolerances) -> Verdict {
    if !converged {
        return Verdict::Inconclusive;
    }
    let mass = ell_norm.max(q_limit_norm);
    if mass > tol.decision_threshold && gap > tol.decision_threshold {
        Verdict::Explosive
    } else if mass < tol.inconclusive_floor && gap < tol.inconclusive_floor {
        Verdict::Conservative
    } else {
        Verdict::Inconclusive
    }
}

pub fn conservativity_verdict(ctx: &LaplaceContext) -> Result<ExplosionCertificate> {
    let ell = ell_lambda(ctx)?;
    let q = q_power_limit(ctx, ctx.tol.max_terms(ctx.spec.dim()), ctx.tol.stall_tol)?;
    let series = explosion_series(ctx, &ell, &q)?;
    let ell_norm = ell.norm();
    let q_limit_norm = q.limit.norm();
    let ev = linalg::eigvalsh(&series.transform.matrix);
    let gap = ev.last().copied().unwrap_or(0.0).max(0.0);
    let converged = q.converged && series.converged;
    let verdict = decide(ell_norm, q_limit_norm, gap, converged, &ctx.tol);
    let note = match (converged, verdict) {
        (false, _) => "power iteration or explosion series did not converge".to_string(),
        (true, Verdict::Inconclusive) => "certificates disagree or fall inside the inconclusive band".to_string(),
        _ if q_limit_norm <= ctx.tol.inconclusive_floor && ell_norm > ctx.tol.decision_threshold => {
            "finite truncation: explosion certified by boundary loss; the Q^n limit vanishes".to_string()
        }
        _ => String::new(),
    };
    Ok(ExplosionCertificate {
        lambda: ctx.lambda,
        ell_norm,
        q_limit_norm,
        explosion_mass: ctx.lambda * series.transform.matrix[(0, 0)].re,
        explosion_min_eig: ev.first().copied().unwrap_or(0.0),
        explosion_transform: Some(series.transform),
        series_terms_used: series.terms_used,
        q_iterations: q.iterations,
        q_converged: q.converged,
        series_converged: series.converged,
        resolvent_gap: gap,
        verdict,
        decision_threshold: ctx.tol.decision_threshold,
        inconclusive_floor: ctx.tol.inconclusive_floor,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    /// Whether the verdict was explosive; otherwise the check is vacuous.
    pub applicable: bool,
    /// `max |ℒ(x)[u,v] − λ⟨u,xv⟩|` over an orthonormal basis of `D`.
    pub equation_residual: f64,
    /// `max |(Q_λ(x) − x)[u,v]|` over the same basis; reported only.
    pub fixed_point_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Check that `x = Ẽ_λ(I)` solves `ℒ(x)[u,v] = λ⟨u,xv⟩` on `D × D`.
pub fn verify_explosion_solution(ctx: &LaplaceContext, cert: &ExplosionCertificate) -> Result<SolutionCheck> {
    let x = &cert.transform().matrix;
    let b = ctx.spec.domain_basis();
    let eq = ctx.spec.generator(x) - x * c64(ctx.lambda, 0.0);
    let equation_residual = linalg::max_abs(&linalg::congruence(&eq, &b));
    let fixed = ctx.q_map(x)? - x;
    let fixed_point_residual = linalg::max_abs(&linalg::congruence(&fixed, &b));
    let applicable = cert.verdict == Verdict::Explosive;
    let tolerance = 1e-9;
    Ok(SolutionCheck {
        applicable,
        equation_residual,
        fixed_point_residual,
        tolerance,
        passed: !applicable || equation_residual <= tolerance,
    })
}

/// Orthonormal basis of `n × n` Hermitian matrices under `tr(AB)`:
/// diagonal units, then `(E_ij + E_ji)/√2` and `i(E_ij − E_ji)/√2`.
fn hermitian_coordinates(x: &CMat) -> DVector<f64> {
    let n = x.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(x[(i, i)].re);
    }
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(r2 * x[(i, j)].re);
            out.push(r2 * x[(i, j)].im);
        }
    }
    DVector::from_vec(out)
}

fn from_hermitian_coordinates(c: &DVector<f64>, n: usize) -> CMat {
    let mut x = CMat::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = c64(c[i], 0.0);
    }
    let r2 = std::f64::consts::SQRT_2;
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = c64(c[k] / r2, c[k + 1] / r2);
            x[(i, j)] = z;
            x[(j, i)] = z.conj();
            k += 2;
        }
    }
    x
}

/// Largest `t` such that some unit-trace `X = Σ c_i B_i` has `X ⪰ tI`,
/// by a log-barrier method on `(c, t)`. `None` when every `B_i` is traceless.
fn max_min_eig_unit_trace(b: &[CMat]) -> Option<(f64, CMat)> {
    let k = b.len();
    let n = b.first()?.nrows();
    let a: Vec<f64> = b.iter().map(|m| linalg::trace(m).re).collect();
    let a2: f64 = a.iter().map(|v| v * v).sum();
    if a2.sqrt() < 1e-12 {
        return None;
    }
    let combine = |c: &[f64]| {
        let mut x = CMat::zeros(n, n);
        for (ci, bi) in c.iter().zip(b) {
            x += bi * c64(*ci, 0.0);
        }
        x
    };
    let mut c: Vec<f64> = a.iter().map(|v| v / a2).collect();
    let mut t = linalg::min_eig(&combine(&c)) - 1.0;
    let id = linalg::identity(n);
    let slack_inverse = |c: &[f64], t: f64| -> Option<CMat> {
        let f = combine(c) - &id * c64(t, 0.0);
        let chol = nalgebra::Cholesky::new(linalg::hermitian_part(&f))?;
        Some(chol.inverse())
    };
    let objective = |c: &[f64], t: f64, s: f64| -> Option<f64> {
        let f = combine(c) - &id * c64(t, 0.0);
        let chol = nalgebra::Cholesky::new(linalg::hermitian_part(&f))?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum();
        Some(-s * t - log_det)
    };
    let mut s = 1.0;
    // Variables (c_1..c_k, t); the last "basis matrix" is −I.
    let dir: Vec<CMat> = b.iter().cloned().chain(std::iter::once(-id.clone())).collect();
    for _ in 0..60 {
        for _ in 0..50 {
            let finv = slack_inverse(&c, t)?;
            let fb: Vec<CMat> = dir.iter().map(|d| &finv * d).collect();
            let m = k + 1;
            let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for i in 0..m {
                rhs[i] = linalg::trace(&fb[i]).re;
                for j in i..m {
                    let h = (fb[i].transpose().component_mul(&fb[j])).iter().map(|z| z.re).sum::<f64>();
                    kkt[(i, j)] = h;
                    kkt[(j, i)] = h;
                }
            }
            rhs[k] += s;
            for i in 0..k {
                kkt[(m, i)] = a[i];
                kkt[(i, m)] = a[i];
            }
            let step = match kkt.clone().lu().solve(&rhs) {
                Some(v) => v,
                None => break,
            };
            let decrement: f64 = (0..m).map(|i| -step[i] * rhs[i]).sum::<f64>().abs();
            if decrement < 1e-14 {
                break;
            }
            let current = objective(&c, t, s)?;
            let slope: f64 = (0..m).map(|i| -rhs[i] * step[i]).sum();
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = (0..k).map(|i| c[i] + alpha * step[i]).collect();
                let tc = t + alpha * step[k];
                if let Some(v) = objective(&cand, tc, s) {
                    if v <= current + 0.25 * alpha * slope {
                        c = cand;
                        t = tc;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    break;
                }
            }
            if alpha < 1e-12 {
                break;
            }
        }
        if n as f64 / s < 1e-13 || t > 1e-8 || t + n as f64 / s < -1e-8 {
            break;
        }
        s *= 8.0;
    }
    let x = combine(&c);
    let tr = linalg::trace(&x).re;
    let x = x * c64(1.0 / tr, 0.0);
    Some((linalg::min_eig(&x), x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnihilatorReport {
    /// Dimension of `{x Hermitian : (λ − ℒ)(x)[u,v] = 0 ∀ u,v ∈ D}`.
    pub dimension: usize,
    /// Some singular value fell between the zero and nonzero thresholds.
    pub ambiguous: bool,
    pub smallest_retained_singular_value: f64,
    pub largest_discarded_singular_value: f64,
    pub psd_element_found: bool,
    /// Smallest eigenvalue of the found element, normalized to unit trace.
    pub psd_element_min_eig: Option<f64>,
    /// Distance of that element from the annihilator.
    pub psd_element_residual: Option<f64>,
    #[serde(skip)]
    pub psd_element: Option<CMat>,
}

const ZERO_SV: f64 = 1e-10;
const NONZERO_SV: f64 = 1e-6;

/// Annihilator of `(λ − ℒ†)` on rank-one operators over `D`, realized as the
/// null space of `x ↦ B*(λx − ℒ(x))B` on Hermitian `x`.
pub fn predual_annihilator_check(ctx: &LaplaceContext) -> Result<AnnihilatorReport> {
    let n = ctx.spec.dim();
    let b = ctx.spec.domain_basis();
    if b.ncols() == 0 {
        return Err(Error::InvalidArgument("D is trivial".into()));
    }
    let inputs = n * n;
    let d = b.ncols();
    let outputs = d * d;
    let columns = ctx.execution.map_range(inputs, |k| {
        let mut e = DVector::zeros(inputs);
        e[k] = 1.0;
        let x = from_hermitian_coordinates(&e, n);
        let y = &x * c64(ctx.lambda, 0.0) - ctx.spec.generator(&x);
        hermitian_coordinates(&linalg::congruence(&y, &b))
    });
    let rows = outputs.max(inputs);
    let mut m = DMatrix::<f64>::zeros(rows, inputs);
    for (k, col) in columns.iter().enumerate() {
        m.view_mut((0, k), (outputs, 1)).copy_from(col);
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max().max(f64::MIN_POSITIVE);
    let mut null_rows = Vec::new();
    let mut ambiguous = false;
    let mut smallest_retained = f64::INFINITY;
    let mut largest_discarded: f64 = 0.0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        let rel = s / smax;
        if rel <= ZERO_SV {
            null_rows.push(i);
            largest_discarded = largest_discarded.max(rel);
        } else {
            smallest_retained = smallest_retained.min(rel);
            if rel < NONZERO_SV {
                ambiguous = true;
            }
        }
    }
    let dimension = null_rows.len();
    let mut report = AnnihilatorReport {
        dimension,
        ambiguous,
        smallest_retained_singular_value: smallest_retained,
        largest_discarded_singular_value: largest_discarded,
        psd_element_found: false,
        psd_element_min_eig: None,
        psd_element_residual: None,
        psd_element: None,
    };
    if dimension == 0 {
        return Ok(report);
    }
    let mats: Vec<CMat> = null_rows
        .iter()
        .map(|&r| from_hermitian_coordinates(&v_t.row(r).transpose(), n))
        .collect();
    if let Some((min_eig, element)) = max_min_eig_unit_trace(&mats) {
        let coords = hermitian_coordinates(&element);
        let basis = DMatrix::from_fn(inputs, dimension, |r, c| v_t[(null_rows[c], r)]);
        let residual = (&coords - &basis * (basis.transpose() * &coords)).norm();
        report.psd_element_found = residual < 1e-8 && min_eig > -1e-10;
        report.psd_element_min_eig = Some(min_eig);
        report.psd_element_residual = Some(residual);
        report.psd_element = Some(element);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    DecayingToZero,
    StabilizingPositive,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub lambda: f64,
    pub dims: Vec<usize>,
    pub certificates: Vec<ExplosionCertificate>,
    /// `λ⟨e_0, Ẽ_λ(I) e_0⟩` per size.
    pub observable_trace: Vec<f64>,
    pub trend: Trend,
    /// `(N₂v₂ − N₁v₁)/(N₂ − N₁)` from the last two sizes, assuming `v ≈ L + c/N`.
    pub extrapolated_limit: Option<f64>,
    /// The two raw values the extrapolation used.
    pub extrapolation_inputs: Option<(f64, f64)>,
}

pub fn classify_trend(dims: &[usize], values: &[f64], limit: Option<f64>, any_inconclusive: bool, tol: &Tolerances) -> Trend {
    if any_inconclusive || values.is_empty() {
        return Trend::Undetermined;
    }
    if values.iter().all(|v| v.abs() < tol.decision_threshold) {
        return Trend::DecayingToZero;
    }
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let (Some(limit), Some(&last), true) = (limit, values.last(), decreasing && dims.len() >= 2) else {
        return Trend::Undetermined;
    };
    if limit <= 0.1 * last {
        Trend::DecayingToZero
    } else if limit >= 0.5 * last {
        Trend::StabilizingPositive
    } else {
        Trend::Undetermined
    }
}

/// Certificates across a truncation ladder of one catalog family.
pub fn truncation_sweep(
    family: &CatalogEntry,
    lambda: f64,
    dims: &[usize],
    tol: &Tolerances,
    execution: Execution,
) -> Result<SweepResult> {
    if dims.is_empty() || dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sweep sizes must be nonempty and strictly increasing".into()));
    }
    // Parallelize across sizes; each size runs its own solves sequentially.
    let runs = execution.map(dims, |&d| -> Result<ExplosionCertificate> {
        let spec = family.with_size(d)?.build_model()?;
        let ctx = LaplaceContext::new(&spec, lambda, *tol)?.with_execution(Execution::Sequential);
        conservativity_verdict(&ctx)
    });
    let certificates: Vec<ExplosionCertificate> = runs.into_iter().collect::<Result<_>>()?;
    let values: Vec<f64> = certificates.iter().map(|c| c.explosion_mass).collect();
    let (extrapolated_limit, extrapolation_inputs) = match (dims, values.as_slice()) {
        ([.., n1, n2], [.., v1, v2]) => {
            let (n1, n2) = (*n1 as f64, *n2 as f64);
            (Some((n2 * v2 - n1 * v1) / (n2 - n1)), Some((*v1, *v2)))
        }
        _ => (None, None),
    };
    let any_inconclusive = certificates.iter().any(|c| c.verdict == Verdict::Inconclusive);
    let trend = classify_trend(dims, &values, extrapolated_limit, any_inconclusive, tol);
    Ok(SweepResult {
        lambda,
        dims: dims.to_vec(),
        certificates,
        observable_trace: values,
        trend,
        extrapolated_limit,
        extrapolation_inputs,
    })
}
