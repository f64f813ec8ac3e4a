//! Deficiency vectors and indices of the first-order operator
//! `τ_f u = (1/2i)((fu)' + fu')` on the half-line, Cayley-transform indices
//! of band isometries, von Neumann extensions, and the `λ = 2` certificate
//! for the rank-one form built from `u_+`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec};
use crate::operator::cmat_serde;
use crate::quadrature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FDescriptor {
    /// `f(x) = (1 + x)^α`, `0 ≤ α ≤ 1`.
    Power { alpha: f64 },
    /// Positive samples of `f` at the grid nodes.
    Sampled { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `τ_f` itself: indices (1, 0), mass leaks through `x = 0`.
    #[default]
    Forward,
    /// `−τ_f`: indices (0, 1), conservative transport.
    Adjoint,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Forward => 1.0,
            Orientation::Adjoint => -1.0,
        }
    }
}

fn default_c1() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauFModel {
    pub f: FDescriptor,
    /// `0 = x_0 < x_1 < … < x_M`.
    pub grid: Vec<f64>,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default)]
    pub orientation: Orientation,
}

/// Quantities reported by [`TauFModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauFSummary {
    pub min_f: f64,
    /// Largest `|f'|` on the grid (exact for the power family, forward
    /// differences for sampled `f`).
    pub max_abs_df: f64,
    /// `∫_0^{x_M} dx / f`; must grow without bound as the grid is extended.
    pub inverse_f_integral: f64,
}

impl TauFModel {
    pub fn new(f: FDescriptor, grid: Vec<f64>, c1: f64) -> Result<Self> {
        let model = TauFModel { f, grid, c1, orientation: Orientation::Forward };
        model.validate()?;
        Ok(model)
    }

    /// Uniform grid on `[0, length]` with `intervals` cells.
    pub fn uniform(f: FDescriptor, length: f64, intervals: usize, c1: f64) -> Result<Self> {
        if !(length > 0.0) || intervals < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs positive length and at least 2 intervals (got {length}, {intervals})"
            )));
        }
        let h = length / intervals as f64;
        let grid = (0..=intervals).map(|j| j as f64 * h).collect();
        Self::new(f, grid, c1)
    }

    pub fn power(alpha: f64, length: f64, intervals: usize, c1: f64) -> Result<Self> {
        Self::uniform(FDescriptor::Power { alpha }, length, intervals, c1)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Same `f` and `c1` on a uniform grid over the same interval.
    pub fn regridded(&self, intervals: usize) -> Result<Self> {
        if !self.is_analytic() {
            return Err(Error::InvalidArgument("sampled f cannot be regridded".into()));
        }
        let length = *self.grid.last().unwrap_or(&0.0);
        Ok(Self::uniform(self.f.clone(), length, intervals, self.c1)?.with_orientation(self.orientation))
    }

    pub fn intervals(&self) -> usize {
        self.grid.len().saturating_sub(1)
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.f, FDescriptor::Power { .. })
    }

    pub fn validate(&self) -> Result<TauFSummary> {
        let g = &self.grid;
        if g.len() < 3 {
            return Err(Error::InvalidArgument("grid needs at least 3 nodes".into()));
        }
        if g[0] != 0.0 {
            return Err(Error::InvalidArgument(format!("grid must start at 0, starts at {}", g[0])));
        }
        if g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("grid must be finite and strictly increasing".into()));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidArgument(format!("c1 must be positive, got {}", self.c1)));
        }
        match &self.f {
            FDescriptor::Power { alpha } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
                }
            }
            FDescriptor::Sampled { values } => {
                if values.len() != g.len() {
                    return Err(Error::Dimension(format!("{} samples of f on {} grid nodes", values.len(), g.len())));
                }
                if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidArgument(format!("f must be positive on the grid, found {bad}")));
                }
            }
        }
        let f = self.f_values();
        let df = self.df_values();
        let prim = self.primitive_values();
        Ok(TauFSummary {
            min_f: f.iter().copied().fold(f64::INFINITY, f64::min),
            max_abs_df: df.iter().fold(0.0, |acc, d| acc.max(d.abs())),
            inverse_f_integral: *prim.last().unwrap(),
        })
    }

    /// Uniform spacing, if the grid is uniform.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let h = self.grid[1] - self.grid[0];
        let uniform = self.grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        uniform.then_some(h)
    }

    fn f_at(&self, x: f64) -> f64 {
        match &self.f {
            FDescriptor::Power { alpha } => (1.0 + x).powf(*alpha),
            FDescriptor::Sampled { .. } => unreachable!("sampled f is only known on the grid"),
        }
    }

    /// `∫_0^x dτ / f(τ)` for the power family.
    fn primitive_at(&self, x: f64) -> f64 {
        match &self.f {
            FDescriptor::Power { alpha } => {
                let beta = 1.0 - alpha;
                let log = x.ln_1p();
                if beta.abs() < 1e-12 {
                    log
                } else if (beta * log).abs() < 1.0 {
                    (beta * log).exp_m1() / beta
                } else {
                    ((1.0 + x).powf(beta) - 1.0) / beta
                }
            }
            FDescriptor::Sampled { .. } => unreachable!("sampled f is only known on the grid"),
        }
    }

    pub fn f_values(&self) -> Vec<f64> {
        match &self.f {
            FDescriptor::Power { .. } => self.grid.iter().map(|&x| self.f_at(x)).collect(),
            FDescriptor::Sampled { values } => values.clone(),
        }
    }

    pub fn df_values(&self) -> Vec<f64> {
        match &self.f {
            FDescriptor::Power { alpha } => self.grid.iter().map(|&x| alpha * (1.0 + x).powf(alpha - 1.0)).collect(),
            FDescriptor::Sampled { values } => {
                let g = &self.grid;
                let n = g.len();
                (0..n)
                    .map(|j| {
                        let (a, b) = if j + 1 < n { (j, j + 1) } else { (j - 1, j) };
                        (values[b] - values[a]) / (g[b] - g[a])
                    })
                    .collect()
            }
        }
    }

    /// `F(x_j) = ∫_0^{x_j} dτ / f(τ)` (trapezoid rule for sampled `f`).
    pub fn primitive_values(&self) -> Vec<f64> {
        match &self.f {
            FDescriptor::Power { .. } => self.grid.iter().map(|&x| self.primitive_at(x)).collect(),
            FDescriptor::Sampled { values } => {
                let mut out = Vec::with_capacity(values.len());
                let mut acc = 0.0;
                out.push(0.0);
                for j in 1..values.len() {
                    acc += 0.5 * (self.grid[j] - self.grid[j - 1]) * (1.0 / values[j] + 1.0 / values[j - 1]);
                    out.push(acc);
                }
                out
            }
        }
    }
}

/// Which of the two candidate deficiency vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// Sign `s` in `u = c f^{-1/2} e^{s F}`.
    fn exponent_sign(self, orientation: Orientation) -> f64 {
        let base = match self {
            Branch::Plus => -1.0,
            Branch::Minus => 1.0,
        };
        base * orientation.sign()
    }

    fn eigen_sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `log u(x) = log c − ½ log f(x) + s F(x)`.
fn log_u_grid(model: &TauFModel, branch: Branch) -> Vec<f64> {
    let s = branch.exponent_sign(model.orientation);
    let f = model.f_values();
    let prim = model.primitive_values();
    f.iter().zip(&prim).map(|(fv, p)| model.c1.ln() - 0.5 * fv.ln() + s * p).collect()
}

/// Largest pointwise relative residual of `σ(f Du + ½(Df)u) ± u = 0`, with
/// forward differences, where `σ = ±1` is the orientation and the sign of the
/// last term selects `u_±`.
fn fd_residual(model: &TauFModel, log_u: &[f64], branch: Branch) -> f64 {
    let g = &model.grid;
    let f = model.f_values();
    let sigma = model.orientation.sign();
    let mut worst: f64 = 0.0;
    for j in 0..g.len() - 1 {
        let h = g[j + 1] - g[j];
        let ratio = (log_u[j + 1] - log_u[j]).exp();
        let du = (ratio - 1.0) / h;
        let df = (f[j + 1] - f[j]) / h;
        let r = sigma * (f[j] * du + 0.5 * df) + branch.eigen_sign();
        worst = worst.max(r.abs());
    }
    worst
}

pub const FD_RESIDUAL_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyVectors {
    pub x: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub residual_plus: f64,
    pub residual_minus: f64,
}

/// Grid samples of `u_±(x) = c f^{-1/2} exp(∓∫_0^x dτ/f)` (signs swapped for
/// the adjoint orientation), with a first-order finite-difference residual
/// check of `τ_f u = ±i u`.
pub fn deficiency_vectors_tau_f(model: &TauFModel) -> Result<DeficiencyVectors> {
    model.validate()?;
    let lp = log_u_grid(model, Branch::Plus);
    let lm = log_u_grid(model, Branch::Minus);
    let residual_plus = fd_residual(model, &lp, Branch::Plus);
    let residual_minus = fd_residual(model, &lm, Branch::Minus);
    let worst = residual_plus.max(residual_minus);
    if worst > FD_RESIDUAL_THRESHOLD {
        return Err(Error::GridTooCoarse { achieved: worst, threshold: FD_RESIDUAL_THRESHOLD });
    }
    Ok(DeficiencyVectors {
        x: model.grid.clone(),
        u_plus: lp.iter().map(|l| l.exp()).collect(),
        u_minus: lm.iter().map(|l| l.exp()).collect(),
        residual_plus,
        residual_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    SquareIntegrable,
    Divergent,
}

/// Partial norms over `[0, X]` for `X = X₀, 2X₀, 4X₀, 8X₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingProbe {
    pub endpoints: Vec<f64>,
    /// `log ∫_0^X |u|²`, kept in log form so divergent tails never overflow.
    pub log_partial_norms: Vec<f64>,
    /// Successive ratios of partial norms.
    pub ratios: Vec<f64>,
    /// `log |u(X)|²` at the first and last endpoint.
    pub log_integrand_first: f64,
    pub log_integrand_last: f64,
    pub class: Option<TailClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyResult {
    pub n_plus: usize,
    pub n_minus: usize,
    pub x: Vec<f64>,
    pub u_plus_samples: Vec<f64>,
    pub u_minus_samples: Vec<f64>,
    /// `‖u_+‖²` when square-integrable.
    pub norm_plus: Option<f64>,
    /// `‖u_−‖²` when square-integrable.
    pub norm_minus: Option<f64>,
    /// The closed form `c1²/2` the norms are compared against.
    pub norm_expected: f64,
    pub norm_plus_tail: TailClass,
    pub norm_minus_tail: TailClass,
    pub probe_plus: DoublingProbe,
    pub probe_minus: DoublingProbe,
    pub residual_plus: f64,
    pub residual_minus: f64,
    pub inverse_f_integral: f64,
    pub quad_tol: f64,
}

/// `log ∫_a^b e^{lg(x)} dx` for a unimodal log-integrand.
fn log_integral<F: Fn(f64) -> f64>(lg: &F, a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let samples = 64;
    let values: Vec<f64> = (0..=samples).map(|k| lg(a + (b - a) * k as f64 / samples as f64)).collect();
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // exp of an exponent of size |lg| is only good to about ε|lg| relative
    let spread = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = 1e-13f64.max(16.0 * f64::EPSILON * spread);
    let shifted = |x: f64| (lg(x) - peak).exp();
    let rough = quadrature::GaussLegendre::new(10).integrate(a, b, shifted).max(f64::MIN_POSITIVE);
    let value = quadrature::adaptive(&shifted, a, b, rel * rough);
    peak + value.ln()
}

/// `log ∫_0^X e^{lg}` by the trapezoid rule on grid nodes up to `X`.
fn log_trapezoid(grid: &[f64], lg: &[f64], upto: f64) -> f64 {
    let last = grid.iter().rposition(|&x| x <= upto * (1.0 + 1e-12)).unwrap_or(0);
    if last == 0 {
        return f64::NEG_INFINITY;
    }
    let peak = lg[..=last].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for j in 1..=last {
        acc += 0.5 * (grid[j] - grid[j - 1]) * ((lg[j] - peak).exp() + (lg[j - 1] - peak).exp());
    }
    peak + acc.ln()
}

fn doubling_probe(model: &TauFModel, branch: Branch) -> DoublingProbe {
    let x_end = *model.grid.last().unwrap();
    let s = branch.exponent_sign(model.orientation);
    let two_log_c = 2.0 * model.c1.ln();
    let (endpoints, log_norms, lg_first, lg_last) = if model.is_analytic() {
        let lg = |x: f64| two_log_c - model.f_at(x).ln() + 2.0 * s * model.primitive_at(x);
        let ends: Vec<f64> = (0..4).map(|k| x_end * f64::powi(2.0, k)).collect();
        let norms: Vec<f64> = ends.iter().map(|&x| log_integral(&lg, 0.0, x)).collect();
        (ends.clone(), norms, lg(ends[0]), lg(ends[3]))
    } else {
        let f = model.f_values();
        let prim = model.primitive_values();
        let lg: Vec<f64> = f.iter().zip(&prim).map(|(fv, p)| two_log_c - fv.ln() + 2.0 * s * p).collect();
        let x0 = x_end / 8.0;
        let ends: Vec<f64> = (0..4).map(|k| x0 * f64::powi(2.0, k)).collect();
        let norms: Vec<f64> = ends.iter().map(|&x| log_trapezoid(&model.grid, &lg, x)).collect();
        let node_at = |x: f64| model.grid.iter().rposition(|&g| g <= x * (1.0 + 1e-12)).unwrap_or(0);
        (ends.clone(), norms, lg[node_at(ends[0])], lg[node_at(ends[3])])
    };
    let ratios: Vec<f64> = log_norms.windows(2).map(|w: &[f64]| (w[1] - w[0]).exp()).collect();
    let decays = lg_last < lg_first;
    let divergent = ratios.iter().all(|r| *r > 1.05) && !decays;
    let settled = ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12) && ratios.last().is_some_and(|r| r - 1.0 < 0.01);
    let class = if divergent {
        Some(TailClass::Divergent)
    } else if settled && decays {
        Some(TailClass::SquareIntegrable)
    } else {
        None
    };
    DoublingProbe {
        endpoints,
        log_partial_norms: log_norms,
        ratios,
        log_integrand_first: lg_first,
        log_integrand_last: lg_last,
        class,
    }
}

/// `∫_0^∞ |u|²` for a square-integrable branch. Analytic `f` is integrated
/// past the grid on geometrically growing panels until the integrand is
/// negligible; sampled `f` uses the trapezoid rule over the grid.
fn full_norm(model: &TauFModel, branch: Branch) -> f64 {
    let s = branch.exponent_sign(model.orientation);
    let two_log_c = 2.0 * model.c1.ln();
    if !model.is_analytic() {
        let f = model.f_values();
        let prim = model.primitive_values();
        let lg: Vec<f64> = f.iter().zip(&prim).map(|(fv, p)| two_log_c - fv.ln() + 2.0 * s * p).collect();
        return log_trapezoid(&model.grid, &lg, *model.grid.last().unwrap()).exp();
    }
    let integrand = |x: f64| (two_log_c - model.f_at(x).ln() + 2.0 * s * model.primitive_at(x)).exp();
    let x_end = *model.grid.last().unwrap();
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = 1.0f64;
    loop {
        let rough = quadrature::GaussLegendre::new(10).integrate(a, b, integrand).abs();
        total += quadrature::adaptive(&integrand, a, b, 1e-13 * rough.max(1e-300));
        if (b >= x_end && integrand(b) < 1e-15 * total) || b > 1e12 {
            return total;
        }
        a = b;
        b = 2.0 * b + 1.0;
    }
}

pub fn deficiency_indices_tau_f(model: &TauFModel, quad_tol: f64) -> Result<DeficiencyResult> {
    let summary = model.validate()?;
    let vectors = deficiency_vectors_tau_f(model)?;
    let probe_plus = doubling_probe(model, Branch::Plus);
    let probe_minus = doubling_probe(model, Branch::Minus);
    let (tail_plus, tail_minus) = match (probe_plus.class, probe_minus.class) {
        (Some(p), Some(m)) => (p, m),
        _ => {
            return Err(Error::Inconclusive(format!(
                "tail classification unstable under grid doubling (ratios + {:?}, − {:?})",
                probe_plus.ratios, probe_minus.ratios
            )))
        }
    };
    let norm_of = |tail: TailClass, branch: Branch| match tail {
        TailClass::SquareIntegrable => Some(full_norm(model, branch)),
        TailClass::Divergent => None,
    };
    let norm_plus = norm_of(tail_plus, Branch::Plus);
    let norm_minus = norm_of(tail_minus, Branch::Minus);
    Ok(DeficiencyResult {
        n_plus: usize::from(tail_plus == TailClass::SquareIntegrable),
        n_minus: usize::from(tail_minus == TailClass::SquareIntegrable),
        x: vectors.x,
        u_plus_samples: vectors.u_plus,
        u_minus_samples: vectors.u_minus,
        norm_plus,
        norm_minus,
        norm_expected: 0.5 * model.c1 * model.c1,
        norm_plus_tail: tail_plus,
        norm_minus_tail: tail_minus,
        probe_plus,
        probe_minus,
        residual_plus: vectors.residual_plus,
        residual_minus: vectors.residual_minus,
        inverse_f_integral: summary.inverse_f_integral,
        quad_tol,
    })
}

fn default_weights() -> Vec<f64> {
    vec![1.0]
}

/// Band isometry `V e_n = w_n e_{n+m}` on a truncation of `ℓ²`, with the
/// weight pattern repeated periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometrySpec {
    pub offset: usize,
    #[serde(default = "default_weights")]
    pub weights: Vec<f64>,
    pub dim: usize,
}

impl IsometrySpec {
    pub fn new(offset: usize, weights: Vec<f64>, dim: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("weight pattern is empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| (w.abs() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidArgument(format!("weights must have modulus 1, found {w}")));
        }
        if dim <= 2 * offset || dim < 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} too small for offset {offset}")));
        }
        Ok(IsometrySpec { offset, weights, dim })
    }

    pub fn shift(offset: usize, dim: usize) -> Result<Self> {
        Self::new(offset, default_weights(), dim)
    }

    /// Columns `0..n−m` are the represented domain.
    pub fn domain_len(&self, n: usize) -> usize {
        n - self.offset
    }

    pub fn matrix_at(&self, n: usize) -> CMat {
        let mut v = CMat::zeros(n, n);
        for j in 0..self.domain_len(n) {
            v[(j + self.offset, j)] = c64(self.weights[j % self.weights.len()], 0.0);
        }
        v
    }

    pub fn matrix(&self) -> CMat {
        self.matrix_at(self.dim)
    }

    /// `‖V_A* V_A − I‖_F` over the represented domain.
    pub fn isometry_defect(&self) -> f64 {
        let v = self.matrix();
        let va = v.columns(0, self.domain_len(self.dim)).into_owned();
        linalg::orthonormality_defect(&va)
    }
}

const LOCALIZED_TOL: f64 = 1e-6;

/// Subspace of `span(c)` with no mass on indices `≥ n/2`.
fn localized_part(c: &CMat) -> CMat {
    let n = c.nrows();
    if c.ncols() == 0 {
        return CMat::zeros(n, 0);
    }
    let half = n / 2;
    let tail = c.rows(half, n - half).into_owned();
    let sv = tail.clone().singular_values();
    let rank = sv.iter().filter(|s| **s > LOCALIZED_TOL).count();
    if rank == 0 {
        return c.clone();
    }
    if rank == c.ncols() {
        return CMat::zeros(n, 0);
    }
    let (null, _) = linalg::null_space(&tail, LOCALIZED_TOL);
    let mut coeffs = null;
    // keep exactly ncols − rank directions even when the gap is soft
    let keep = c.ncols() - rank;
    if coeffs.ncols() > keep {
        coeffs = coeffs.columns(coeffs.ncols() - keep, keep).into_owned();
    }
    c * coeffs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CayleyLevel {
    pub dim: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    /// Localized vectors annihilating every column of `I − V` on its domain.
    pub density_kernel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CayleyDeficiency {
    pub n_plus: usize,
    pub n_minus: usize,
    /// Orthonormal basis of the localized part of `ker V*` at the base dimension.
    #[serde(with = "cmat_serde")]
    pub n_minus_basis: CMat,
    pub levels: Vec<CayleyLevel>,
}

fn cayley_level(iso: &IsometrySpec, n: usize) -> (CayleyLevel, CMat) {
    let v = iso.matrix_at(n);
    let k = iso.domain_len(n);
    let va = v.columns(0, k).into_owned();
    let dom = linalg::identity(n).columns(0, k).into_owned();
    let dom_perp = linalg::orthogonal_complement(&dom, 1e-10);
    let ran_perp = linalg::orthogonal_complement(&va, 1e-10);
    let plus = localized_part(&dom_perp);
    let minus = localized_part(&ran_perp);
    let i_minus_v = &dom - &va;
    let (kernel, _) = linalg::null_space(&i_minus_v.adjoint(), 1e-10);
    let density = localized_part(&kernel);
    let level = CayleyLevel { dim: n, n_plus: plus.ncols(), n_minus: minus.ncols(), density_kernel: density.ncols() };
    (level, minus)
}

/// Indices of `H = i(I+V)(I−V)^{-1}` read off the isometry:
/// `n_+ = dim (dom V)^⊥`, `n_− = dim ker V*`, counting only directions that
/// stay away from the truncation edge. Computed at `dim` and `2·dim`.
pub fn cayley_deficiency_from_isometry(iso: &IsometrySpec) -> Result<CayleyDeficiency> {
    if iso.isometry_defect() > 1e-12 {
        return Err(Error::InvalidArgument(format!("V is not isometric (defect {:.3e})", iso.isometry_defect())));
    }
    let (base, basis) = cayley_level(iso, iso.dim);
    let (doubled, _) = cayley_level(iso, 2 * iso.dim);
    for level in [&base, &doubled] {
        if level.density_kernel > 0 {
            return Err(Error::Refused(format!(
                "range of I − V is not dense: {} localized annihilating vector(s) at dimension {}",
                level.density_kernel, level.dim
            )));
        }
    }
    if (base.n_plus, base.n_minus) != (doubled.n_plus, doubled.n_minus) {
        return Err(Error::Inconclusive(format!(
            "indices ({}, {}) at dimension {} but ({}, {}) at {}",
            base.n_plus, base.n_minus, base.dim, doubled.n_plus, doubled.n_minus, doubled.dim
        )));
    }
    Ok(CayleyDeficiency { n_plus: base.n_plus, n_minus: base.n_minus, n_minus_basis: basis, levels: vec![base, doubled] })
}

/// Data of a symmetric operator `H` plus an isometry `W: N_+ → N_−`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSpec {
    /// Columns spanning `dom H`.
    #[serde(with = "cmat_serde")]
    pub domain: CMat,
    /// `H` applied to each domain column.
    #[serde(with = "cmat_serde")]
    pub image: CMat,
    #[serde(with = "cmat_serde")]
    pub n_plus: CMat,
    #[serde(with = "cmat_serde")]
    pub n_minus: CMat,
    /// `W` in the given deficiency bases (`q × p`).
    #[serde(with = "cmat_serde")]
    pub isometry: CMat,
}

impl ExtensionSpec {
    pub fn new(domain: CMat, image: CMat, n_plus: CMat, n_minus: CMat, isometry: CMat) -> Result<Self> {
        let n = domain.nrows();
        if image.shape() != domain.shape() || n_plus.nrows() != n || n_minus.nrows() != n {
            return Err(Error::Dimension("domain, image and deficiency bases must share the ambient dimension".into()));
        }
        let (p, q) = (n_plus.ncols(), n_minus.ncols());
        if p > q {
            return Err(Error::Refused(format!("n_+ > n_− ({p} > {q}): no isometry maps N_+ into N_−")));
        }
        if isometry.shape() != (q, p) {
            return Err(Error::Dimension(format!("isometry is {:?}, expected {q}x{p}", isometry.shape())));
        }
        let defect = linalg::orthonormality_defect(&isometry);
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!("V is not isometric (defect {defect:.3e})")));
        }
        Ok(ExtensionSpec { domain, image, n_plus, n_minus, isometry })
    }

    /// `H` with no extension.
    pub fn unextended(domain: CMat, image: CMat) -> Result<Self> {
        let n = domain.nrows();
        Self::new(domain, image, CMat::zeros(n, 0), CMat::zeros(n, 0), CMat::zeros(0, 0))
    }

    /// Cayley-inverse data of a band isometry at its truncation:
    /// `dom H = (I−V)(dom V)`, `H(I−V)e = i(I+V)e`, `N_+ = (dom V)^⊥` and
    /// `N_− = (ran V)^⊥` as standard basis vectors, truncation edge included.
    pub fn from_isometry(iso: &IsometrySpec, isometry: CMat) -> Result<Self> {
        let n = iso.dim;
        let k = iso.domain_len(n);
        let m = iso.offset;
        let v = iso.matrix();
        let va = v.columns(0, k).into_owned();
        let dom = linalg::identity(n).columns(0, k).into_owned();
        let domain = &dom - &va;
        let image = (&dom + &va) * c64(0.0, 1.0);
        let n_plus = linalg::identity(n).columns(k, m).into_owned();
        let n_minus = linalg::identity(n).columns(0, m).into_owned();
        Self::new(domain, image, n_plus, n_minus, isometry)
    }

    /// `(n_+ − rank W, n_− − rank W)` for the extension.
    pub fn extended_indices(&self) -> (usize, usize) {
        let rank = if self.isometry.is_empty() { 0 } else { linalg::column_basis(&self.isometry, 1e-10).ncols() };
        (self.n_plus.ncols() - rank, self.n_minus.ncols() - rank)
    }
}

/// Applies `H_V(u + v + Wv) = Hu + iv − iWv`.
#[derive(Debug, Clone)]
pub struct ExtensionEvaluator {
    basis: CMat,
    action: CMat,
    pseudo_inverse: CMat,
}

pub fn von_neumann_extension(ext: &ExtensionSpec) -> Result<ExtensionEvaluator> {
    let paired = &ext.n_plus + &ext.n_minus * &ext.isometry;
    let paired_image = (&ext.n_plus - &ext.n_minus * &ext.isometry) * c64(0.0, 1.0);
    let basis = concat_columns(&ext.domain, &paired);
    let action = concat_columns(&ext.image, &paired_image);
    let svd = basis.clone().svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let pseudo_inverse = svd
        .pseudo_inverse(cutoff)
        .map_err(|e| Error::Construction(e.to_string()))?;
    Ok(ExtensionEvaluator { basis, action, pseudo_inverse })
}

fn concat_columns(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

impl ExtensionEvaluator {
    /// Columns spanning the represented `dom H_V`.
    pub fn domain_basis(&self) -> &CMat {
        &self.basis
    }

    pub fn apply(&self, w: &CVec) -> Result<CVec> {
        if w.len() != self.basis.nrows() {
            return Err(Error::Dimension(format!("vector of length {}, expected {}", w.len(), self.basis.nrows())));
        }
        let coeffs = &self.pseudo_inverse * w;
        let residual = (&self.basis * &coeffs - w).norm();
        if residual > 1e-10 * w.norm().max(1.0) {
            return Err(Error::OutsideDomain { residual });
        }
        Ok(&self.action * coeffs)
    }

    /// `max |⟨H_V w, w'⟩ − ⟨w, H_V w'⟩| / (‖w‖‖w'‖)` over pairs of domain basis vectors.
    pub fn symmetry_residual(&self) -> f64 {
        let k = self.basis.ncols();
        let gram_left = self.action.adjoint() * &self.basis;
        let gram_right = self.basis.adjoint() * &self.action;
        let norms: Vec<f64> = (0..k).map(|j| self.basis.column(j).norm()).collect();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let d: Complex64 = gram_left[(a, b)] - gram_right[(a, b)];
                worst = worst.max(d.norm() / (norms[a] * norms[b]));
            }
        }
        worst
    }

    /// Matrix of `H_V` when its domain is the whole truncated space.
    pub fn full_matrix(&self) -> Option<CMat> {
        let n = self.basis.nrows();
        if self.basis.ncols() != n || linalg::column_basis(&self.basis, 1e-10).ncols() != n {
            return None;
        }
        self.basis.clone().try_inverse().map(|inv| &self.action * inv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionVerdict {
    ExtendsToIsometryGenerator,
    DoesNot,
}

/// `iH` is the restriction of a generator of isometries iff `n_+ ≤ n_−`.
pub fn isometric_restriction_verdict(n_plus: usize, n_minus: usize) -> RestrictionVerdict {
    if n_plus <= n_minus {
        RestrictionVerdict::ExtendsToIsometryGenerator
    } else {
        RestrictionVerdict::DoesNot
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneCertificate {
    pub intervals: usize,
    pub spacing: f64,
    /// `max_j |ℒ(x)_jj − 2 x_jj|` over interior nodes.
    pub diagonal_residual: f64,
    /// `max_{j,k} |ℒ(x)_jk − 2 x_jk|` over interior nodes.
    pub polarized_residual: f64,
    /// Residual at the interior node carrying the least mass of `u`.
    pub far_tail_residual: f64,
    pub far_tail_node: usize,
}

/// With `x = |u⟩⟨u|` for the normalized sampled `u_+` and `φ = 0`,
/// `ℒ(x)[v] = 2⟨v, x v⟩` on the discrete domain.
pub fn prop42_certificate(model: &TauFModel) -> Result<RankOneCertificate> {
    let h = model
        .uniform_spacing()
        .ok_or_else(|| Error::InvalidArgument("certificate needs a uniform grid".into()))?;
    let indices = deficiency_indices_tau_f(model, 1e-8)?;
    if indices.n_plus == 0 {
        return Err(Error::Refused("n_+ = 0: no deficiency vector to build the certificate from".into()));
    }
    let spec = crate::catalog::build_tau_f_transport(model, None)?;
    let norm = indices.u_plus_samples.iter().map(|u| u * u).sum::<f64>().sqrt();
    let u = CVec::from_iterator(indices.u_plus_samples.len(), indices.u_plus_samples.iter().map(|v| c64(v / norm, 0.0)));
    let x = linalg::outer(&u, &u);
    let lx = spec.generator(&x);
    let interior: Vec<usize> = (1..model.intervals()).collect();
    let mut diagonal: f64 = 0.0;
    let mut polarized: f64 = 0.0;
    for &j in &interior {
        diagonal = diagonal.max((lx[(j, j)] - x[(j, j)] * 2.0).norm());
        for &k in &interior {
            polarized = polarized.max((lx[(j, k)] - x[(j, k)] * 2.0).norm());
        }
    }
    let far = *interior
        .iter()
        .min_by(|a, b| u[**a].norm().total_cmp(&u[**b].norm()))
        .expect("grid has interior nodes");
    Ok(RankOneCertificate {
        intervals: model.intervals(),
        spacing: h,
        diagonal_residual: diagonal,
        polarized_residual: polarized,
        far_tail_residual: (lx[(far, far)] - x[(far, far)] * 2.0).norm(),
        far_tail_node: far,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateConvergence {
    pub coarse: RankOneCertificate,
    pub fine: RankOneCertificate,
    /// `log2(r_coarse / r_fine)` of the polarized residual.
    pub order: f64,
}

/// The certificate at the model's grid and at twice as many intervals.
pub fn prop42_convergence(model: &TauFModel) -> Result<CertificateConvergence> {
    let coarse = prop42_certificate(model)?;
    let fine = prop42_certificate(&model.regridded(2 * model.intervals())?)?;
    let order = (coarse.polarized_residual / fine.polarized_residual).log2();
    Ok(CertificateConvergence { coarse, fine, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_f_vectors() {
        let m = TauFModel::power(0.0, 10.0, 1000, 1.0).unwrap();
        let v = deficiency_vectors_tau_f(&m).unwrap();
        for (x, (p, q)) in v.x.iter().zip(v.u_plus.iter().zip(&v.u_minus)) {
            assert!((p - (-x).exp()).abs() < 1e-12 * (1.0 + p));
            assert!((q - x.exp()).abs() < 1e-12 * q);
        }
    }

    #[test]
    fn linear_f_vector() {
        let m = TauFModel::power(1.0, 5.0, 500, 3.0).unwrap();
        let v = deficiency_vectors_tau_f(&m).unwrap();
        for (x, p) in v.x.iter().zip(&v.u_plus) {
            assert!((p - 3.0 * (1.0 + x).powf(-1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let m = TauFModel::power(0.5, 40.0, 10, 1.0).unwrap();
        assert!(matches!(deficiency_vectors_tau_f(&m), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn adjoint_swaps_indices() {
        let m = TauFModel::power(0.0, 20.0, 2000, 1.0).unwrap().with_orientation(Orientation::Adjoint);
        let r = deficiency_indices_tau_f(&m, 1e-8).unwrap();
        assert_eq!((r.n_plus, r.n_minus), (0, 1));
        assert!((r.norm_minus.unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn localized_part_drops_tail_directions() {
        let n = 8;
        let c = CMat::from_columns(&[linalg::basis_vector(n, 0), linalg::basis_vector(n, 7)]);
        let l = localized_part(&c);
        assert_eq!(l.ncols(), 1);
        assert!((l.column(0).norm() - 1.0).abs() < 1e-12);
        assert!(l[(0, 0)].norm() > 1.0 - 1e-12);
    }

    #[test]
    fn isometry_construction_checks() {
        assert!(IsometrySpec::shift(2, 4).is_err());
        assert!(IsometrySpec::new(1, vec![0.5], 8).is_err());
        let v = IsometrySpec::shift(1, 4).unwrap();
        assert!(v.isometry_defect() < 1e-15);
    }
}
