//! Gauss–Legendre rules: fixed rules, adaptive scalar integration, and the
//! matrix-valued Laplace integrals `∫₀^∞ e^{-λt} W_t* C W_t dt`.

use crate::error::{Error, Result};
use crate::linalg::{c64, expm, CMat};
use crate::parallel::Execution;

/// Nodes and weights of the `m`-point rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..(m + 1) / 2 {
            // Tricomi initial guess, then Newton on P_m.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[m - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[m - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Apply the rule on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let h = b - a;
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(a + h * x)).sum::<f64>() * h
    }
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Bisections allowed per call before remaining panels are accepted as is.
const ADAPTIVE_BUDGET: usize = 1 << 16;

/// Adaptive bisection with a 10-point rule; `tol` is absolute.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = GaussLegendre::new(10);
    let whole = rule.integrate(a, b, f);
    let mut budget = ADAPTIVE_BUDGET;
    adaptive_step(&rule, f, a, b, whole, tol, 0, &mut budget)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    budget: &mut usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let floor = 8.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth >= 40 || *budget == 0 || (left + right - whole).abs() <= tol.max(floor) {
        return left + right;
    }
    *budget -= 1;
    adaptive_step(rule, f, a, mid, left, 0.5 * tol, depth + 1, budget)
        + adaptive_step(rule, f, mid, b, right, 0.5 * tol, depth + 1, budget)
}

/// Settings for [`laplace_congruence`].
#[derive(Debug, Clone, Copy)]
pub struct LaplaceQuadrature {
    /// Stop when successive panel halvings differ by less than this (Frobenius).
    pub tol: f64,
    /// Truncate the half-line where the remaining tail is below this bound.
    pub tail_tol: f64,
    pub nodes_per_panel: usize,
    pub max_panels: usize,
    pub execution: Execution,
}

impl Default for LaplaceQuadrature {
    fn default() -> Self {
        LaplaceQuadrature {
            tol: 1e-9,
            tail_tol: 1e-12,
            nodes_per_panel: 8,
            max_panels: 1 << 18,
            execution: Execution::default(),
        }
    }
}

/// `∫₀^∞ e^{-λt} W_t* C W_t dt` with `W_t = exp(-tG)`, by composite
/// Gauss–Legendre on `[0, T]` with panel halving until two successive
/// refinements agree. `G` must generate a contraction semigroup so the
/// tail beyond `T` is bounded by `‖C‖ e^{-λT}/λ`.
pub fn laplace_congruence(g: &CMat, lambda: f64, c: &CMat, opts: &LaplaceQuadrature) -> Result<CMat> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let n = g.nrows();
    let cnorm = c.norm().max(f64::MIN_POSITIVE);
    let horizon = ((cnorm / (lambda * opts.tail_tol)).ln() / lambda).max(1.0 / lambda);
    let gscale = crate::linalg::op_norm(g).max(lambda);
    let mut panels = ((horizon * gscale).ceil() as usize).max(8);
    let mut prev = integrate_panels(g, lambda, c, horizon, panels, opts)?;
    loop {
        if panels * 2 > opts.max_panels {
            return Err(Error::Quadrature { achieved: f64::NAN });
        }
        panels *= 2;
        let next = integrate_panels(g, lambda, c, horizon, panels, opts)?;
        let change = (&next - &prev).norm();
        if change <= opts.tol * cnorm.max(1.0) {
            let mut out = next;
            crate::linalg::symmetrize_in_place_if_hermitian(&mut out, c);
            return Ok(out);
        }
        if n == 0 {
            return Ok(next);
        }
        prev = next;
    }
}

fn integrate_panels(
    g: &CMat,
    lambda: f64,
    c: &CMat,
    horizon: f64,
    panels: usize,
    opts: &LaplaceQuadrature,
) -> Result<CMat> {
    let n = g.nrows();
    let rule = GaussLegendre::new(opts.nodes_per_panel);
    let h = horizon / panels as f64;
    let step = expm(&(g * c64(-h, 0.0)));
    let node_props: Vec<CMat> = rule.nodes.iter().map(|x| expm(&(g * c64(-h * x, 0.0)))).collect();

    // Split the panels into contiguous chunks; each chunk seeds its own
    // starting propagator and then walks forward by repeated multiplication.
    let chunks = if opts.execution.is_parallel() { 16.min(panels) } else { 1 };
    let per_chunk = panels.div_ceil(chunks);
    let partials = opts.execution.map_range(chunks, |k| {
        let first = k * per_chunk;
        let last = ((k + 1) * per_chunk).min(panels);
        let mut acc = CMat::zeros(n, n);
        if first >= last {
            return acc;
        }
        let mut w_start = expm(&(g * c64(-h * first as f64, 0.0)));
        for p in first..last {
            let a = h * p as f64;
            for (x, (wgt, wn)) in rule.nodes.iter().zip(rule.weights.iter().zip(&node_props)) {
                let t = a + h * x;
                let w = wn * &w_start;
                let term = w.adjoint() * c * &w;
                acc += term * c64(wgt * h * (-lambda * t).exp(), 0.0);
            }
            w_start = &step * &w_start;
        }
        acc
    });
    let mut total = CMat::zeros(n, n);
    for p in partials {
        total += p;
    }
    Ok(total)
}
