use serde::{Deserialize, Serialize};

/// Numerical tolerances used across validation, evolution and diagnostics.
///
/// Values are absolute and assume unit-normalized models. Every field can be
/// overridden from a run config; missing fields keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub hermitian_tol: f64,
    pub psd_tol: f64,
    pub duality_tol: f64,
    /// ε in the dissipativity and condition-(iii) checks.
    pub validation_eps: f64,
    pub condition_iv_tol: f64,
    pub contraction_tol: f64,
    pub ode_atol: f64,
    pub ode_rtol: f64,
    pub quadrature_tol: f64,
    pub cross_method_tol: f64,
    pub iteration_convergence_tol: f64,
    /// Certificates above this are explosion mass.
    pub decision_threshold: f64,
    /// Certificates in `[inconclusive_floor, decision_threshold)` are undecided.
    pub inconclusive_floor: f64,
    pub series_tail_tol: f64,
    pub stall_tol: f64,
    /// Lower bound on the number of series / power-iteration terms; the
    /// effective cap is `max(series_min_terms, 10 * dim)`.
    pub series_min_terms: usize,
    pub quad_tol: f64,
    pub sym_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian_tol: 1e-10,
            psd_tol: 1e-10,
            duality_tol: 1e-10,
            validation_eps: 1e-10,
            condition_iv_tol: 1e-10,
            contraction_tol: 1e-10,
            ode_atol: 1e-10,
            ode_rtol: 1e-8,
            quadrature_tol: 1e-9,
            cross_method_tol: 1e-6,
            iteration_convergence_tol: 1e-6,
            decision_threshold: 1e-7,
            inconclusive_floor: 1e-9,
            series_tail_tol: 1e-14,
            stall_tol: 1e-13,
            series_min_terms: 2000,
            quad_tol: 1e-8,
            sym_tol: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn max_terms(&self, dim: usize) -> usize {
        self.series_min_terms.max(10 * dim)
    }
}
