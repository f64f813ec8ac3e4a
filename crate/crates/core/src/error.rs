use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("vector outside the distinguished subspace D (residual {residual:.3e})")]
    OutsideDomain { residual: f64 },

    #[error("generator is not dissipative: most negative eigenvalue of G + G* is {residual:.3e}")]
    NotDissipative { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operand must be positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("integration failed at t = {t:.6}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("quadrature did not converge: last refinement changed the result by {achieved:.3e}")]
    Quadrature { achieved: f64 },

    #[error("Sylvester solve is singular (pivot {pivot:.3e})")]
    SingularSylvester { pivot: f64 },

    #[error("grid too coarse: residual {achieved:.3e} exceeds {threshold:.3e}")]
    GridTooCoarse { achieved: f64, threshold: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("construction rejected: {0}")]
    Construction(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
