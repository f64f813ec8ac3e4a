//! Minimal quantum dynamical semigroups on finite truncations of formal
//! generators `ℒ(x) = φ(x) − G*x − xG`.
//!
//! The crate builds truncated models, evolves them, evaluates Laplace-domain
//! explosion certificates and issues conservativity verdicts. A companion
//! set of tools computes deficiency indices of first-order transport
//! operators and of Cayley transforms of shift isometries.

pub mod catalog;
pub mod deficiency;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod ode;
pub mod operator;
pub mod parallel;
pub mod quadrature;
pub mod report;
pub mod resolvent;
pub mod semigroup;
pub mod tolerance;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use operator::{
    apply_generator, apply_phi, predual_generator, validate_model, ConditionVerdict, Domain, FormTag,
    HermitianForm, ModelSpec, TruncatedSpace, ValidationReport,
};
pub use parallel::Execution;
pub use tolerance::Tolerances;
