//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors raised by the transport toolkit.
#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("path length must be nonnegative, got {0}")]
    NegativePathLength(f64),

    #[error("vector has norm {0:.3e}, expected a unit direction")]
    NotUnitDirection(f64),

    #[error("random number must lie in (0,1), got {0}")]
    UniformOutOfRange(f64),

    #[error("free-path cdf = {cdf} at s = {s}: cross section undefined beyond the distribution's support")]
    SingularTail { s: f64, cdf: f64 },

    #[error("equilibrium spectrum is not normalizable: mean free path diverges")]
    NonNormalizable,

    #[error("free-path moment of order {order} does not converge: tail contribution {tail:.3e} after doubling the integration limit to {s_limit:.3e}")]
    DivergentMoment { order: u32, tail: f64, s_limit: f64 },

    #[error("target optical depth {target:.6e} exceeds the reachable maximum {max_reachable:.6e} (tabulated range plus extrapolation budget)")]
    TailOverflow { target: f64, max_reachable: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("quadrature failed on [{a:.3e}, {b:.3e}]: estimated error {error:.3e} above tolerance")]
    QuadratureFailure { a: f64, b: f64, error: f64 },

    #[error("non-finite integrand value at quadrature node {index}")]
    NonFiniteNode { index: usize },

    #[error("Neumann series did not converge within {max_terms} terms (last term norm {last_term:.3e})")]
    SeriesDivergence { max_terms: usize, last_term: f64 },

    #[error("second free-path moment diverges; the diffusion limit does not apply (anomalous diffusion)")]
    AnomalousDiffusion,

    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("kernel accuracy: {0}")]
    KernelAccuracy(String),

    #[error("diffusion tensor is not positive definite")]
    NotPositiveDefinite,

    #[error("linear solver stalled at relative residual {residual:.3e} after {iterations} iterations (history tail: {history:?})")]
    SolverStagnation {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
}

impl TransportError {
    /// Configuration-style error with a field path, e.g. `model.kind`.
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        TransportError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            TransportError::Config { .. } | TransportError::InvalidModel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, TransportError>;
