//! The piecewise rate function of overflow events, the inf-sup decay
//! bound, tightness certificates, closed forms for the equal-Hurst fBm
//! case, and most probable overflow paths.

mod closed_form;
mod mpp;
mod optimize;
mod problem;
mod tightness;

pub use closed_form::{closed_form_fbm, optimal_t_structure, ClosedFormResult};
pub use mpp::{most_probable_path, GridSpec, MeanPath};
pub use optimize::{
    decay_lower_bound, rate_sup_over_s, DecayOptions, DecayResult, OptimizerDiagnostics,
};
pub use problem::{
    c_fun, h_fun, k_fun, qp_oracle, rate_case_value, CaseTag, QpSolution, RateProblem,
};
pub use tightness::{
    check_tightness, decay_with_tightness, ConditionCheck, Tightness, TightnessOptions,
    TightnessVerdict,
};

use thiserror::Error;

use crate::kernel::KernelError;
use crate::network::NetworkError;

/// Variance floor below which increment combinations are treated as
/// degenerate and evaluation is routed to the boundary branch.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Error)]
pub enum DeviationsError {
    #[error("threshold b must be positive (got {0})")]
    BadThreshold(f64),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("2x2 increment covariance matrix is singular")]
    SingularCovariance,
    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),
    #[error("closed-form hypotheses violated: {0}")]
    HypothesisViolated(String),
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
