use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants split into three families so callers can map them to process
/// exit codes: invalid input (`InvalidParameter`, `DegenerateGeometry`,
/// `InfeasibleAllocation`), numerical failures (`QuadratureNonConvergence`,
/// `InsufficientTrials`, `InternalContradiction`), and verification
/// failures raised by downstream tooling.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("allocation violates power constraints: {0}")]
    InfeasibleAllocation(String),

    #[error(
        "quadrature did not converge: requested absolute tolerance {requested:.3e}, \
         achieved {achieved:.3e} after {evals} evaluations"
    )]
    QuadratureNonConvergence {
        requested: f64,
        achieved: f64,
        evals: usize,
    },

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),

    #[error("internal contradiction: {0}")]
    InternalContradiction(String),
}

impl CoreError {
    /// True for errors caused by caller-supplied inputs rather than
    /// numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CoreError::InvalidParameter(_)
                | CoreError::DegenerateGeometry(_)
                | CoreError::InfeasibleAllocation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
