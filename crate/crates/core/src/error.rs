use thiserror::Error;

/// Errors raised by the geometry, objective, landscape and optimizer layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (shape, range, symmetry, horizontality).
    #[error("input contract violated: {0}")]
    InputContract(String),

    /// An iterative factorization or eigen-solver did not converge.
    #[error("numerical failure on {rows}x{cols} matrix: {context}")]
    NumericalFailure {
        rows: usize,
        cols: usize,
        context: String,
    },

    /// A factor matrix is not of full column rank.
    #[error("factor is rank deficient: sigma_min = {sigma_min:e} <= tolerance {tol:e}")]
    RankDeficient { sigma_min: f64, tol: f64 },

    /// A step along a tangent direction left the full-rank manifold.
    #[error("rank collapse at t = {t}: sigma_min = {sigma_min:e}")]
    RankCollapse { t: f64, sigma_min: f64 },

    /// The alignment between two factors is not unique, so the logarithm is undefined.
    #[error("logarithm not unique: smallest singular value of Y1^T Y2 is {sigma_min:e}")]
    NonUnique { sigma_min: f64 },

    /// A dense construction would exceed the configured size cap.
    #[error("resource limit: {what} needs {needed} but the cap is {cap}; use the iterative spectrum path")]
    ResourceLimit {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    /// Parameters violate a hypothesis of the bound being evaluated.
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    /// The point handed to a stationary-point check is not stationary.
    #[error("not a first-order stationary point: gradient norm {grad_norm:e} > tolerance {tol:e}")]
    NotStationary { grad_norm: f64, tol: f64 },

    /// Spectral initialization found too few positive eigenvalues.
    #[error("initialization failed: {0}")]
    InitializationFailure(String),

    /// An optimizer iterate left the full-rank manifold.
    #[error("iterate {iteration} collapsed in rank (sigma_min = {sigma_min:e})")]
    IterateRankCollapse { iteration: usize, sigma_min: f64 },

    /// Backtracking line search could not find an acceptable step.
    #[error("line search failed at iteration {iteration} after {backtracks} backtracks")]
    StepFailure { iteration: usize, backtracks: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::InputContract(msg.into())
    }

    /// True for errors that stem from floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure { .. }
                | Error::RankCollapse { .. }
                | Error::IterateRankCollapse { .. }
                | Error::StepFailure { .. }
                | Error::NonUnique { .. }
                | Error::RankDeficient { .. }
                | Error::InitializationFailure(_)
        )
    }
}
