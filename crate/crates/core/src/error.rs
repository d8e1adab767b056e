use thiserror::Error;

pub type Result<T, E = MhdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MhdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported quadrature order {0} (supported: 1..=6)")]
    UnsupportedQuadrature(usize),

    #[error("degenerate element {cell}: jacobian determinant {det:e}")]
    DegenerateElement { cell: usize, det: f64 },

    #[error("singular matrix in {block}{}", .pivot.map(|p| format!(" at pivot {p}")).unwrap_or_default())]
    Singular {
        block: String,
        pivot: Option<usize>,
    },

    #[error("matrix is not positive definite: p'Ap = {curvature:e} at CG iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("nonlinear iteration diverged at step {step}: residual {residual:e}")]
    NonlinearDivergence { step: usize, residual: f64 },

    #[error("nonlinear iteration did not converge in {steps} steps (relative residual {residual:e})")]
    NonlinearNotConverged { steps: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
