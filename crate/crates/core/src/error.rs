use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution {0} must be even and at least 8")]
    Resolution(usize),
    #[error("lattice modulus {re}+{im}i must have positive imaginary part")]
    Modulus { re: f64, im: f64 },
    #[error("field has {found} values, grid needs {expected}")]
    Length { expected: usize, found: usize },
    #[error("invalid field: non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("affine map has determinant {0}, expected +1")]
    Orientation(i64),
    #[error("metric is not positive definite at node {index}")]
    NotPositiveDefinite { index: usize },
    #[error("conformal structure does not have unit determinant at node {index}")]
    NotUnimodular { index: usize },
    #[error("tensor is not symmetric in its lower indices at node {index}")]
    NotSymmetric { index: usize },
    #[error("coframe is not positively oriented at node {index}")]
    CoframeOrientation { index: usize },
    #[error("dimension {0} is not supported")]
    Dimension(usize),
    #[error("no periodic solution: cubic differential vanishes identically")]
    NoSolution,
    #[error("Newton iteration failed after {iterations} steps (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("line search stalled at iteration {iteration}")]
    Stalled {
        iteration: usize,
        trajectory: Box<crate::flow::FlowTrajectory>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed PGFB data at byte offset {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
