use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {0} is not an active leaf cell and cannot be marked")]
    InvalidMark(usize),
    #[error("hanging vertex {0} sits on an edge whose endpoints cannot be resolved to non-hanging vertices")]
    UnsupportedNesting(usize),
    #[error("cannot project vertex {0} radially: it coincides with the curve center")]
    DegenerateProjection(usize),
    #[error("cell {cell} is degenerate (area {area:e})")]
    DegenerateCell { cell: usize, area: f64 },
    #[error("constraint references unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("system is not in conforming-test form: constraint row {0} has unexpected entries")]
    NotConformingTestForm(usize),
    #[error("node {node}: position is not strictly inside the convex hull of its neighbors (distance {dist:e})")]
    DegenerateHull { node: usize, dist: f64 },
    #[error("BJK limiter requires node geometry")]
    MissingGeometry,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sparsity pattern lacks the diagonal entry of row {0}")]
    MissingDiagonal(usize),
    #[error("sparsity pattern is not structurally symmetric")]
    NonSymmetricPattern,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("iterative solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    IterativeNotConverged { iterations: usize, residual: f64 },
    #[error("fixed-point iteration produced non-finite values at step {0}")]
    SolverDiverged(usize),
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),
    #[error("estimator undefined: sigma0 = 0 and epsilon = 0")]
    UndefinedEstimator,
    #[error("the AFC estimator needs limiter values and artificial diffusion")]
    MissingLimiterData,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("mesh file {0} not found")]
    MeshFileMissing(PathBuf),
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures of the nonlinear or linear solvers, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Self::Factorization(_) | Self::IterativeNotConverged { .. } | Self::SolverDiverged(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
