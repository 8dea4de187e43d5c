use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite data value {value} at ({x}, {y}) in element {element}")]
    Data {
        element: usize,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(
        "optimality system did not converge after {iterations} iterations (last defect {defect:e})"
    )]
    NotConverged { iterations: usize, defect: f64 },

    #[error("mesh refinement failed: {0}")]
    Refinement(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
