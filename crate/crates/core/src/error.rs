use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate grid: {cells} cells (need at least 4)")]
    DegenerateGrid { cells: usize },

    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("group {group} has non-positive self interaction {value:e}")]
    H3Violation { group: usize, value: f64 },

    #[error("Nehari projection infeasible (last residual {residual:e})")]
    ProjectionInfeasible { residual: f64 },

    #[error("infeasible lower bound: group {group} has no positive coupling")]
    InfeasibleBound { group: usize },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
