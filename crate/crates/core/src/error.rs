use thiserror::Error;

use crate::continuation::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be even and ≥ 8 (got {n1}×{n2})")]
    GridSize { n1: usize, n2: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density not positive: min ≈ {min:.3} < {floor}")]
    NotPositive { min: f64, floor: f64 },

    #[error("cut-locus violation: sup|displacement| = {sup:.6} ≥ 0.5")]
    CutLocus { sup: f64 },

    #[error("not c-concave: smallest eigenvalue of A − D²u is {margin:.3e}")]
    NotCConcave { margin: f64 },

    #[error("not a diffeomorphism: c-concavity margin {margin:.3e} ≤ 0")]
    NotDiffeomorphism { margin: f64 },

    #[error("inadmissible state: {0}")]
    Inadmissible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Newton did not converge after {iterations} iterations: {reason} (sup|F| = {sup_residual:.3e})")]
    Newton {
        iterations: usize,
        sup_residual: f64,
        reason: String,
    },

    #[error("initialization failed at t0 = {t0:.3e}: {reason}; try a larger grid or smoother densities")]
    Initialization { t0: f64, reason: String },

    #[error("step collapse at t = {t:.6e} (dt = {dt:.3e} < 1e-8)")]
    StepCollapse {
        t: f64,
        dt: f64,
        partial: Box<Trajectory>,
    },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse { .. } | Error::Config { .. } => 2,
            Error::Io(_) | Error::Format(_) => 4,
            _ => 3,
        }
    }
}
