use thiserror::Error;

/// Errors surfaced by the solvers and the batch front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode set is not symmetric under k -> -k (mode {0:?} has no partner)")]
    LatticeNotSymmetric([i32; 3]),

    #[error("SCF did not converge after {iterations} iterations (last residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("mean-field operator has eigenvalue {eigenvalue:e} within the kernel threshold of mu = {mu} at iteration {iteration}")]
    Degenerate {
        iteration: usize,
        mu: f64,
        eigenvalue: f64,
    },

    #[error("charge {target} unreachable inside the chemical-potential bracket ({lo}, {hi})")]
    ChargeUnreachable { target: f64, lo: f64, hi: f64 },

    #[error("Landau pole: alpha_ph * B = {product} >= 1, no bare coupling exists")]
    LandauPoleViolation { product: f64 },

    #[error("response is not linear: coupling ratios differ by {relative_gap:.3e} (limit 5%)")]
    NonlinearRegime { relative_gap: f64 },

    #[error("expansion fit is ill-conditioned: {0}")]
    FitIllConditioned(String),

    #[error("Pauli-Villars masses are degenerate (m1 = m2 = {0})")]
    DegenerateMasses(f64),

    #[error("saddle search did not converge after {iterations} outer iterations (grad_V {grad_v:e}, grad_A {grad_a:e})")]
    MaxOuterExceeded {
        iterations: usize,
        grad_v: f64,
        grad_a: f64,
    },

    #[error("saddle iterate pinned to the constraint ball boundary for {iterations} consecutive iterations")]
    BoundaryStall { iterations: usize },

    #[error("eigendecomposition failed to converge")]
    Eigensolver,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation { .. } | Error::InvalidArgument(_) => 2,
            Error::MaxIterExceeded { .. } => 3,
            Error::Degenerate { .. } => 4,
            Error::ChargeUnreachable { .. } => 5,
            Error::LandauPoleViolation { .. } => 6,
            Error::NonlinearRegime { .. } | Error::FitIllConditioned(_) => 7,
            Error::MaxOuterExceeded { .. } | Error::BoundaryStall { .. } => 8,
            Error::DegenerateMasses(_) => 9,
            _ => 1,
        }
    }

    /// Stable machine-readable tag for structured logs and the C ABI.
    pub fn code_name(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::LatticeNotSymmetric(_) => "LatticeNotSymmetric",
            Error::MaxIterExceeded { .. } => "MaxIterExceeded",
            Error::Degenerate { .. } => "Degenerate",
            Error::ChargeUnreachable { .. } => "ChargeUnreachable",
            Error::LandauPoleViolation { .. } => "LandauPoleViolation",
            Error::NonlinearRegime { .. } => "NonlinearRegime",
            Error::FitIllConditioned(_) => "FitIllConditioned",
            Error::DegenerateMasses(_) => "DegenerateMasses",
            Error::MaxOuterExceeded { .. } => "MaxOuterExceeded",
            Error::BoundaryStall { .. } => "BoundaryStall",
            Error::Eigensolver => "Eigensolver",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Checkpoint(_) => "Checkpoint",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
