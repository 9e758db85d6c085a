use thiserror::Error;

/// Errors produced anywhere in the estimation and testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("state outside the model's state space: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("origin lies outside the convex hull of the residual vectors")]
    ConvexHull,

    #[error("Newton iteration did not converge after {0} iterations")]
    MaxIter(usize),

    #[error("Lagrange multiplier is infeasible: 1 + lambda'z <= 0 for some observation")]
    Feasibility,

    #[error("data error: {0}")]
    Data(String),

    #[error("{infeasible} of {total} quadrature cells are infeasible")]
    Degenerate { infeasible: usize, total: usize },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("only {0} observations inside the kernel window (need at least 3)")]
    SparseNeighborhood(usize),

    #[error("{failed} of {total} bootstrap replicates failed")]
    Bootstrap { failed: usize, total: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected t = {expected}, found t = {found}")]
    Gap { line: usize, expected: i64, found: i64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Data(_)
            | Error::Domain(_)
            | Error::Parse { .. }
            | Error::Gap { .. }
            | Error::Io(_)
            | Error::Json(_) => 3,
            _ => 4,
        }
    }
}

impl Error {
    /// Short variant name, used to tabulate failures across replicates.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::ConvexHull => "convex-hull",
            Error::MaxIter(_) => "max-iter",
            Error::Feasibility => "feasibility",
            Error::Data(_) => "data",
            Error::Degenerate { .. } => "degenerate",
            Error::Optimizer(_) => "optimizer",
            Error::Singular(_) => "singular",
            Error::SparseNeighborhood(_) => "sparse-neighborhood",
            Error::Bootstrap { .. } => "bootstrap",
            Error::Parse { .. } => "parse",
            Error::Gap { .. } => "gap",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
