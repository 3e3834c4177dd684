use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no lattice site qualifies at eps = {eps}")]
    EmptyLattice { eps: f64 },

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty window for {name}: ({lo}, {hi})")]
    EmptyWindow {
        name: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("{name} = {value} lies outside the legal interval ({lo}, {hi})")]
    OutsideWindow {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("lattice mismatch: expected {expected} sites, found {found}")]
    LatticeMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix of dimension {dim} exceeds the dense limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error(
        "eigensolver did not converge after {iterations} iterations (best residuals {residuals:?})"
    )]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("eigenvalue {k} is not simple (delta = {delta})")]
    DegenerateEigenvalue { k: usize, delta: f64 },

    #[error("eigenvalue {k} becomes degenerate along the path at xi = {at}")]
    DegeneracyOnPath { k: usize, at: f64 },

    #[error("input vectors are not orthonormal (max Gram deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("index {k} out of range (available: {available})")]
    IndexOutOfRange { k: usize, available: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missing records: {0}")]
    MissingRecords(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyLattice { .. } => "empty-lattice",
            Error::UnsupportedDomain(_) => "unsupported-domain",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::EmptyWindow { .. } => "empty-window",
            Error::OutsideWindow { .. } => "outside-window",
            Error::LatticeMismatch { .. } => "lattice-mismatch",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::TooLarge { .. } => "too-large",
            Error::NoConvergence { .. } => "no-convergence",
            Error::DegenerateEigenvalue { .. } => "degenerate-eigenvalue",
            Error::DegeneracyOnPath { .. } => "degeneracy-on-path",
            Error::NotOrthonormal { .. } => "not-orthonormal",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::Degenerate(_) => "degenerate",
            Error::MissingRecords(_) => "missing-records",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
            Error::Csv(_) => "csv",
        }
    }
}
