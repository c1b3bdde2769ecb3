use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator is not self-adjoint (relative HS asymmetry {asymmetry:.3e} > {tol:.3e})")]
    NotSelfAdjoint { asymmetry: f64, tol: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("site {index} lies outside the sampling domain")]
    SiteOutsideDomain { index: usize },

    #[error("duplicate sites at indices {0} and {1}")]
    DuplicateSites(usize, usize),

    #[error("covariance matrix is not positive semi-definite after jitter")]
    NotPositiveDefinite,

    #[error("circulant embedding failed: minimum eigenvalue {min_eigenvalue:.3e} after {doublings} doublings")]
    EmbeddingFailed { min_eigenvalue: f64, doublings: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bandwidth {bandwidth} violates the support condition (limit {limit})")]
    BandwidthTooLarge { bandwidth: f64, limit: f64 },

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("singular Gram matrix: {0}")]
    SingularGram(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
