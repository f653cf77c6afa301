//! Error type shared by all modules.

/// Errors produced by model construction, fitting, and filtering.
///
/// Each variant belongs to one of three categories exposed through
/// [`Error::exit_code`]: configuration errors (2), data errors (3), and
/// numerical failures (4). The CLI maps these directly to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Least-squares normal matrix is rank deficient.
    #[error("singular fit: {0}; use a ridge penalty > 0 to regularize")]
    SingularFit(String),

    /// EKF innovation covariance could not be factorized.
    #[error("singular update: innovation covariance not positive definite ({0})")]
    SingularUpdate(String),

    /// Ensemble innovation covariance could not be factorized.
    #[error("singular innovation: ensemble innovation covariance not positive definite ({0})")]
    SingularInnovation(String),

    /// A mixture component covariance is not positive semi-definite.
    /// Callers may fall back to the Gaussian prior built from the same corpus.
    #[error("non-PSD prior: {0}")]
    NonPsdPrior(String),

    /// Every particle received zero likelihood.
    #[error("weight collapse: all particle likelihoods are zero (max log-likelihood {max_log_likelihood})")]
    WeightCollapse { max_log_likelihood: f64 },

    /// Sample covariance requested from fewer than two members.
    #[error("covariance undefined for an ensemble of {members} member(s); at least 2 required")]
    CovarianceUndefined { members: usize },

    /// Direct prior sampling asked for more members than demonstrations.
    #[error(
        "ensemble size {requested} exceeds the {available} available demonstration(s); \
         use the gmm prior mode or sampling with replacement"
    )]
    EnsembleSize { requested: usize, available: usize },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

impl Error {
    /// Process exit code category: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::EnsembleSize { .. } => 2,
            Error::Data(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::InsufficientData { .. } => 3,
            Error::SingularFit(_)
            | Error::SingularUpdate(_)
            | Error::SingularInnovation(_)
            | Error::NonPsdPrior(_)
            | Error::WeightCollapse { .. }
            | Error::CovarianceUndefined { .. } => 4,
        }
    }

    /// Stable machine-readable identifier for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::SingularFit(_) => "singular_fit",
            Error::SingularUpdate(_) => "singular_update",
            Error::SingularInnovation(_) => "singular_innovation",
            Error::NonPsdPrior(_) => "non_psd_prior",
            Error::WeightCollapse { .. } => "weight_collapse",
            Error::CovarianceUndefined { .. } => "covariance_undefined",
            Error::EnsembleSize { .. } => "ensemble_size",
            Error::InsufficientData { .. } => "insufficient_data",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
