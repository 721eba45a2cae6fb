use thiserror::Error;

/// Every failure the library can report.
///
/// Variants fall into two families that the command line maps onto distinct
/// exit codes: configuration/domain problems (bad input) and numerical
/// failures (a computation that could not be completed as requested).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid stencil: {0}")]
    InvalidStencil(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("history does not cover t = {t} (available [{lo}, {hi}])")]
    Extrapolation { t: f64, lo: f64, hi: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("singular step: implicit coefficient {0:e} vanishes")]
    SingularStep(f64),

    #[error("incomplete root search: winding number {expected}, located {found}; {diagnostics}")]
    IncompleteRootSearch {
        expected: usize,
        found: usize,
        diagnostics: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("quadrature refused: {0}")]
    QuadratureRefused(String),

    #[error("critical point search failed: {0}")]
    SearchFailure(String),
}

impl Error {
    /// True for errors caused by invalid input rather than a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidStencil(_) | Error::Domain(_) | Error::Config(_) | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
