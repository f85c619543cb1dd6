use thiserror::Error;

/// Errors raised by the spectral, quadrature and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("spectral density is singular at |lambda| = {at}; integrate instead of evaluating")]
    SingularPoint { at: f64 },

    #[error("quadrature failed for {context}: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureFailure {
        context: &'static str,
        estimate: f64,
        tolerance: f64,
    },

    #[error("unsupported Bessel order {0}")]
    UnsupportedOrder(f64),

    #[error("unsupported dimension n = {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),

    #[error("spectral mass is not finite: {0}")]
    MassNotFinite(String),

    #[error("weight profile is not integrable: {0}")]
    NotIntegrable(String),

    #[error("quadrature resolution too coarse: {nodes_per_wavelength:.3} nodes per shortest wavelength, at least {required} required")]
    ResolutionTooCoarse {
        nodes_per_wavelength: f64,
        required: f64,
    },

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("limit integral diverges: {0}")]
    DivergentLimitIntegral(String),

    #[error("covariance matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::QuadratureFailure { .. }
                | Error::MassNotFinite(_)
                | Error::NotPositiveDefinite { .. }
                | Error::DivergentLimitIntegral(_)
                | Error::ResolutionTooCoarse { .. }
                | Error::SingularPoint { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
