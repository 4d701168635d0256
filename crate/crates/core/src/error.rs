use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid universe: {0}")]
    InvalidUniverse(String),

    #[error("unknown alternative `{0}`")]
    UnknownAlternative(String),

    #[error("empty menu")]
    EmptyMenu,

    #[error("expected {expected} periods, found {found}")]
    PeriodMismatch { expected: usize, found: usize },

    #[error("negative probability at {0}")]
    NegativeProbability(String),

    #[error("probabilities for menus {menus} sum to 1 {deviation:+e}")]
    NormalizationFailure { menus: String, deviation: f64 },

    #[error("choice outside menu at {0}")]
    ChoiceOutsideMenu(String),

    #[error("menu sequence {0} listed more than once")]
    DuplicateObservation(String),

    #[error("marginality violated: {0}")]
    MarginalityViolated(String),

    #[error("domain incomplete: missing menu sequence {0}")]
    DomainIncomplete(String),

    #[error("negative edge capacity {value:e} on edge {edge}")]
    NegativeCapacity { edge: String, value: f64 },

    #[error("flow conservation violated at node {node} (imbalance {imbalance:e})")]
    ConservationViolated { node: String, imbalance: f64 },

    #[error("rule is not consistent with the consumption dependent model: {0}")]
    NotCdrum(String),

    #[error("universe of size {size} exceeds the materialization cap {cap}")]
    UniverseTooLarge { size: usize, cap: usize },

    #[error("solver stalled with first-order residual {0:e}")]
    SolverStalled(f64),

    #[error("positivity violated: {0}")]
    PositivityViolated(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
