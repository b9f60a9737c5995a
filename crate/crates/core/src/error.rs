use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("site {site} out of range for lattice with {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("alphabet mismatch: {0}")]
    Alphabet(String),
    #[error("support of {support} sites is too large for exhaustive enumeration (max {max})")]
    SupportTooLarge { support: usize, max: usize },
    #[error("state space of {states} configurations exceeds the dense limit {max}")]
    StateSpaceTooLarge { states: usize, max: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("map {0} is not additive")]
    NotAdditive(String),
    #[error("map {0} is not cancellative")]
    NotCancellative(String),
    #[error("no dual available for map {0}")]
    NoDual(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("value {x} outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("window too small: {0}")]
    Window(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
