use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not invertible (smallest singular value {0:e})")]
    Singular(f64),
    #[error("no gap of index {k}: sigma ratio {ratio}")]
    NoGap { k: usize, ratio: f64 },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("wrong scalar field: {0}")]
    Field(&'static str),
    #[error("solver did not converge: {0}")]
    Convergence(&'static str),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("point outside the domain: {0}")]
    OutsideDomain(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("search budget exhausted: {0}")]
    Budget(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("torsion detected: {0}")]
    Torsion(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("enumeration refused: about {0} words exceeds the limit")]
    Overflow(u128),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable diagnostic code, used by the command line front-end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Input(_) => "E_INPUT",
            Error::Parse(_) => "E_PARSE",
            Error::Dimension { .. } => "E_DIM",
            Error::NonFinite(_) => "E_NONFINITE",
            Error::Singular(_) => "E_SINGULAR",
            Error::NoGap { .. } => "E_NOGAP",
            Error::Index(_) => "E_INDEX",
            Error::Field(_) => "E_FIELD",
            Error::Convergence(_) => "E_CONVERGE",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::OutsideDomain(_) => "E_DOMAIN",
            Error::Certification(_) => "E_CERT",
            Error::Budget(_) => "E_BUDGET",
            Error::InsufficientData(_) => "E_DATA",
            Error::Torsion(_) => "E_TORSION",
            Error::Precondition(_) => "E_PRECONDITION",
            Error::Overflow(_) => "E_OVERFLOW",
            Error::Io(_) => "E_IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
