use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series did not reach tail tolerance {tolerance:e} within {max_terms} terms")]
    NonTerminatingDivergence { max_terms: usize, tolerance: f64 },
    #[error("denominator parameter {param} vanishes at term {term}")]
    ZeroDenominatorParam { param: f64, term: usize },
    #[error("Bessel series diverged for order {order} at argument {arg}")]
    SeriesDivergence { order: f64, arg: f64 },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("point outside the domain: {0}")]
    DomainError(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("symbol `{0}` has no assigned operator")]
    UnassignedSymbol(String),
    #[error("the Heisenberg algebra has no Casimir element")]
    NoCasimir,
    #[error("check not applicable here: {0}")]
    NotApplicable(String),
    #[error("total {total} exceeds sector capacity {capacity}")]
    InfeasibleTotal { total: u32, capacity: u32 },
    #[error("sectors live on different graphs")]
    GraphMismatch,
    #[error("value {0} outside the support of the stationary law")]
    OutOfSupport(u32),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("step size underflow after {0} halvings")]
    StepSizeUnderflow(u32),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown check name `{0}`")]
    UnknownCheckName(String),
    #[error("parameter out of range: {0}")]
    BadParamRange(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
