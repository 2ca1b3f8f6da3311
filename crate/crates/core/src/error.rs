use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the
/// individual modules; operations return only the variants they document.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("vertex out of range: {0}")]
    VertexOutOfRange(u16),
    #[error("loop index not allowed in a loopless space")]
    LoopNotAllowed,
    #[error("operands live in different spaces")]
    SpaceMismatch,
    #[error("position {0} out of range for this space")]
    PositionOutOfRange(u32),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("unsupported order d={0} for this method")]
    UnsupportedOrder(u32),
    #[error("unsupported exponent (must be 1, 2, 4, or inf)")]
    UnsupportedExponent,
    #[error("graph spans more than {0} vertices")]
    TooManyVertices(u16),
    #[error("coefficient for a set of size {size} has denominator exponent {exp}, above the bound")]
    MalformedCoefficient { size: usize, exp: u32 },
    #[error("input must be nonempty")]
    EmptyInput,
    #[error("monomial uses indices outside the embedding wildcards")]
    OutsideWildcards,
    #[error("coefficients are not canonical in the given vertex set")]
    NotCanonical,
    #[error("wildcard block size {got} does not match the required {want}")]
    WrongBlockSize { got: usize, want: usize },
    #[error("embedding wildcards are not successive blocks")]
    NotBlock,
    #[error("not enough room: need {need} vertices, have {have}")]
    InsufficientRoom { need: usize, have: usize },
    #[error("no canonical vertex set of size {0} found")]
    CanonicalSetNotFound(usize),
    #[error("recursion budget exceeded")]
    RecursionBudgetExceeded,
    #[error("input family is not a code: violating pair at positions {0} and {1}")]
    NotACode(u64, u64),
    #[error("forbidden family violates the parity hypothesis (loopless, even edge count)")]
    ParityViolation,
    #[error("no monochromatic vertex set of the requested size exists")]
    NoMonochromaticSet,
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("word is not symmetric")]
    NotSymmetric,
    #[error("monotonicity violated between n={0} and n={1}")]
    MonotonicityViolated(u16, u16),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
