use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("need at least 2 tokens, got {0}")]
    TooFewTokens(usize),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("cannot reduce {r} tokens out of {available} matchable (max {max})")]
    ReductionTooLarge { r: usize, available: usize, max: usize },
    #[error("importance scores required but not supplied")]
    MissingImportance,
    #[error("key embeddings required for this matcher")]
    KeysRequired,
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("informative initialization requires a reference vector")]
    MissingReference,
    #[error("instance too large for exhaustive search (n={n}, r={r}; limits n<=12, r<=4)")]
    InstanceTooLarge { n: usize, r: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("index {index} out of range for {n} tokens")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid match plan: {0}")]
    InvalidPlan(String),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported flag bits {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
