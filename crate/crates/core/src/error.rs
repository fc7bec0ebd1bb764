use thiserror::Error;

use crate::month::Month;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("relative representation not computable for group {group_id}: {reason}")]
    NotComputable { group_id: String, reason: String },

    #[error("malformed record at line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("invalid month string {0:?}, expected YYYY-MM")]
    InvalidMonth(String),

    #[error("series too short: length {len} requires more than {min} points")]
    SeriesTooShort { len: usize, min: usize },

    #[error("no breakpoints: trend is undefined without at least one extremum")]
    NoBreakpoints,

    #[error("month {0} is outside the labeled range")]
    UnlabeledMonth(Month),

    #[error("corpus produced an empty vocabulary")]
    EmptyVocabulary,

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("class {label} has only {count} examples, need at least {needed}")]
    ClassTooSmall {
        label: u8,
        count: usize,
        needed: usize,
    },

    #[error("fold contains a single class; use fewer folds or more data")]
    DegenerateFold,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: model expects {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vocab_size {requested} too small, need at least {minimum}")]
    VocabTooSmall { requested: usize, minimum: usize },

    #[error("token id {id} out of range for vocab size {vocab_size}")]
    TokenIdOutOfRange { id: usize, vocab_size: usize },

    #[error("{count} tokens exceed the exact-mode limit of {limit}; use sampled mode")]
    TooManyTokens { count: usize, limit: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("bad model file: {0}")]
    BadModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
