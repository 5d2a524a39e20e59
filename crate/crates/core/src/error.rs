use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient rows: requested {requested}, available {available}")]
    InsufficientRows { requested: usize, available: usize },

    #[error(
        "{features} features exceed the exact enumeration limit of {limit}; \
         use the permutation sampler instead"
    )]
    TooManyFeatures { features: usize, limit: usize },

    #[error("score undefined: {0}")]
    Undefined(&'static str),

    #[error("no associated users: every session failed the RSRP, RSRQ or mobility checks")]
    EmptyCohort,

    #[error("dataset has no train/test split; run train_test_split first")]
    MissingSplit,

    #[error("reference run `{0}` not found")]
    MissingReference(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}
