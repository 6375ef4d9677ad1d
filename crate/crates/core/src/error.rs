use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("string of length {len} exceeds the 128-bit limit")]
    TooLong { len: usize },

    #[error("depth deficit: need depth {needed}, got {got}")]
    DepthDeficit { needed: usize, got: usize },

    #[error("stage {stage} out of range ({stages} stages)")]
    StageOutOfRange { stage: usize, stages: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("code is not frozen")]
    NotFrozen,

    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("request bound violated at p={p}, n={n}: {count} distinct outputs > 2^{n}")]
    RequestBound { p: u64, n: usize, count: usize },

    /// The answer is not decidable from the data at hand (e.g. a prefix too
    /// short to certify escape from a cylinder).
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    /// Frozen data does not contain enough stages, rows or depth.
    #[error("insufficient frozen data: {0}")]
    Insufficient(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }

    pub fn insufficient(msg: impl Into<String>) -> Self {
        Error::Insufficient(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Insufficient(_) | Error::Inconclusive(_) => 3,
            _ => 2,
        }
    }
}
