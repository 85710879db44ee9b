use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("CC^T is singular for this layout and order; add a Tikhonov regularization term")]
    SingularGram,

    #[error("no mesh triangle contains the source direction")]
    NoContainingTriangle,

    #[error("detail filters (B/Q) are missing for level {0}")]
    MissingDetailFilters(usize),

    #[error("level {level} out of range (available 0..={max})")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("overlapping parameter groups: {0}")]
    OverlappingGroups(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularGram
                | Error::NoContainingTriangle
                | Error::RankDeficient(_)
                | Error::NonFinite(_)
                | Error::Infeasible(_)
        )
    }
}
