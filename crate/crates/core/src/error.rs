use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyCorpus,
    /// Authors with fewer documents than the split minimum.
    TooFewDocuments {
        authors: alloc::vec::Vec<(String, usize)>,
        minimum: usize,
    },
    BlankDocument {
        author_id: String,
        doc_index: usize,
    },
    DuplicateDocument {
        author_id: String,
        doc_index: usize,
    },
    InvalidSessionSpec(String),
    /// A session ratio selects zero authors (or more authors than remain).
    EmptySession {
        session: usize,
        ratio: f64,
    },
    EmptyTestSplit {
        author_id: String,
        documents: usize,
    },
    SessionOutOfRange {
        index: usize,
        sessions: usize,
    },
    DisjointnessViolated(String),
    InvalidIids(String),
    InvalidFeaturizerConfig(String),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    HeadOutOfRange {
        head: usize,
        heads: usize,
    },
    LabelOutOfRange {
        label: usize,
        start: usize,
        end: usize,
    },
    InvalidTrainConfig(String),
    InvalidStrategyConfig(String),
    NonFiniteGradient {
        index: usize,
        value: f64,
    },
    NonFiniteLoss(f64),
    NonFiniteParameter {
        index: usize,
    },
    MissingSnapshot {
        session: usize,
    },
    ShapeMismatch {
        expected: usize,
        found: usize,
    },
    EmptyData,
    NotEnoughSessions {
        needed: usize,
        found: usize,
    },
    EmptyModel,
}

impl Error {
    /// True for failures caused by non-finite numbers during training.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteGradient { .. } | Error::NonFiniteLoss(_) | Error::NonFiniteParameter { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCorpus => write!(f, "empty corpus"),
            Error::TooFewDocuments { authors, minimum } => {
                write!(f, "authors below the minimum of {minimum} documents:")?;
                for (a, n) in authors {
                    write!(f, " {a} ({n})")?;
                }
                Ok(())
            }
            Error::BlankDocument {
                author_id,
                doc_index,
            } => write!(f, "document {doc_index} of author {author_id} is blank"),
            Error::DuplicateDocument {
                author_id,
                doc_index,
            } => write!(f, "duplicate document index {doc_index} for author {author_id}"),
            Error::InvalidSessionSpec(m) => write!(f, "invalid session spec: {m}"),
            Error::EmptySession { session, ratio } => {
                write!(f, "session {session} with ratio {ratio} selects no authors")
            }
            Error::EmptyTestSplit {
                author_id,
                documents,
            } => write!(
                f,
                "author {author_id} with {documents} documents would have an empty test split"
            ),
            Error::SessionOutOfRange { index, sessions } => {
                write!(f, "session index {index} out of range (have {sessions})")
            }
            Error::DisjointnessViolated(m) => write!(f, "disjointness violated: {m}"),
            Error::InvalidIids(m) => write!(f, "invalid incremental ids: {m}"),
            Error::InvalidFeaturizerConfig(m) => write!(f, "invalid featurizer config: {m}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::HeadOutOfRange { head, heads } => {
                write!(f, "head {head} out of range (model has {heads})")
            }
            Error::LabelOutOfRange { label, start, end } => {
                write!(f, "label {label} outside selected classes [{start}, {end})")
            }
            Error::InvalidTrainConfig(m) => write!(f, "invalid train config: {m}"),
            Error::InvalidStrategyConfig(m) => write!(f, "invalid strategy config: {m}"),
            Error::NonFiniteGradient { index, value } => {
                write!(f, "non-finite gradient {value} at parameter {index}")
            }
            Error::NonFiniteLoss(v) => write!(f, "non-finite loss {v}"),
            Error::NonFiniteParameter { index } => write!(f, "parameter {index} became non-finite"),
            Error::MissingSnapshot { session } => {
                write!(f, "session {session} requires a snapshot of the previous model")
            }
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected} parameters, found {found}")
            }
            Error::EmptyData => write!(f, "empty data"),
            Error::NotEnoughSessions { needed, found } => {
                write!(f, "need at least {needed} sessions, found {found}")
            }
            Error::EmptyModel => write!(f, "model has no heads"),
        }
    }
}

impl core::error::Error for Error {}
