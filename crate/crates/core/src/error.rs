use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("link endpoint `{0}` is not a declared entity")]
    DanglingLink(String),

    #[error("vocabulary target size {target} is below the {required} required pieces")]
    TargetTooSmall { target: usize, required: usize },

    #[error("annotations [{a_start},{a_end}) and [{b_start},{b_end}) overlap without nesting")]
    OverlapUnresolved {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },

    #[error("empty training corpus")]
    EmptyCorpus,

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("no shared vocabulary between the embedding table and the encoder token table")]
    EmptyIntersection,

    #[error("singular design: Gram matrix of {fitted_on} shared items in {dim} dimensions is rank-deficient")]
    SingularDesign { fitted_on: usize, dim: usize },

    #[error("no embedding for entity `{0}`")]
    MissingEmbedding(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, example {example}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        example: usize,
        detail: String,
    },

    #[error("unknown document `{0}`")]
    UnknownDoc(String),

    #[error("no text for candidate document `{0}`")]
    MissingDocText(String),

    #[error("paired samples need equal lengths of at least 2 (got {a} and {b})")]
    LengthMismatch { a: usize, b: usize },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
