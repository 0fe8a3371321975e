use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the command-line tool.
///
/// Variants split into two families: configuration problems (bad flags,
/// missing files, malformed templates) and data problems (corpus or model
/// contents that do not fit the declared schema). The CLI maps them to
/// exit codes 2 and 3 respectively, see [`Error::is_config`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("template error at column {column}: {message}")]
    Template { column: usize, message: String },

    #[error("rule syntax error: {0}")]
    RuleSyntax(String),

    #[error("line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("input is not valid UTF-8")]
    NotUtf8,

    #[error("current tags of task `{0}` are not initialized")]
    Uninitialized(String),

    #[error("unknown stream `{0}`")]
    UnknownStream(String),

    #[error("malformed tag `{0}`")]
    MalformedTag(String),

    #[error("invalid spans: {0}")]
    InvalidSpans(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("misaligned corpora: {0}")]
    Misaligned(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero probability in reference distribution for tag `{0}`")]
    ZeroReference(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    /// Whether this error stems from configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::MissingFile { .. }
                | Error::Config(_)
                | Error::Template { .. }
                | Error::Schema(_)
                | Error::InvalidArgument(_)
        )
    }

    pub(crate) fn corpus(line: usize, message: impl Into<String>) -> Self {
        Error::Corpus {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
