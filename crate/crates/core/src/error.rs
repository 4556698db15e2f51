use thiserror::Error;

/// Errors reported by the conversation-topic pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document{}: {msg}", comment_context(.comment))]
    Parse { comment: Option<String>, msg: String },

    #[error("comment {comment} references unknown parent {parent}")]
    DanglingParent { comment: String, parent: String },

    #[error("invalid topic count K={k}: {msg}")]
    BadTopicCount { k: usize, msg: String },

    #[error("cycle detected in fragment quotation graph involving fragment {0}")]
    FqgCycle(usize),

    #[error("empty vocabulary: no non-stopword content tokens")]
    EmptyVocabulary,

    #[error("empty graph: {0}")]
    EmptyGraph(&'static str),

    #[error("segmentations cover different sentence universes ({a} vs {b} sentences)")]
    UniverseMismatch { a: usize, b: usize },

    #[error("candidate scores must sum to 1 (got {0})")]
    UnnormalizedScores(f64),

    #[error("training data is degenerate: {0}")]
    DegenerateTraining(&'static str),

    #[error("sentence id {0} out of range")]
    SentenceOutOfRange(usize),

    #[error("unknown {kind} name: {name}")]
    UnknownName { kind: &'static str, name: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn comment_context(comment: &Option<String>) -> String {
    match comment {
        Some(id) => format!(" in comment {id}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
