use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown rater id `{0}`")]
    UnknownRater(String),

    #[error("unknown note id `{0}`")]
    UnknownNote(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing required column `{0}` in header")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("line {line}: duplicate {what}")]
    Duplicate { line: usize, what: String },

    #[error("rating references note `{0}` with no creation time")]
    MissingNote(String),

    #[error("training diverged at epoch {0}: loss is not finite")]
    Divergence(usize),

    #[error("pipeline failed at stage `{stage}`: {message}")]
    Pipeline {
        stage: &'static str,
        message: String,
    },

    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),

    #[error("control arm has zero interactions; relative difference undefined")]
    UndefinedRatio,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
