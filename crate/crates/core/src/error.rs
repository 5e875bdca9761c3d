use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document is empty after trimming")]
    EmptyDocument,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("token id {0} is not in the vocabulary")]
    UnknownToken(u32),

    #[error("config: {0}")]
    Config(String),

    #[error("training: {0}")]
    Training(String),

    #[error("instance too large for enumeration: {0} candidate assignments")]
    InstanceTooLarge(u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
