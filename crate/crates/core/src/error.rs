use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate rotation block at frame {frame}, joint {joint}")]
    DegenerateRotation { frame: usize, joint: usize },
    #[error("augmentation requires absolute-orientation layout")]
    AugmentRequiresAbsolute,
    #[error("degenerate torso at frame {0}: shoulders collinear with neck")]
    DegenerateTorso(usize),
    #[error("text is empty")]
    EmptyText,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("covariance product is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
