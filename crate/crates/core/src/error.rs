use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation in field `{field}`: {message}")]
    SchemaViolation { field: String, message: String },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("patient {patient_id} has {available} rows, {needed} required")]
    InsufficientRows {
        patient_id: u32,
        needed: usize,
        available: usize,
    },

    #[error("row has {got} columns, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing header")]
    MissingHeader,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid counterfactual constraints: {0}")]
    Constraint(String),

    #[error("counterfactual grid has {size} combinations, cap is {cap}")]
    GridTooLarge { size: u128, cap: u128 },

    #[error("no counterfactual")]
    NoCounterfactual,

    #[error("dataset rows carry no ground-truth MAT values")]
    MissingMat,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::SchemaViolation {
            field: field.into(),
            message: message.into(),
        }
    }
}
