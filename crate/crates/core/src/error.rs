use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("mode mismatch: cannot combine binary and integer hypervectors")]
    ModeMismatch,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("cosine similarity is undefined for a zero-magnitude vector")]
    ZeroVector,

    #[error("invalid count: {0}")]
    InvalidCount(&'static str),

    #[error("quantization needs at least 2 levels, got {0}")]
    InvalidQuantization(usize),

    #[error("non-finite feature at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("level index {level} outside 1..={q}")]
    LevelOutOfRange { level: usize, q: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {label} out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{path}: row {row}, column {column}: cannot parse {value:?}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
    },

    #[error("{path}: row {row} is missing its label")]
    MissingLabel { path: PathBuf, row: usize },

    #[error("schema mismatch for {dataset}: {detail}")]
    SchemaMismatch { dataset: String, detail: String },

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("registry: {0}")]
    Registry(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
