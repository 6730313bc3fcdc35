use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: unknown opposition `{label}`")]
    UnknownOpposition { line: u64, label: String },
    #[error("dataset contains no innings")]
    Empty,
    #[error("invalid dataset layout: {0}")]
    Layout(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("record {0} does not resolve against the parameter dimensions")]
    Index(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum GmrfError {
    #[error("precision must have at least one row")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error("non-finite log-likelihood at initialization")]
    NonFiniteInit,
    #[error("checkpoint does not match this run: {0}")]
    CheckpointMismatch(String),
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("chain contains no draws")]
    EmptyChain,
    #[error("at least two players are needed to rank")]
    TooFewPlayers,
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("invalid score bins: {0}")]
    Bins(String),
    #[error("chain does not match dataset: {0}")]
    Mismatch(String),
}

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}
