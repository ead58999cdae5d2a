use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) has non-positive weight {weight}")]
    NonPositiveWeight { u: usize, v: usize, weight: f64 },
    #[error("edge ({u}, {v}) has weight {weight} above one")]
    WeightAboveOne { u: usize, v: usize, weight: f64 },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeIdOutOfRange { id: usize, num_nodes: usize },
    #[error("edge ({u}, {v}) supplied with conflicting weights {first} and {second}")]
    ConflictingWeight {
        u: usize,
        v: usize,
        first: f64,
        second: f64,
    },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("class index {class} out of range for {num_classes} classes")]
    LabelOutOfRange { class: usize, num_classes: usize },

    #[error("adaptive integration did not reach t = {t_final} within {max_steps} steps (stopped at t = {reached})")]
    MaxStepsExceeded {
        t_final: f64,
        reached: f64,
        max_steps: usize,
    },
    #[error("non-finite state encountered at t = {0}")]
    NonFiniteState(f64),
    #[error("adaptive step size underflow at t = {0}")]
    StepSizeUnderflow(f64),
    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),
    #[error("connected component containing node {0} has no labeled node")]
    SingularSystem(usize),
    #[error("linear solve stalled after {iterations} iterations (residual {residual:e})")]
    LinearSolveStalled { iterations: usize, residual: f64 },

    #[error("edge parameter count {actual} does not match graph's {expected} undirected edges")]
    IndexMismatch { expected: usize, actual: usize },
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("node {0} is already labeled")]
    AlreadyLabeled(usize),
    #[error("checkpoint fingerprint {checkpoint} does not match graph fingerprint {graph}")]
    FingerprintMismatch { checkpoint: String, graph: String },
    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("bad magic in {path}: expected {expected}")]
    BadMagic { path: PathBuf, expected: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("truncated file {0}")]
    TruncatedFile(PathBuf),
    #[error("invalid k = {k} for {num_nodes} nodes")]
    InvalidK { k: usize, num_nodes: usize },
    #[error("invalid kernel width sigma = {0}")]
    InvalidSigma(f64),
    #[error("class {class} has {available} members, {required} required")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
