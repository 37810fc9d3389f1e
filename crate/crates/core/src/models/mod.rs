//! Linear models, flat cross-validation and text baselines.
//!
//! Ridge regression and L2-regularized logistic regression are fitted by
//! deterministic closed-form or Newton solvers on optionally standardized
//! inputs. [`grid_search_flat_cv`] selects a hyperparameter by mean held-out
//! score; [`baselines`] supplies bag-of-words, embedding, topic and prompted
//! predictors that plug into the same fold machinery.

pub mod baselines;
mod cv;
mod linalg;
mod linear;

pub use cv::{
    fit_fold, grid_search_flat_cv, Candidate, CvResult, DenseDesign, FitSettings, FoldData,
    FoldDesign, MatrixDesign,
};
pub use linear::{
    constant_baseline, fit_logistic, fit_model, fit_ridge, logistic_gradient, logistic_objective,
    FitDiagnostics, FittedLinearModel, Hyperparams, ModelKind, Standardization,
    LOGISTIC_MAX_ITERATIONS, LOGISTIC_TOLERANCE, MODEL_FORMAT_VERSION,
};

use crate::annotation::AnnotationError;
use crate::metrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("non-finite value in inputs or targets")]
    NonFinite,
    #[error("{rows} rows but {targets} targets")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("too few training rows ({0})")]
    TooFewRows(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("linear system is singular")]
    Singular,
    #[error("classification targets must be 0 or 1")]
    NotBinary,
    #[error("training targets contain a single class")]
    SingleClass,
    #[error(
        "optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NotConverged { iterations: usize, grad_norm: f64 },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,
    #[error("embedding file: {0}")]
    Embedding(String),
    #[error("unparseable prompt-baseline response for {dialogue_id}: {response:?}")]
    NshotUnparseable {
        dialogue_id: String,
        response: String,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file format: {0}")]
    Format(String),
}
