//! Interpretable dialogue constructiveness assessment.
//!
//! Per-utterance linguistic features (heuristic markers and language-model
//! annotations) are aggregated into dialogue-level mean and gradient
//! statistics, then fed to ridge or logistic regression evaluated with flat
//! k-fold cross-validation.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod annotation;
pub mod corpus;
pub mod evaluation;
pub mod lexical;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod registry;
pub mod synth;
