//! Language-model annotation: prompt rendering, provider calls, response
//! parsing, a content-addressed response cache and annotation audits.
//!
//! Three prompts produce four feature sets. Dispute tactics and the
//! information-content/style prompt run once per utterance; the
//! quality-of-arguments prompt runs once per dialogue.

mod audit;
mod cache;
mod parse;
mod provider;
mod runner;
mod templates;

pub use audit::{
    audit_agreement, audit_qoa_pairs, audit_sample, read_audit_sheet, write_audit_sheet, Agreement,
    AuditReport, AuditRow, QOA_PAIR_FEATURE,
};
pub use cache::{cache_key, request_key, AnnotationCache, CacheEntry};
pub use parse::{
    parse_dispute_tactics, parse_info_style, parse_number, parse_qoa, DisputeTacticsAnnotation,
    InfoStyleAnnotation, LowHigh, ParseError, ParseErrorKind, QoaAnnotation, Sentiment,
    Uncertainty, COORDINATION_FLAGS, DISPUTE_FEATURES, INFO_STYLE_FLAGS, REBUTTAL_FLAGS,
};
pub use provider::{
    build_provider, complete_with_retry, Completion, HttpProvider, MockProvider, MockStyle,
    Provider, ProviderConfig, ProviderError, ProviderKind, RetryPolicy,
};
pub use runner::{
    AnnotationStats, AnnotationStore, AnnotationTasks, Annotator, DialogueAnnotations,
    MissingAnnotation, Outcome,
};
pub use templates::{
    render_utterances, PromptRequest, PromptTemplates, RequestSettings, TemplateId,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("dialogue {dialogue_id}: utterance index {index} out of range (length {len})")]
    UtteranceOutOfRange {
        dialogue_id: String,
        index: usize,
        len: usize,
    },
    #[error("dialogue {0} is empty")]
    EmptyDialogue(String),
    #[error("no contextualization sentence registered for dataset '{0}'")]
    UnknownDataset(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: malformed entry: {message}")]
    CacheFormat { path: String, message: String },
    #[error("audit: {0}")]
    Audit(String),
    #[error("audit sheet row {row} has no human label")]
    MissingHumanLabel { row: usize },
    #[error("audit sheet: {0}")]
    Csv(#[from] csv::Error),
    #[error("internal: {0}")]
    Internal(String),
}

/// A parsed response of any template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedAnnotation {
    DisputeTactics(DisputeTacticsAnnotation),
    Qoa(QoaAnnotation),
    InfoStyle(InfoStyleAnnotation),
    Number(f64),
}

/// Dispatches to the parser of `template_id`.
pub fn parse_response(
    template_id: TemplateId,
    response: &str,
) -> Result<ParsedAnnotation, ParseError> {
    Ok(match template_id {
        TemplateId::DisputeTactics => {
            ParsedAnnotation::DisputeTactics(parse_dispute_tactics(response)?)
        }
        TemplateId::Qoa => ParsedAnnotation::Qoa(parse_qoa(response)?),
        TemplateId::InfoStyle => ParsedAnnotation::InfoStyle(parse_info_style(response)?),
        TemplateId::NshotOum | TemplateId::NshotWikitactics | TemplateId::NshotAfd => {
            ParsedAnnotation::Number(parse_number(response)?)
        }
    })
}
