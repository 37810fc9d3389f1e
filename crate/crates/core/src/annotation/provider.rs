use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::parse::{
    DisputeTacticsAnnotation, InfoStyleAnnotation, LowHigh, Sentiment, Uncertainty,
};
use super::{PromptRequest, TemplateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("authentication rejected (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider reported a content error: {0}")]
    Content(String),
    #[error("giving up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("provider configuration: {0}")]
    Config(String),
}

/// A chat-completion backend: one prompt in, response text out.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    OpenaiCompatible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub parallelism: usize,
    pub max_history_chars: Option<usize>,
    pub mock_style: MockStyle,
    pub mock_seed: u64,
}

/// What the offline provider answers with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockStyle {
    /// One canned response per template.
    #[default]
    Fixture,
    /// Values drawn from a generator seeded by the prompt hash.
    Random,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            base_url: "https://api.openai.com/v1".into(),
            model: "mock".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: 0.0,
            timeout_secs: 120,
            max_retries: 5,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            parallelism: 4,
            max_history_chars: None,
            mock_style: MockStyle::Fixture,
            mock_seed: 0,
        }
    }
}

impl ProviderConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            initial_backoff: Duration::from_millis(self.initial_backoff_ms),
            max_backoff: Duration::from_millis(self.max_backoff_ms),
        }
    }
}

pub fn build_provider(config: &ProviderConfig) -> Result<Box<dyn Provider>, ProviderError> {
    match config.kind {
        ProviderKind::Mock => Ok(Box::new(match config.mock_style {
            MockStyle::Fixture => MockProvider::fixture(),
            MockStyle::Random => MockProvider::new(config.mock_seed),
        })),
        ProviderKind::OpenaiCompatible => {
            let key = std::env::var(&config.api_key_env).map_err(|_| {
                ProviderError::Config(format!(
                    "environment variable {} is not set",
                    config.api_key_env
                ))
            })?;
            Ok(Box::new(HttpProvider::new(
                &config.base_url,
                &key,
                Duration::from_secs(config.timeout_secs),
            )?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl RetryPolicy {
    pub fn no_wait(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            initial_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.min(20));
        self.initial_backoff
            .saturating_mul(factor)
            .min(self.max_backoff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

/// Retries transient failures with exponential backoff. Authentication,
/// content and configuration errors are returned at once.
pub fn complete_with_retry(
    provider: &dyn Provider,
    request: &PromptRequest,
    policy: &RetryPolicy,
) -> Result<Completion, ProviderError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match provider.complete(request) {
            Ok(text) => return Ok(Completion { text, attempts }),
            Err(ProviderError::Transient(message)) => {
                if attempts > policy.max_retries {
                    return Err(ProviderError::Exhausted {
                        attempts,
                        last: message,
                    });
                }
                let wait = policy.backoff(attempts - 1);
                tracing::warn!(
                    dialogue = %request.dialogue_id,
                    attempt = attempts,
                    wait_ms = wait.as_millis() as u64,
                    "retrying after transient failure: {message}"
                );
                thread::sleep(wait);
            }
            Err(other) => return Err(other),
        }
    }
}

/// OpenAI-compatible `POST {base_url}/chat/completions`.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl HttpProvider {
    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(HttpProvider {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.to_string(),
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl Provider for HttpProvider {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": request.model_name,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.rendered_text}],
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transient(format!("request failed: {e}")))?;
        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| ProviderError::Transient(format!("reading body: {e}")))?;
        match status {
            200..=299 => {}
            401 | 403 => {
                return Err(ProviderError::Auth {
                    status,
                    message: text,
                })
            }
            408 | 409 | 429 | 500..=599 => {
                return Err(ProviderError::Transient(format!("HTTP {status}: {text}")))
            }
            _ => return Err(ProviderError::Content(format!("HTTP {status}: {text}"))),
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Content(format!("malformed response body: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Content("response has no choices".into()))?;
        if choice.finish_reason.as_deref() == Some("content_filter") {
            return Err(ProviderError::Content(
                "response blocked by content filter".into(),
            ));
        }
        choice
            .message
            .content
            .ok_or_else(|| ProviderError::Content("response has no content".into()))
    }
}

/// Deterministic offline provider returning well-formed responses, either
/// canned or drawn from a generator seeded by a hash of the prompt.
#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    style: MockStyle,
}

impl MockProvider {
    /// Random-valued responses.
    pub fn new(seed: u64) -> Self {
        MockProvider {
            seed,
            style: MockStyle::Random,
        }
    }

    pub fn fixture() -> Self {
        MockProvider {
            seed: 0,
            style: MockStyle::Fixture,
        }
    }

    fn rng(&self, request: &PromptRequest) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(request.template_id.as_str());
        hasher.update(&request.rendered_text);
        let digest = hasher.finalize();
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(bytes)
    }
}

fn fixture_response(template: TemplateId) -> String {
    let low = LowHigh { low: 1, high: 0 };
    match template {
        TemplateId::DisputeTactics => DisputeTacticsAnnotation {
            levels: [0; 9],
            labels: [0; 9],
        }
        .to_response_text(),
        TemplateId::InfoStyle => InfoStyleAnnotation {
            frazier: low,
            yngve: low,
            p_density: low,
            c_density: low,
            formality: low,
            politeness: low,
            sentiment: Sentiment {
                negative: 0,
                neutral: 1,
                positive: 0,
            },
            uncertainty: Uncertainty {
                epistemic: 0,
                doxastic: 0,
                investigative: 0,
                conditional: 0,
                none: 1,
            },
            repaired: false,
        }
        .to_response_text(),
        TemplateId::Qoa => "The participants exchange arguments.\n\
             Thus, the quality score of the discussion is: 5.0"
            .into(),
        TemplateId::NshotOum => "4.0".into(),
        TemplateId::NshotWikitactics | TemplateId::NshotAfd => "0.50".into(),
    }
}

fn pair(rng: &mut ChaCha8Rng) -> LowHigh {
    let high = u8::from(rng.random_bool(0.5));
    LowHigh {
        low: 1 - high,
        high,
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        if self.style == MockStyle::Fixture {
            return Ok(fixture_response(request.template_id));
        }
        let mut rng = self.rng(request);
        let text = match request.template_id {
            TemplateId::DisputeTactics => {
                let mut flag = |p: f64| u8::from(rng.random_bool(p));
                DisputeTacticsAnnotation {
                    levels: std::array::from_fn(|_| flag(0.15)),
                    labels: std::array::from_fn(|_| flag(0.15)),
                }
                .to_response_text()
            }
            TemplateId::InfoStyle => {
                let sentiment = rng.random_range(0..3);
                let types: [u8; 4] = std::array::from_fn(|_| u8::from(rng.random_bool(0.2)));
                InfoStyleAnnotation {
                    frazier: pair(&mut rng),
                    yngve: pair(&mut rng),
                    p_density: pair(&mut rng),
                    c_density: pair(&mut rng),
                    formality: pair(&mut rng),
                    politeness: pair(&mut rng),
                    sentiment: Sentiment {
                        negative: u8::from(sentiment == 0),
                        neutral: u8::from(sentiment == 1),
                        positive: u8::from(sentiment == 2),
                    },
                    uncertainty: Uncertainty {
                        epistemic: types[0],
                        doxastic: types[1],
                        investigative: types[2],
                        conditional: types[3],
                        none: u8::from(!types.contains(&1)),
                    },
                    repaired: false,
                }
                .to_response_text()
            }
            TemplateId::Qoa => {
                let score: f64 = rng.random_range(1.0..10.0);
                format!(
                    "The participants exchange arguments of varying relevance and support.\n\
                     Thus, the quality score of the discussion is: {score:.1}"
                )
            }
            TemplateId::NshotOum => format!("{:.1}", rng.random_range(1.0..7.0)),
            TemplateId::NshotWikitactics | TemplateId::NshotAfd => {
                format!("{:.2}", rng.random_range(0.0..1.0))
            }
        };
        Ok(text)
    }
}
