use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{request_key, AnnotationCache, CacheEntry};
use super::parse::{DisputeTacticsAnnotation, InfoStyleAnnotation, ParseError};
use super::provider::{complete_with_retry, Provider, ProviderError, RetryPolicy};
use super::{
    parse_response, AnnotationError, ParsedAnnotation, PromptRequest, PromptTemplates,
    RequestSettings, TemplateId,
};
use crate::corpus::Corpus;

/// Result of sending one request through cache, provider and parser.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub response: String,
    pub parsed: Result<ParsedAnnotation, ParseError>,
    pub from_cache: bool,
    pub network_calls: u32,
    pub reprompted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub requests: usize,
    pub cache_hits: usize,
    pub network_calls: usize,
    pub reprompts: usize,
    pub missing: usize,
    pub repaired: usize,
    pub truncated_histories: usize,
}

/// Which prompts to run. Information content and style share one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTasks {
    pub dispute_tactics: bool,
    pub qoa: bool,
    pub info_style: bool,
}

impl AnnotationTasks {
    pub fn all() -> Self {
        AnnotationTasks {
            dispute_tactics: true,
            qoa: true,
            info_style: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingAnnotation {
    pub dialogue_id: String,
    pub utterance_index: Option<usize>,
    pub template_id: TemplateId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DialogueAnnotations {
    /// One slot per utterance when annotated; `None` slots are missing.
    pub dispute_tactics: Option<Vec<Option<DisputeTacticsAnnotation>>>,
    pub info_style: Option<Vec<Option<InfoStyleAnnotation>>>,
    pub qoa: Option<Option<f64>>,
    /// Oldest utterances dropped from each dispute-tactics history.
    #[serde(default)]
    pub history_dropped: Vec<usize>,
}

/// Parsed annotations for a corpus, keyed by dialogue id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationStore {
    pub model_name: String,
    pub dialogues: BTreeMap<String, DialogueAnnotations>,
    pub missing: Vec<MissingAnnotation>,
}

impl AnnotationStore {
    pub fn get(&self, dialogue_id: &str) -> Option<&DialogueAnnotations> {
        self.dialogues.get(dialogue_id)
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotationError> {
        let body = serde_json::to_vec_pretty(self).expect("store serializes");
        std::fs::write(path, body).map_err(|source| AnnotationError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| AnnotationError::CacheFormat {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

pub struct Annotator<'a> {
    pub templates: &'a PromptTemplates,
    pub provider: &'a dyn Provider,
    pub cache: Option<&'a AnnotationCache>,
    pub retry: RetryPolicy,
    pub settings: RequestSettings,
    pub parallelism: usize,
}

impl Annotator<'_> {
    /// Cache lookup, then the provider. An unparseable response is re-sent
    /// once; the final outcome, success or not, is cached. Cached failures
    /// are returned without contacting the provider.
    pub fn run(&self, request: &PromptRequest) -> Result<Outcome, AnnotationError> {
        let key = request_key(request);
        if let Some(cache) = self.cache {
            if let Some(entry) = cache.get(&key)? {
                let parsed = match (entry.parsed, entry.parse_error) {
                    (Some(p), _) => Ok(p),
                    (None, Some(e)) => Err(e),
                    (None, None) => parse_response(request.template_id, &entry.response),
                };
                return Ok(Outcome {
                    response: entry.response,
                    parsed,
                    from_cache: true,
                    network_calls: 0,
                    reprompted: false,
                });
            }
        }
        let first = complete_with_retry(self.provider, request, &self.retry)?;
        let mut network_calls = first.attempts;
        let mut response = first.text;
        let mut parsed = parse_response(request.template_id, &response);
        let mut reprompted = false;
        if parsed.is_err() {
            tracing::info!(dialogue = %request.dialogue_id, "unparseable response, re-prompting once");
            let second = complete_with_retry(self.provider, request, &self.retry)?;
            network_calls += second.attempts;
            response = second.text;
            parsed = parse_response(request.template_id, &response);
            reprompted = true;
        }
        if let Some(cache) = self.cache {
            cache.put(&CacheEntry::new(request, response.clone(), parsed.clone()))?;
        }
        Ok(Outcome {
            response,
            parsed,
            from_cache: false,
            network_calls,
            reprompted,
        })
    }

    fn requests(
        &self,
        corpus: &Corpus,
        tasks: AnnotationTasks,
    ) -> Result<Vec<PromptRequest>, AnnotationError> {
        let mut out = Vec::new();
        for d in corpus.dialogues() {
            for i in 0..d.len() {
                if tasks.dispute_tactics {
                    out.push(self.templates.render_dispute(d, i, &self.settings)?);
                }
                if tasks.info_style {
                    out.push(self.templates.render_info_style(d, i, &self.settings)?);
                }
            }
            if tasks.qoa {
                out.push(self.templates.render_qoa(d, &self.settings)?);
            }
        }
        Ok(out)
    }

    /// Annotates every dialogue. Authentication failures and exhausted
    /// retries abort the run; content errors and unparseable responses are
    /// recorded as missing annotations.
    pub fn annotate_corpus(
        &self,
        corpus: &Corpus,
        tasks: AnnotationTasks,
    ) -> Result<(AnnotationStore, AnnotationStats), AnnotationError> {
        let requests = self.requests(corpus, tasks)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism.max(1))
            .build()
            .map_err(|e| AnnotationError::Internal(e.to_string()))?;
        let outcomes: Vec<Result<Outcome, AnnotationError>> =
            pool.install(|| requests.par_iter().map(|r| self.run(r)).collect());

        let mut store = AnnotationStore {
            model_name: self.settings.model_name.clone(),
            ..Default::default()
        };
        for d in corpus.dialogues() {
            let n = d.len();
            store.dialogues.insert(
                d.id.clone(),
                DialogueAnnotations {
                    dispute_tactics: tasks.dispute_tactics.then(|| vec![None; n]),
                    info_style: tasks.info_style.then(|| vec![None; n]),
                    qoa: tasks.qoa.then_some(None),
                    history_dropped: if tasks.dispute_tactics {
                        vec![0; n]
                    } else {
                        Vec::new()
                    },
                },
            );
        }
        let mut stats = AnnotationStats {
            requests: requests.len(),
            ..Default::default()
        };
        for (request, outcome) in requests.iter().zip(outcomes) {
            let entry = store
                .dialogues
                .get_mut(&request.dialogue_id)
                .expect("dialogue registered");
            if request.history_dropped > 0 {
                stats.truncated_histories += 1;
                if let Some(i) = request.utterance_index {
                    entry.history_dropped[i] = request.history_dropped;
                }
            }
            let parsed = match outcome {
                Ok(o) => {
                    stats.cache_hits += usize::from(o.from_cache);
                    stats.network_calls += o.network_calls as usize;
                    stats.reprompts += usize::from(o.reprompted);
                    o.parsed.map_err(|e| e.to_string())
                }
                Err(AnnotationError::Provider(ProviderError::Content(message))) => Err(message),
                Err(other) => return Err(other),
            };
            let parsed = match parsed {
                Ok(p) => p,
                Err(reason) => {
                    stats.missing += 1;
                    store.missing.push(MissingAnnotation {
                        dialogue_id: request.dialogue_id.clone(),
                        utterance_index: request.utterance_index,
                        template_id: request.template_id,
                        reason,
                    });
                    continue;
                }
            };
            match (parsed, request.utterance_index) {
                (ParsedAnnotation::DisputeTactics(a), Some(i)) => {
                    if let Some(slots) = entry.dispute_tactics.as_mut() {
                        slots[i] = Some(a);
                    }
                }
                (ParsedAnnotation::InfoStyle(a), Some(i)) => {
                    stats.repaired += usize::from(a.repaired);
                    if let Some(slots) = entry.info_style.as_mut() {
                        slots[i] = Some(a);
                    }
                }
                (ParsedAnnotation::Qoa(a), None) => entry.qoa = Some(Some(a.score)),
                (other, _) => {
                    return Err(AnnotationError::Internal(format!(
                        "unexpected annotation {other:?} for {}",
                        request.template_id.as_str()
                    )))
                }
            }
        }
        Ok((store, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::provider::MockProvider;
    use crate::corpus::{Dialogue, Target, TaskKind};
    use std::sync::atomic::{AtomicU32, Ordering};

    fn corpus() -> Corpus {
        let d = |id: &str| {
            Dialogue::new(
                id,
                "synthetic",
                None,
                [("a", "I think so."), ("b", "Why?"), ("a", "Because.")],
                Target::binary(true),
            )
            .unwrap()
        };
        Corpus::new(vec![d("x"), d("y")], TaskKind::Binary).unwrap()
    }

    struct Counting<P> {
        inner: P,
        calls: AtomicU32,
    }

    impl<P: Provider> Provider for Counting<P> {
        fn complete(&self, r: &PromptRequest) -> Result<String, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.complete(r)
        }
    }

    struct Garbage;

    impl Provider for Garbage {
        fn complete(&self, _: &PromptRequest) -> Result<String, ProviderError> {
            Ok("no idea".into())
        }
    }

    #[test]
    fn second_run_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = AnnotationCache::open(dir.path()).unwrap();
        let templates = PromptTemplates::builtin();
        let provider = Counting {
            inner: MockProvider::new(1),
            calls: AtomicU32::new(0),
        };
        let annotator = Annotator {
            templates: &templates,
            provider: &provider,
            cache: Some(&cache),
            retry: RetryPolicy::no_wait(0),
            settings: RequestSettings::default(),
            parallelism: 2,
        };
        let (store, stats) = annotator
            .annotate_corpus(&corpus(), AnnotationTasks::all())
            .unwrap();
        // Both dialogues render identical prompts, so half the requests
        // may hit entries written moments earlier by the other dialogue.
        assert_eq!(stats.requests, 14);
        assert!(store.missing.is_empty());
        let first_calls = provider.calls.load(Ordering::SeqCst);
        assert!(first_calls >= 7);

        let (again, stats) = annotator
            .annotate_corpus(&corpus(), AnnotationTasks::all())
            .unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), first_calls);
        assert_eq!(stats.cache_hits, 14);
        assert_eq!(again, store);
        let x = store.get("x").unwrap();
        assert!(x.qoa.unwrap().is_some());
        assert_eq!(x.dispute_tactics.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn unparseable_is_reprompted_once_then_missing() {
        let dir = tempfile::tempdir().unwrap();
        let cache = AnnotationCache::open(dir.path()).unwrap();
        let templates = PromptTemplates::builtin();
        let provider = Counting {
            inner: Garbage,
            calls: AtomicU32::new(0),
        };
        let annotator = Annotator {
            templates: &templates,
            provider: &provider,
            cache: Some(&cache),
            retry: RetryPolicy::no_wait(0),
            settings: RequestSettings::default(),
            parallelism: 1,
        };
        let c = Corpus::new(vec![corpus().dialogues()[0].clone()], TaskKind::Binary).unwrap();
        let tasks = AnnotationTasks {
            dispute_tactics: false,
            qoa: true,
            info_style: false,
        };
        let (store, stats) = annotator.annotate_corpus(&c, tasks).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 2);
        assert_eq!(stats.reprompts, 1);
        assert_eq!(store.missing.len(), 1);
        assert_eq!(store.get("x").unwrap().qoa, Some(None));

        annotator.annotate_corpus(&c, tasks).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn store_round_trips() {
        let templates = PromptTemplates::builtin();
        let provider = MockProvider::new(0);
        let annotator = Annotator {
            templates: &templates,
            provider: &provider,
            cache: None,
            retry: RetryPolicy::no_wait(0),
            settings: RequestSettings::default(),
            parallelism: 1,
        };
        let (store, _) = annotator
            .annotate_corpus(&corpus(), AnnotationTasks::all())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        store.save(&path).unwrap();
        assert_eq!(AnnotationStore::load(&path).unwrap(), store);
    }
}
