use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::ParseError;
use super::{AnnotationError, ParsedAnnotation, PromptRequest, TemplateId};

/// Content hash of the fields that determine a model response.
pub fn cache_key(
    template_id: TemplateId,
    rendered_text: &str,
    model_name: &str,
    temperature: f64,
) -> String {
    let canonical = serde_json::to_string(&(template_id, rendered_text, model_name, temperature))
        .expect("tuple of plain values serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn request_key(req: &PromptRequest) -> String {
    cache_key(
        req.template_id,
        &req.rendered_text,
        &req.model_name,
        req.temperature,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub template_id: TemplateId,
    pub rendered_text: String,
    pub dialogue_id: String,
    pub utterance_index: Option<usize>,
    pub model_name: String,
    pub temperature: f64,
    pub response: String,
    /// `None` when the response stayed unparseable after the re-prompt.
    pub parsed: Option<ParsedAnnotation>,
    pub parse_error: Option<ParseError>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

impl CacheEntry {
    pub fn new(
        req: &PromptRequest,
        response: String,
        parsed: Result<ParsedAnnotation, ParseError>,
    ) -> Self {
        let (parsed, parse_error) = match parsed {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e)),
        };
        CacheEntry {
            key: request_key(req),
            template_id: req.template_id,
            rendered_text: req.rendered_text.clone(),
            dialogue_id: req.dialogue_id.clone(),
            utterance_index: req.utterance_index,
            model_name: req.model_name.clone(),
            temperature: req.temperature,
            response,
            parsed,
            parse_error,
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Directory of `<key>.json` files. Writes go to a unique temporary file
/// that is renamed into place, so readers never see a partial entry and
/// concurrent writers of one key leave exactly one complete file.
#[derive(Debug)]
pub struct AnnotationCache {
    dir: PathBuf,
    counter: AtomicU64,
}

impl AnnotationCache {
    pub fn open(dir: &Path) -> Result<Self, AnnotationError> {
        std::fs::create_dir_all(dir).map_err(|source| AnnotationError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(AnnotationCache {
            dir: dir.to_path_buf(),
            counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, AnnotationError> {
        let path = self.path(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => {
                return Err(AnnotationError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let entry: CacheEntry =
            serde_json::from_str(&text).map_err(|e| AnnotationError::CacheFormat {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(Some(entry))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), AnnotationError> {
        let path = self.path(&entry.key);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            entry.key,
            std::process::id(),
            self.counter.fetch_add(1, Ordering::Relaxed)
        ));
        let io_err = |source| AnnotationError::Io {
            path: path.display().to_string(),
            source,
        };
        let body = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        std::fs::write(&tmp, body).map_err(io_err)?;
        std::fs::rename(&tmp, &path).map_err(io_err)
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|it| {
                it.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::parse::QoaAnnotation;

    fn request() -> PromptRequest {
        PromptRequest {
            template_id: TemplateId::Qoa,
            rendered_text: "dialogue".into(),
            dialogue_id: "d1".into(),
            utterance_index: None,
            model_name: "m".into(),
            temperature: 0.0,
            history_dropped: 0,
        }
    }

    #[test]
    fn key_ignores_dialogue_identity() {
        let a = request();
        let mut b = request();
        b.dialogue_id = "other".into();
        assert_eq!(request_key(&a), request_key(&b));
        b.temperature = 0.5;
        assert_ne!(request_key(&a), request_key(&b));
        assert_eq!(request_key(&a).len(), 64);
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = AnnotationCache::open(dir.path()).unwrap();
        let req = request();
        assert!(cache.get(&request_key(&req)).unwrap().is_none());
        let parsed = ParsedAnnotation::Qoa(QoaAnnotation {
            score: 4.0,
            raw_response: "r".into(),
        });
        let entry = CacheEntry::new(&req, "r".into(), Ok(parsed));
        cache.put(&entry).unwrap();
        assert_eq!(cache.get(&entry.key).unwrap().unwrap(), entry);
        assert_eq!(cache.len(), 1);
        cache.put(&entry).unwrap();
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn corrupt_entry_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = AnnotationCache::open(dir.path()).unwrap();
        std::fs::write(dir.path().join("abc.json"), "{").unwrap();
        assert!(matches!(
            cache.get("abc"),
            Err(AnnotationError::CacheFormat { .. })
        ));
    }
}
