//! Dialogue data model, corpus ingestion and fold/topic splitting.
//!
//! A corpus file holds one JSON record per line:
//!
//! ```text
//! {"id":"d1","dataset":"oum","topic":"Brexit",
//!  "target":{"kind":"regression","value":3},
//!  "utterances":[{"speaker":"WoZ","text":"Hello!"}]}
//! ```
//!
//! Unknown fields are rejected. Parsing is all-or-nothing: the first invalid
//! record aborts the whole file and the error carries its 1-based line number.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound of the 7-point Likert regression scale.
pub const REGRESSION_MIN: f64 = 1.0;
/// Upper bound of the 7-point Likert regression scale.
pub const REGRESSION_MAX: f64 = 7.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate dialogue id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: target out of [1,7]: {value}")]
    TargetOutOfRange { line: usize, value: f64 },
    #[error("line {line}: binary target must be 0 or 1, got {value}")]
    InvalidBinaryTarget { line: usize, value: f64 },
    #[error("line {line}: target kind {found} does not match corpus task kind {expected}")]
    TaskKindMismatch {
        line: usize,
        expected: TaskKind,
        found: TaskKind,
    },
    #[error("line {line}: empty dialogue")]
    EmptyDialogue { line: usize },
    #[error("line {line}: utterance {index} has an empty {field}")]
    EmptyUtteranceField {
        line: usize,
        index: usize,
        field: &'static str,
    },
    #[error("k={k} is larger than the corpus ({n} dialogues)")]
    TooManyFolds { k: usize, n: usize },
    #[error("k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("class {class} has {count} dialogues, fewer than k={k}; cannot stratify")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("dialogue '{0}' has no topic")]
    MissingTopic(String),
    #[error("invalid dialogue '{id}': {message}")]
    InvalidDialogue { id: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether targets are Likert scores or binary outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Binary,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Regression => f.write_str("regression"),
            TaskKind::Binary => f.write_str("binary"),
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(TaskKind::Regression),
            "binary" => Ok(TaskKind::Binary),
            other => Err(format!("unknown task kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub kind: TaskKind,
    pub value: f64,
}

impl Target {
    pub fn regression(value: f64) -> Self {
        Target {
            kind: TaskKind::Regression,
            value,
        }
    }

    pub fn binary(positive: bool) -> Self {
        Target {
            kind: TaskKind::Binary,
            value: if positive { 1.0 } else { 0.0 },
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self.kind {
            TaskKind::Regression => {
                if !(REGRESSION_MIN..=REGRESSION_MAX).contains(&self.value) {
                    return Err(format!("target out of [1,7]: {}", self.value));
                }
            }
            TaskKind::Binary => {
                if self.value != 0.0 && self.value != 1.0 {
                    return Err(format!("binary target must be 0 or 1, got {}", self.value));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: String,
    /// 0-based position within the dialogue.
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub dataset_tag: String,
    pub topic: Option<String>,
    pub utterances: Vec<Utterance>,
    pub target: Target,
}

impl Dialogue {
    /// Builds a dialogue from `(speaker, text)` pairs, assigning indices in order.
    pub fn new<S, T>(
        id: impl Into<String>,
        dataset_tag: impl Into<String>,
        topic: Option<String>,
        turns: impl IntoIterator<Item = (S, T)>,
        target: Target,
    ) -> Result<Self, CorpusError>
    where
        S: Into<String>,
        T: Into<String>,
    {
        let dialogue = Dialogue {
            id: id.into(),
            dataset_tag: dataset_tag.into(),
            topic,
            utterances: turns
                .into_iter()
                .enumerate()
                .map(|(index, (speaker, text))| Utterance {
                    speaker_id: speaker.into(),
                    index,
                    text: text.into(),
                })
                .collect(),
            target,
        };
        dialogue
            .validate()
            .map_err(|message| CorpusError::InvalidDialogue {
                id: dialogue.id.clone(),
                message,
            })?;
        Ok(dialogue)
    }

    fn validate(&self) -> Result<(), String> {
        if self.utterances.is_empty() {
            return Err("empty dialogue".into());
        }
        for (i, u) in self.utterances.iter().enumerate() {
            if u.index != i {
                return Err(format!("utterance index {} at position {i}", u.index));
            }
            if u.speaker_id.trim().is_empty() {
                return Err(format!("utterance {i} has an empty speaker"));
            }
            if u.text.trim().is_empty() {
                return Err(format!("utterance {i} has an empty text"));
            }
        }
        self.target.validate()
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Distinct speakers ordered by first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for u in &self.utterances {
            if !seen.contains(&u.speaker_id.as_str()) {
                seen.push(u.speaker_id.as_str());
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dialogues: Vec<Dialogue>,
    task_kind: TaskKind,
}

impl Corpus {
    /// Validates the corpus-level invariants (shared task kind, unique ids).
    pub fn new(dialogues: Vec<Dialogue>, task_kind: TaskKind) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for (i, d) in dialogues.iter().enumerate() {
            if d.target.kind != task_kind {
                return Err(CorpusError::TaskKindMismatch {
                    line: i + 1,
                    expected: task_kind,
                    found: d.target.kind,
                });
            }
            if !ids.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: d.id.clone(),
                });
            }
            d.validate()
                .map_err(|message| CorpusError::InvalidDialogue {
                    id: d.id.clone(),
                    message,
                })?;
        }
        Ok(Corpus {
            dialogues,
            task_kind,
        })
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| d.id == id)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.dialogues.iter().map(|d| d.target.value).collect()
    }

    /// Writes the corpus in the line-delimited record format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for d in &self.dialogues {
            let record = Record::from(d);
            let line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordUtterance {
    speaker: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    dataset: String,
    topic: Option<String>,
    target: Target,
    utterances: Vec<RecordUtterance>,
}

impl From<&Dialogue> for Record {
    fn from(d: &Dialogue) -> Self {
        Record {
            id: d.id.clone(),
            dataset: d.dataset_tag.clone(),
            topic: d.topic.clone(),
            target: d.target,
            utterances: d
                .utterances
                .iter()
                .map(|u| RecordUtterance {
                    speaker: u.speaker_id.clone(),
                    text: u.text.clone(),
                })
                .collect(),
        }
    }
}

/// Parses a line-delimited corpus. Blank lines are skipped; line numbers in
/// errors are 1-based physical lines.
pub fn parse_corpus<R: BufRead>(reader: R, task_kind: TaskKind) -> Result<Corpus, CorpusError> {
    let mut dialogues = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // `topic` must be present (possibly null) per the record format.
        let raw: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if raw.get("topic").is_none() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "missing field `topic`".into(),
            });
        }
        let record: Record = serde_json::from_value(raw).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.target.kind != task_kind {
            return Err(CorpusError::TaskKindMismatch {
                line: line_no,
                expected: task_kind,
                found: record.target.kind,
            });
        }
        match record.target.kind {
            TaskKind::Regression => {
                if !(REGRESSION_MIN..=REGRESSION_MAX).contains(&record.target.value) {
                    return Err(CorpusError::TargetOutOfRange {
                        line: line_no,
                        value: record.target.value,
                    });
                }
            }
            TaskKind::Binary => {
                if record.target.value != 0.0 && record.target.value != 1.0 {
                    return Err(CorpusError::InvalidBinaryTarget {
                        line: line_no,
                        value: record.target.value,
                    });
                }
            }
        }
        if record.utterances.is_empty() {
            return Err(CorpusError::EmptyDialogue { line: line_no });
        }
        if record.id.trim().is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "empty id".into(),
            });
        }
        if !ids.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        let mut utterances = Vec::with_capacity(record.utterances.len());
        for (index, u) in record.utterances.into_iter().enumerate() {
            if u.speaker.trim().is_empty() {
                return Err(CorpusError::EmptyUtteranceField {
                    line: line_no,
                    index,
                    field: "speaker",
                });
            }
            if u.text.trim().is_empty() {
                return Err(CorpusError::EmptyUtteranceField {
                    line: line_no,
                    index,
                    field: "text",
                });
            }
            utterances.push(Utterance {
                speaker_id: u.speaker,
                index,
                text: u.text,
            });
        }
        dialogues.push(Dialogue {
            id: record.id,
            dataset_tag: record.dataset,
            topic: record.topic,
            utterances,
            target: record.target,
        });
    }
    Ok(Corpus {
        dialogues,
        task_kind,
    })
}

/// Assignment of every dialogue to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// Fold index per dialogue, aligned with corpus order.
    folds: Vec<usize>,
    ids: Vec<String>,
}

impl FoldAssignment {
    /// Builds an assignment directly from per-row fold indices.
    pub fn from_folds(k: usize, seed: u64, ids: Vec<String>, folds: Vec<usize>) -> Self {
        assert_eq!(ids.len(), folds.len());
        assert!(folds.iter().all(|&f| f < k));
        FoldAssignment {
            k,
            seed,
            folds,
            ids,
        }
    }

    pub fn fold_of_row(&self, row: usize) -> usize {
        self.folds[row]
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id).map(|i| self.folds[i])
    }

    pub fn n_rows(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row indices in fold `f`, ascending.
    pub fn test_rows(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len())
            .filter(|&i| self.folds[i] == f)
            .collect()
    }

    /// Row indices outside fold `f`, ascending.
    pub fn train_rows(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len())
            .filter(|&i| self.folds[i] != f)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn as_map(&self) -> BTreeMap<String, usize> {
        self.ids
            .iter()
            .cloned()
            .zip(self.folds.iter().copied())
            .collect()
    }
}

/// Deals a shuffled sequence of rows round-robin into folds, continuing the
/// rotation from `start` so that consecutive groups keep fold sizes balanced.
fn deal(rows: &[usize], k: usize, start: usize, folds: &mut [usize]) -> usize {
    for (j, &row) in rows.iter().enumerate() {
        folds[row] = (start + j) % k;
    }
    (start + rows.len()) % k
}

/// Assigns dialogues to `k` folds. Binary corpora are stratified by class;
/// regression corpora are shuffled and dealt round-robin.
pub fn split_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    let n = corpus.len();
    if k < 2 {
        return Err(CorpusError::TooFewFolds(k));
    }
    if k > n {
        return Err(CorpusError::TooManyFolds { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; n];
    match corpus.task_kind() {
        TaskKind::Regression => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng);
            deal(&rows, k, 0, &mut folds);
        }
        TaskKind::Binary => {
            let mut negatives = Vec::new();
            let mut positives = Vec::new();
            for (i, d) in corpus.dialogues().iter().enumerate() {
                if d.target.value == 1.0 {
                    positives.push(i);
                } else {
                    negatives.push(i);
                }
            }
            for (class, rows) in [(0u8, &negatives), (1u8, &positives)] {
                if rows.len() < k {
                    return Err(CorpusError::ClassTooSmall {
                        class,
                        count: rows.len(),
                        k,
                    });
                }
            }
            negatives.shuffle(&mut rng);
            positives.shuffle(&mut rng);
            let next = deal(&negatives, k, 0, &mut folds);
            deal(&positives, k, next, &mut folds);
        }
    }
    Ok(FoldAssignment {
        k,
        seed,
        folds,
        ids: corpus.dialogues().iter().map(|d| d.id.clone()).collect(),
    })
}

/// Partitions the corpus by topic. Every dialogue must carry a topic.
pub fn split_by_topic(corpus: &Corpus) -> Result<BTreeMap<String, Corpus>, CorpusError> {
    let mut groups: BTreeMap<String, Vec<Dialogue>> = BTreeMap::new();
    for d in corpus.dialogues() {
        let topic = d
            .topic
            .as_ref()
            .ok_or_else(|| CorpusError::MissingTopic(d.id.clone()))?;
        groups.entry(topic.clone()).or_default().push(d.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(topic, dialogues)| {
            (
                topic,
                Corpus {
                    dialogues,
                    task_kind: corpus.task_kind(),
                },
            )
        })
        .collect())
}

/// Corpus summary in the shape of a dataset-statistics table.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub utterances_mean: f64,
    pub utterances_std: f64,
    pub speakers_mean: f64,
    pub speakers_std: f64,
    pub words_per_utterance_mean: f64,
    pub words_per_utterance_std: f64,
    pub topics: BTreeMap<String, usize>,
    pub positive_rate: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl CorpusStats {
    pub fn compute(corpus: &Corpus) -> Self {
        let lens: Vec<f64> = corpus.dialogues().iter().map(|d| d.len() as f64).collect();
        let speakers: Vec<f64> = corpus
            .dialogues()
            .iter()
            .map(|d| d.speakers().len() as f64)
            .collect();
        let words: Vec<f64> = corpus
            .dialogues()
            .iter()
            .flat_map(|d| d.utterances.iter())
            .map(|u| u.text.split_whitespace().count() as f64)
            .collect();
        let mut topics = BTreeMap::new();
        for d in corpus.dialogues() {
            if let Some(t) = &d.topic {
                *topics.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let positive_rate = match corpus.task_kind() {
            TaskKind::Binary if !corpus.is_empty() => {
                Some(corpus.targets().iter().sum::<f64>() / corpus.len() as f64)
            }
            _ => None,
        };
        let (utterances_mean, utterances_std) = mean_std(&lens);
        let (speakers_mean, speakers_std) = mean_std(&speakers);
        let (words_per_utterance_mean, words_per_utterance_std) = mean_std(&words);
        CorpusStats {
            dialogues: corpus.len(),
            utterances_mean,
            utterances_std,
            speakers_mean,
            speakers_std,
            words_per_utterance_mean,
            words_per_utterance_std,
            topics,
            positive_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, kind: &str, value: f64, n: usize, topic: Option<&str>) -> String {
        let utterances: Vec<String> = (0..n)
            .map(|i| {
                format!(
                    r#"{{"speaker":"s{}","text":"utterance number {i}"}}"#,
                    i % 2
                )
            })
            .collect();
        let topic = topic.map_or("null".to_string(), |t| format!("\"{t}\""));
        format!(
            r#"{{"id":"{id}","dataset":"oum","topic":{topic},"target":{{"kind":"{kind}","value":{value}}},"utterances":[{}]}}"#,
            utterances.join(",")
        )
    }

    fn binary_corpus(pos: usize, neg: usize) -> Corpus {
        let dialogues = (0..pos + neg)
            .map(|i| {
                Dialogue::new(
                    format!("d{i}"),
                    "afd",
                    None,
                    [("a", "some text")],
                    Target::binary(i < pos),
                )
                .unwrap()
            })
            .collect();
        Corpus::new(dialogues, TaskKind::Binary).unwrap()
    }

    fn regression_corpus(n: usize) -> Corpus {
        let dialogues = (0..n)
            .map(|i| {
                Dialogue::new(
                    format!("d{i}"),
                    "oum",
                    None,
                    [("a", "x")],
                    Target::regression(1.0 + (i % 7) as f64),
                )
                .unwrap()
            })
            .collect();
        Corpus::new(dialogues, TaskKind::Regression).unwrap()
    }

    #[test]
    fn accepts_nine_utterance_regression_record() {
        let line = record("oum-1", "regression", 3.0, 9, Some("vaccination"));
        let corpus = parse_corpus(line.as_bytes(), TaskKind::Regression).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.dialogues()[0].len(), 9);
        assert_eq!(corpus.dialogues()[0].target.value, 3.0);
    }

    #[test]
    fn rejects_out_of_range_regression_target() {
        let input = format!(
            "{}\n{}\n",
            record("a", "regression", 3.0, 2, None),
            record("b", "regression", 8.0, 2, None)
        );
        let err = parse_corpus(input.as_bytes(), TaskKind::Regression).unwrap_err();
        assert!(matches!(err, CorpusError::TargetOutOfRange { line: 2, .. }));
        assert!(err.to_string().contains("target out of [1,7]"));
    }

    #[test]
    fn rejects_empty_dialogue() {
        let line = record("a", "regression", 3.0, 0, None);
        let err = parse_corpus(line.as_bytes(), TaskKind::Regression).unwrap_err();
        assert!(err.to_string().contains("empty dialogue"));
    }

    #[test]
    fn rejects_duplicates_unknown_fields_and_bad_binary() {
        let dup = format!(
            "{}\n{}",
            record("a", "binary", 1.0, 1, None),
            record("a", "binary", 0.0, 1, None)
        );
        assert!(matches!(
            parse_corpus(dup.as_bytes(), TaskKind::Binary),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));

        let extra = record("a", "binary", 1.0, 1, None).replacen('{', "{\"extra\":1,", 1);
        assert!(matches!(
            parse_corpus(extra.as_bytes(), TaskKind::Binary),
            Err(CorpusError::Malformed { line: 1, .. })
        ));

        let bad = record("a", "binary", 0.5, 1, None);
        assert!(matches!(
            parse_corpus(bad.as_bytes(), TaskKind::Binary),
            Err(CorpusError::InvalidBinaryTarget { .. })
        ));

        let mismatch = record("a", "regression", 3.0, 1, None);
        assert!(matches!(
            parse_corpus(mismatch.as_bytes(), TaskKind::Binary),
            Err(CorpusError::TaskKindMismatch { .. })
        ));

        let no_topic = record("a", "binary", 1.0, 1, None).replace("\"topic\":null,", "");
        assert!(parse_corpus(no_topic.as_bytes(), TaskKind::Binary).is_err());

        let blank_text = record("a", "binary", 1.0, 1, None).replace("utterance number 0", "   ");
        assert!(matches!(
            parse_corpus(blank_text.as_bytes(), TaskKind::Binary),
            Err(CorpusError::EmptyUtteranceField { field: "text", .. })
        ));
    }

    #[test]
    fn single_utterance_dialogues_are_accepted() {
        let line = record("a", "binary", 1.0, 1, None);
        assert_eq!(
            parse_corpus(line.as_bytes(), TaskKind::Binary)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn write_then_parse_is_identity() {
        let input = [
            record("a", "regression", 3.0, 3, Some("Brexit")),
            record("b", "regression", 6.5, 1, None),
        ]
        .join("\n");
        let corpus = parse_corpus(input.as_bytes(), TaskKind::Regression).unwrap();
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let again = parse_corpus(buf.as_slice(), TaskKind::Regression).unwrap();
        assert_eq!(corpus, again);
    }

    #[test]
    fn fourteen_dialogues_make_seven_pairs() {
        let corpus = regression_corpus(14);
        let folds = split_folds(&corpus, 7, 3).unwrap();
        assert_eq!(folds.fold_sizes(), vec![2; 7]);
    }

    #[test]
    fn split_is_deterministic() {
        let corpus = regression_corpus(50);
        assert_eq!(
            split_folds(&corpus, 7, 11).unwrap(),
            split_folds(&corpus, 7, 11).unwrap()
        );
        assert_ne!(
            split_folds(&corpus, 7, 11).unwrap().folds(),
            split_folds(&corpus, 7, 12).unwrap().folds()
        );
    }

    #[test]
    fn wikitactics_sized_split_is_balanced() {
        // 213 dialogues with a plausible escalation rate.
        let corpus = binary_corpus(90, 123);
        let folds = split_folds(&corpus, 7, 0).unwrap();
        // Brute-force recount from the raw assignment.
        let mut counts = [0usize; 7];
        for row in 0..corpus.len() {
            counts[folds.fold_of_row(row)] += 1;
        }
        assert!(counts.iter().all(|&c| c == 30 || c == 31), "{counts:?}");
        assert_eq!(counts.iter().sum::<usize>(), 213);
        let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(max - min <= 1);
    }

    #[test]
    fn stratified_split_tracks_prevalence() {
        let corpus = binary_corpus(242, 758);
        let folds = split_folds(&corpus, 7, 5).unwrap();
        let overall = 242.0 / 1000.0;
        for f in 0..7 {
            let rows = folds.test_rows(f);
            let pos = rows
                .iter()
                .filter(|&&r| corpus.dialogues()[r].target.value == 1.0)
                .count();
            let size = rows.len() as f64;
            assert!((pos as f64 / size - overall).abs() <= 1.0 / size);
        }
    }

    #[test]
    fn split_errors() {
        let corpus = regression_corpus(5);
        assert!(matches!(
            split_folds(&corpus, 7, 0),
            Err(CorpusError::TooManyFolds { k: 7, n: 5 })
        ));
        assert!(matches!(
            split_folds(&corpus, 1, 0),
            Err(CorpusError::TooFewFolds(1))
        ));
        let skewed = binary_corpus(3, 40);
        assert!(matches!(
            split_folds(&skewed, 7, 0),
            Err(CorpusError::ClassTooSmall {
                class: 1,
                count: 3,
                k: 7
            })
        ));
    }

    #[test]
    fn topic_split_counts() {
        let mut lines = Vec::new();
        for (topic, n) in [("Brexit", 149), ("vaccination", 189), ("veganism", 204)] {
            for i in 0..n {
                lines.push(record(
                    &format!("{topic}-{i}"),
                    "regression",
                    4.0,
                    2,
                    Some(topic),
                ));
            }
        }
        let corpus = parse_corpus(lines.join("\n").as_bytes(), TaskKind::Regression).unwrap();
        let parts = split_by_topic(&corpus).unwrap();
        let counts: Vec<usize> = parts.values().map(Corpus::len).collect();
        assert_eq!(counts, vec![149, 189, 204]);
        assert!(parts
            .values()
            .all(|c| c.task_kind() == TaskKind::Regression));
    }

    #[test]
    fn single_topic_split_is_identity() {
        let input = [
            record("a", "regression", 2.0, 2, Some("t")),
            record("b", "regression", 5.0, 3, Some("t")),
        ]
        .join("\n");
        let corpus = parse_corpus(input.as_bytes(), TaskKind::Regression).unwrap();
        let parts = split_by_topic(&corpus).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts["t"], corpus);
    }

    #[test]
    fn missing_topic_names_the_dialogue() {
        let input = [
            record("a", "regression", 2.0, 2, Some("t")),
            record("lonely", "regression", 5.0, 3, None),
        ]
        .join("\n");
        let corpus = parse_corpus(input.as_bytes(), TaskKind::Regression).unwrap();
        let err = split_by_topic(&corpus).unwrap_err();
        assert!(err.to_string().contains("lonely"));
    }
}
