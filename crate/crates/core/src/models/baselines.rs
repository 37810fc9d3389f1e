//! Text baselines: bag-of-words counts, averaged word embeddings, topic
//! indicators and a prompted language-model predictor.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::cv::{DenseDesign, FoldData, FoldDesign};
use super::ModelError;
use crate::annotation::{Annotator, ParsedAnnotation, TemplateId};
use crate::corpus::{Corpus, Dialogue, TaskKind};
use crate::lexical::tokenize;

/// Range a regression prediction is clamped to.
pub const REGRESSION_RANGE: (f64, f64) = (1.0, 7.0);

/// All tokens of a dialogue in utterance order.
pub fn dialogue_tokens(dialogue: &Dialogue) -> Vec<String> {
    dialogue
        .utterances
        .iter()
        .flat_map(|u| tokenize(&u.text).tokens)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BowOptions {
    /// Minimum number of training documents containing a token.
    pub min_df: usize,
    /// Keep at most this many tokens, by training term frequency.
    pub max_features: Option<usize>,
}

impl Default for BowOptions {
    fn default() -> Self {
        BowOptions {
            min_df: 1,
            max_features: None,
        }
    }
}

/// Vocabulary frozen on training documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowVectorizer {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
}

impl BowVectorizer {
    pub fn fit<D: AsRef<[String]>>(docs: &[D], options: BowOptions) -> Result<Self, ModelError> {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let doc = doc.as_ref();
            let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
            for t in doc {
                *tf.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<&str> = df
            .iter()
            .filter(|(_, &n)| n >= options.min_df.max(1))
            .map(|(&t, _)| t)
            .collect();
        if let Some(max) = options.max_features {
            if kept.len() > max {
                // Highest frequency first, alphabetical among equals.
                kept.sort_by(|a, b| tf[b].cmp(&tf[a]).then(a.cmp(b)));
                kept.truncate(max);
                kept.sort_unstable();
            }
        }
        if kept.is_empty() {
            return Err(ModelError::EmptyVocabulary);
        }
        let vocabulary: Vec<String> = kept.into_iter().map(str::to_string).collect();
        let index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(BowVectorizer { vocabulary, index })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn column_names(&self) -> Vec<String> {
        self.vocabulary
            .iter()
            .map(|t| format!("BoW - {t}"))
            .collect()
    }

    /// Token counts; out-of-vocabulary tokens are dropped.
    pub fn transform<D: AsRef<[String]>>(&self, docs: &[D]) -> Array2<f64> {
        let mut x = Array2::zeros((docs.len(), self.vocabulary.len()));
        for (i, doc) in docs.iter().enumerate() {
            for t in doc.as_ref() {
                if let Some(&j) = self.index.get(t) {
                    x[[i, j]] += 1.0;
                }
            }
        }
        x
    }
}

/// Bag-of-words design whose vocabulary is rebuilt from each fold's
/// training rows.
#[derive(Debug, Clone)]
pub struct BowDesign {
    docs: Vec<Vec<String>>,
    options: BowOptions,
}

impl BowDesign {
    pub fn new(corpus: &Corpus, options: BowOptions) -> Self {
        BowDesign {
            docs: corpus.dialogues().iter().map(dialogue_tokens).collect(),
            options,
        }
    }
}

impl FoldDesign for BowDesign {
    fn n_rows(&self) -> usize {
        self.docs.len()
    }

    fn build(&self, train_rows: &[usize], test_rows: &[usize]) -> Result<FoldData, ModelError> {
        let train: Vec<&[String]> = train_rows
            .iter()
            .map(|&i| self.docs[i].as_slice())
            .collect();
        let test: Vec<&[String]> = test_rows.iter().map(|&i| self.docs[i].as_slice()).collect();
        let vectorizer = BowVectorizer::fit(&train, self.options)?;
        Ok(FoldData {
            columns: vectorizer.column_names(),
            x_train: vectorizer.transform(&train),
            x_test: vectorizer.transform(&test),
            imputation_log: Vec::new(),
        })
    }
}

/// Word vectors read from `word v1 ... vd` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn parse(source: &str) -> Result<Self, ModelError> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (n, line) in source.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line has a field");
            let values: Vec<f64> = parts
                .map(|p| match p.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(ModelError::Embedding(format!(
                        "line {line_no}: invalid number '{p}'"
                    ))),
                })
                .collect::<Result<_, _>>()?;
            if values.is_empty() {
                return Err(ModelError::Embedding(format!(
                    "line {line_no}: no vector for '{word}'"
                )));
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(ModelError::Embedding(format!(
                        "line {line_no}: expected {d} values, found {}",
                        values.len()
                    )))
                }
                _ => {}
            }
            vectors.insert(word.to_lowercase(), values);
        }
        match dim {
            Some(dim) => Ok(EmbeddingTable { dim, vectors }),
            None => Err(ModelError::Embedding("no vectors".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Mean vector of the dialogue's in-vocabulary tokens and the fraction of
/// tokens covered. No covered tokens gives the zero vector.
pub fn embedding_average(dialogue: &Dialogue, table: &EmbeddingTable) -> (Vec<f64>, f64) {
    let tokens = dialogue_tokens(dialogue);
    let mut sum = vec![0.0; table.dim()];
    let mut hits = 0usize;
    for t in &tokens {
        if let Some(v) = table.get(t) {
            hits += 1;
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
    }
    if hits > 0 {
        sum.iter_mut().for_each(|s| *s /= hits as f64);
    }
    let coverage = if tokens.is_empty() {
        0.0
    } else {
        hits as f64 / tokens.len() as f64
    };
    (sum, coverage)
}

/// Averaged-embedding design plus per-dialogue coverage.
pub fn embedding_design(corpus: &Corpus, table: &EmbeddingTable) -> (DenseDesign, Vec<f64>) {
    let n = corpus.len();
    let mut x = Array2::zeros((n, table.dim()));
    let mut coverage = Vec::with_capacity(n);
    for (i, d) in corpus.dialogues().iter().enumerate() {
        let (v, c) = embedding_average(d, table);
        for (j, value) in v.into_iter().enumerate() {
            x[[i, j]] = value;
        }
        coverage.push(c);
    }
    let columns = (0..table.dim()).map(|j| format!("Emb - {j}")).collect();
    (DenseDesign { columns, x }, coverage)
}

/// One indicator column per topic, sorted by name. Dialogues without a topic
/// get an all-zero row.
pub fn topic_onehot(corpus: &Corpus) -> DenseDesign {
    let topics: Vec<&str> = corpus
        .dialogues()
        .iter()
        .filter_map(|d| d.topic.as_deref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut x = Array2::zeros((corpus.len(), topics.len()));
    for (i, d) in corpus.dialogues().iter().enumerate() {
        if let Some(t) = d.topic.as_deref() {
            let j = topics.binary_search(&t).expect("topic collected above");
            x[[i, j]] = 1.0;
        }
    }
    let columns = topics.iter().map(|t| format!("Topic - {t}")).collect();
    DenseDesign { columns, x }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NshotPrediction {
    pub dialogue_id: String,
    pub value: f64,
    /// The parsed number lay outside the task's range.
    pub clamped: bool,
    pub raw_value: f64,
    pub response: String,
}

/// Prompted prediction: the dataset prompt with `examples` appended, parsed
/// as a single number. Regression values are clamped to [1, 7], binary
/// scores to [0, 1]; clamping is flagged.
pub fn nshot_prompt_baseline(
    annotator: &Annotator<'_>,
    dialogue: &Dialogue,
    examples: &[(&Dialogue, f64)],
    template_id: TemplateId,
    task: TaskKind,
) -> Result<NshotPrediction, ModelError> {
    let request =
        annotator
            .templates
            .render_nshot(template_id, dialogue, examples, &annotator.settings)?;
    let outcome = annotator.run(&request)?;
    let raw_value = match outcome.parsed {
        Ok(ParsedAnnotation::Number(v)) => v,
        _ => {
            return Err(ModelError::NshotUnparseable {
                dialogue_id: dialogue.id.clone(),
                response: outcome.response,
            })
        }
    };
    let (lo, hi) = match task {
        TaskKind::Regression => REGRESSION_RANGE,
        TaskKind::Binary => (0.0, 1.0),
    };
    let value = raw_value.clamp(lo, hi);
    let clamped = value != raw_value;
    if clamped {
        tracing::warn!(dialogue = %dialogue.id, raw_value, value, "prompt-baseline prediction clamped");
    }
    Ok(NshotPrediction {
        dialogue_id: dialogue.id.clone(),
        value,
        clamped,
        raw_value,
        response: outcome.response,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{
        PromptRequest, PromptTemplates, Provider, ProviderError, RequestSettings, RetryPolicy,
    };
    use crate::corpus::Target;

    fn doc(words: &str) -> Vec<String> {
        words.split_whitespace().map(str::to_string).collect()
    }

    fn dialogue(id: &str, topic: Option<&str>, text: &str) -> Dialogue {
        Dialogue::new(
            id,
            "oum",
            topic.map(str::to_string),
            [("a", text)],
            Target::regression(4.0),
        )
        .unwrap()
    }

    #[test]
    fn bow_counts_over_sorted_vocabulary() {
        let docs = [doc("a b"), doc("a")];
        let v = BowVectorizer::fit(&docs, BowOptions::default()).unwrap();
        assert_eq!(v.vocabulary(), ["a", "b"]);
        assert_eq!(v.transform(&docs), ndarray::array![[1.0, 1.0], [1.0, 0.0]]);
        assert_eq!(v.transform(&[doc("c a a")]), ndarray::array![[2.0, 0.0]]);
    }

    #[test]
    fn min_df_matches_brute_force() {
        let docs = [doc("x y z x"), doc("x y"), doc("y w"), doc("q")];
        let v = BowVectorizer::fit(
            &docs,
            BowOptions {
                min_df: 2,
                max_features: None,
            },
        )
        .unwrap();
        let mut expected: Vec<String> = Vec::new();
        for t in ["q", "w", "x", "y", "z"] {
            let df = docs.iter().filter(|d| d.iter().any(|w| w == t)).count();
            if df >= 2 {
                expected.push(t.to_string());
            }
        }
        assert_eq!(v.vocabulary(), expected.as_slice());
        let err = BowVectorizer::fit(
            &docs,
            BowOptions {
                min_df: 9,
                max_features: None,
            },
        );
        assert!(matches!(err, Err(ModelError::EmptyVocabulary)));
    }

    #[test]
    fn max_features_keeps_frequent_tokens() {
        let docs = [doc("a a a b b c"), doc("c d")];
        let v = BowVectorizer::fit(
            &docs,
            BowOptions {
                min_df: 1,
                max_features: Some(2),
            },
        )
        .unwrap();
        assert_eq!(v.vocabulary(), ["a", "b"]);
    }

    #[test]
    fn bow_design_freezes_training_vocabulary() {
        let corpus = Corpus::new(
            vec![
                dialogue("1", None, "alpha beta"),
                dialogue("2", None, "alpha gamma"),
            ],
            TaskKind::Regression,
        )
        .unwrap();
        let data = BowDesign::new(&corpus, BowOptions::default())
            .build(&[0], &[1])
            .unwrap();
        assert_eq!(data.columns, ["BoW - alpha", "BoW - beta"]);
        assert_eq!(data.x_test, ndarray::array![[1.0, 0.0]]);
    }

    #[test]
    fn embedding_average_by_hand() {
        let table = EmbeddingTable::parse("cat 1 2 3\ndog 3 0 -1\n").unwrap();
        let (v, c) = embedding_average(&dialogue("1", None, "cat"), &table);
        assert_eq!((v, c), (vec![1.0, 2.0, 3.0], 1.0));
        let (v, c) = embedding_average(&dialogue("1", None, "cat dog"), &table);
        assert_eq!(v, vec![2.0, 1.0, 1.0]);
        assert_eq!(c, 1.0);
        let (v, c) = embedding_average(&dialogue("1", None, "bird"), &table);
        assert_eq!((v, c), (vec![0.0; 3], 0.0));
    }

    #[test]
    fn malformed_embedding_lines_are_reported() {
        let err = EmbeddingTable::parse("a 1 2\nb 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = EmbeddingTable::parse("a 1 x\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        assert!(EmbeddingTable::parse("").is_err());
    }

    #[test]
    fn topic_indicators() {
        let corpus = Corpus::new(
            vec![
                dialogue("1", Some("b"), "x"),
                dialogue("2", Some("a"), "x"),
                dialogue("3", None, "x"),
            ],
            TaskKind::Regression,
        )
        .unwrap();
        let d = topic_onehot(&corpus);
        assert_eq!(d.columns, ["Topic - a", "Topic - b"]);
        assert_eq!(d.x, ndarray::array![[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]);
    }

    struct Fixed(&'static str);

    impl Provider for Fixed {
        fn complete(&self, _: &PromptRequest) -> Result<String, ProviderError> {
            Ok(self.0.to_string())
        }
    }

    fn predict(
        response: &'static str,
        tid: TemplateId,
        task: TaskKind,
    ) -> Result<NshotPrediction, ModelError> {
        let templates = PromptTemplates::builtin();
        let provider = Fixed(response);
        let annotator = Annotator {
            templates: &templates,
            provider: &provider,
            cache: None,
            retry: RetryPolicy::no_wait(0),
            settings: RequestSettings::default(),
            parallelism: 1,
        };
        nshot_prompt_baseline(&annotator, &dialogue("1", None, "hello"), &[], tid, task)
    }

    #[test]
    fn nshot_parses_and_clamps() {
        let p = predict("3", TemplateId::NshotOum, TaskKind::Regression).unwrap();
        assert_eq!((p.value, p.clamped), (3.0, false));
        let p = predict("0.7", TemplateId::NshotWikitactics, TaskKind::Binary).unwrap();
        assert_eq!(p.value, 0.7);
        let p = predict("9", TemplateId::NshotOum, TaskKind::Regression).unwrap();
        assert_eq!((p.value, p.clamped, p.raw_value), (7.0, true, 9.0));
        assert!(matches!(
            predict("no idea", TemplateId::NshotAfd, TaskKind::Binary),
            Err(ModelError::NshotUnparseable { .. })
        ));
    }
}
