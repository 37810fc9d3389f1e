//! Experiment configuration, stage commands and the run manifest.
//!
//! Each stage reads its inputs from and writes its outputs to the output
//! directory, so stages can be rerun independently:
//!
//! | stage        | writes                                              |
//! |--------------|-----------------------------------------------------|
//! | `ingest`     | `corpus.jsonl`, `corpus_stats.json`                 |
//! | `annotate`   | `annotations.json`, `annotation_stats.json`         |
//! | `extract`    | `features.csv`, `features.manifest.json`            |
//! | `train-eval` | `runs/*.json`, `model.json`, `reports/*.csv`        |
//! | `explain`    | `reports/importance*.csv`, `reports/correlations.csv` |
//! | `robustness` | `reports/per_topic.csv`, `reports/plot_*.csv`       |
//! | `audit`      | `reports/audit_*sheet.csv`, `reports/audit_report.json` |
//! | `report`     | `reports/summary.csv`, `reports/summary.md`         |
//!
//! Every stage refreshes `manifest.json`, which hashes each file under the
//! output directory except the response cache.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregate::{
    build_matrix, AggregationError, AggregationOptions, DialogueFeatureMatrix, FeatureSources,
    MatrixManifest,
};
use crate::annotation::{
    audit_agreement, audit_qoa_pairs, audit_sample, build_provider, read_audit_sheet,
    write_audit_sheet, AnnotationCache, AnnotationError, AnnotationStats, AnnotationStore,
    AnnotationTasks, Annotator, PromptTemplates, ProviderConfig, RequestSettings, TemplateId,
};
use crate::corpus::{
    parse_corpus, split_folds, Corpus, CorpusError, CorpusStats, FoldAssignment, TaskKind,
};
use crate::evaluation::{
    cv_permutation_importance, feature_correlations, held_out_fold_scores, score_vs_topic_points,
    summarize_scores, target_correlations, topic_robustness, write_csv_rows, CorrelationEntry,
    EvaluationError, ImportanceOptions, MetricSummary, MetricsRow, SignificanceRow, TopicRow,
    FOLD_SEED_PAIRING,
};
use crate::lexical::{LexicalError, LexiconSet, MarkerExtractor};
use crate::metrics::{paired_t_test, Metric, MetricError};
use crate::models::baselines::{
    embedding_design, nshot_prompt_baseline, topic_onehot, BowDesign, BowOptions, EmbeddingTable,
};
use crate::models::{
    fit_fold, grid_search_flat_cv, FitSettings, FittedLinearModel, FoldDesign, Hyperparams,
    MatrixDesign, ModelError, ModelKind,
};
use crate::registry::{FeatureSet, Registry};
use crate::synth::{generate, SynthError, SynthParams};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Report name of the configured feature-based model.
pub const MAIN_MODEL: &str = "features";
pub const TOP_IMPORTANCE_ROWS: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing input {path}; run `{stage}` first")]
    MissingInput { path: String, stage: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl PipelineError {
    /// 1 for invalid input or configuration, 2 for provider failures,
    /// 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        fn provider(e: &AnnotationError) -> bool {
            matches!(e, AnnotationError::Provider(_))
        }
        match self {
            PipelineError::Annotation(e) if provider(e) => 2,
            PipelineError::Model(ModelError::Annotation(e)) if provider(e) => 2,
            PipelineError::Evaluation(EvaluationError::Model(ModelError::Annotation(e)))
                if provider(e) =>
            {
                2
            }
            PipelineError::Config(_)
            | PipelineError::MissingInput { .. }
            | PipelineError::Format { .. }
            | PipelineError::Corpus(_)
            | PipelineError::Lexical(_)
            | PipelineError::Aggregation(_)
            | PipelineError::Synth(_)
            | PipelineError::Model(ModelError::Config(_) | ModelError::InvalidHyperparameter(_))
            | PipelineError::Annotation(
                AnnotationError::UnknownTemplate(_)
                | AnnotationError::InvalidTemplate { .. }
                | AnnotationError::Audit(_)
                | AnnotationError::MissingHumanLabel { .. },
            ) => 1,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput {
            path: path.display().to_string(),
            stage,
        });
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Training mean or positive rate.
    Constant,
    Bow,
    Embedding,
    /// Topic indicators only.
    Topic,
    /// Heuristic marker features (PM and CM) only.
    Discrete,
    /// Prompted language-model predictions.
    Nshot,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Constant => "constant",
            BaselineKind::Bow => "bow",
            BaselineKind::Embedding => "embedding",
            BaselineKind::Topic => "topic",
            BaselineKind::Discrete => "discrete",
            BaselineKind::Nshot => "nshot",
        }
    }
}

fn default_feature_sets() -> Vec<FeatureSet> {
    FeatureSet::ALL.to_vec()
}

fn default_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0, 100.0]
}

fn default_k() -> usize {
    7
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_true() -> bool {
    true
}

fn default_dataset() -> String {
    "dataset".into()
}

/// One experiment. Relative paths are resolved against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub corpus: PathBuf,
    pub task: TaskKind,
    pub output_dir: PathBuf,
    #[serde(default = "default_feature_sets")]
    pub feature_sets: Vec<FeatureSet>,
    #[serde(default)]
    pub disaggregate: bool,
    #[serde(default)]
    pub include_optional: bool,
    pub model: ModelKind,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub baselines: Vec<BaselineKind>,
    /// Baselines the main model is t-tested against.
    #[serde(default)]
    pub significance_against: Vec<String>,
    #[serde(default)]
    pub importance: ImportanceOptions,
    #[serde(default)]
    pub bow: BowOptions,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub nshot_examples: usize,
    /// Defaults to the template matching `dataset` (oum, wikitactics, afd).
    #[serde(default)]
    pub nshot_template: Option<TemplateId>,
    /// Defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub lexicon_dir: Option<PathBuf>,
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    #[serde(default)]
    pub correlation_pairs: Vec<(String, String)>,
    #[serde(default)]
    pub provider: ProviderConfig,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the required keys.
    pub fn new(corpus: PathBuf, task: TaskKind, output_dir: PathBuf, model: ModelKind) -> Self {
        ExperimentConfig {
            dataset: default_dataset(),
            corpus,
            task,
            output_dir,
            feature_sets: default_feature_sets(),
            disaggregate: false,
            include_optional: false,
            model,
            grid: default_grid(),
            k: default_k(),
            seeds: default_seeds(),
            standardize: true,
            baselines: Vec::new(),
            significance_against: Vec::new(),
            importance: ImportanceOptions::default(),
            bow: BowOptions::default(),
            embeddings: None,
            nshot_examples: 0,
            nshot_template: None,
            cache_dir: None,
            lexicon_dir: None,
            template_dir: None,
            correlation_pairs: Vec::new(),
            provider: ProviderConfig::default(),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        for p in [
            &mut self.embeddings,
            &mut self.cache_dir,
            &mut self.lexicon_dir,
            &mut self.template_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        match (self.model, self.task) {
            (ModelKind::Ridge, TaskKind::Regression) | (ModelKind::Logistic, TaskKind::Binary) => {}
            (m, t) => return bad(format!("model '{m}' does not fit a {t} task")),
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.grid.is_empty() || self.grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("grid values must be finite and positive".into());
        }
        if self.feature_sets.is_empty() {
            return bad("feature_sets must not be empty".into());
        }
        if self.importance.repeats == 0 {
            return bad("importance.repeats must be at least 1".into());
        }
        let names: BTreeSet<&str> = self.baselines.iter().map(|b| b.name()).collect();
        for s in &self.significance_against {
            if !names.contains(s.as_str()) {
                return bad(format!(
                    "significance baseline '{s}' is not among the configured baselines"
                ));
            }
        }
        if self.baselines.contains(&BaselineKind::Embedding) && self.embeddings.is_none() {
            return bad("the embedding baseline needs an `embeddings` file".into());
        }
        if self.baselines.contains(&BaselineKind::Nshot) {
            self.nshot_template_id()?;
        }
        Ok(())
    }

    fn nshot_template_id(&self) -> Result<TemplateId, PipelineError> {
        if let Some(t) = self.nshot_template {
            return Ok(t);
        }
        match self.dataset.to_ascii_lowercase().as_str() {
            "oum" => Ok(TemplateId::NshotOum),
            "wikitactics" => Ok(TemplateId::NshotWikitactics),
            "afd" => Ok(TemplateId::NshotAfd),
            other => Err(PipelineError::Config(format!(
                "no prompt-baseline template for dataset '{other}'; set nshot_template"
            ))),
        }
    }

    /// sha256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.output_dir.clone(),
            cache: self
                .cache_dir
                .clone()
                .unwrap_or_else(|| self.output_dir.join("cache")),
        }
    }

    fn aggregation_options(&self) -> AggregationOptions {
        AggregationOptions {
            sets: self.feature_sets.iter().copied().collect(),
            disaggregate_by_participant: self.disaggregate,
            include_optional: self.include_optional,
        }
    }

    fn annotation_tasks(&self) -> AnnotationTasks {
        let has = |s| self.feature_sets.contains(&s);
        AnnotationTasks {
            dispute_tactics: has(FeatureSet::DT),
            qoa: has(FeatureSet::QoA),
            info_style: has(FeatureSet::IC) || has(FeatureSet::ST),
        }
    }

    fn needs_annotations(&self) -> bool {
        let t = self.annotation_tasks();
        t.dispute_tactics || t.qoa || t.info_style
    }

    fn extractor(&self) -> Result<MarkerExtractor, PipelineError> {
        Ok(match &self.lexicon_dir {
            Some(dir) => MarkerExtractor::new(LexiconSet::from_dir(dir)?),
            None => MarkerExtractor::default(),
        })
    }

    fn templates(&self) -> Result<PromptTemplates, PipelineError> {
        Ok(match &self.template_dir {
            Some(dir) => PromptTemplates::from_dir(dir)?,
            None => PromptTemplates::builtin(),
        })
    }

    fn request_settings(&self) -> RequestSettings {
        RequestSettings {
            model_name: self.provider.model.clone(),
            temperature: self.provider.temperature,
            max_history_chars: self.provider.max_history_chars,
        }
    }

    fn fit_settings(&self) -> FitSettings {
        FitSettings {
            kind: self.model,
            standardize: self.standardize,
        }
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
    pub cache: PathBuf,
}

impl Layout {
    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }
    pub fn annotations(&self) -> PathBuf {
        self.root.join("annotations.json")
    }
    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }
    pub fn features_manifest(&self) -> PathBuf {
        self.root.join("features.manifest.json")
    }
    pub fn runs(&self) -> PathBuf {
        self.root.join("runs")
    }
    pub fn run(&self, name: &str) -> PathBuf {
        self.runs().join(format!("{name}.json"))
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn report(&self, name: &str) -> PathBuf {
        self.reports().join(name)
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }
}

/// Provenance of everything under the output directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub registry_version: String,
    pub lexicon_versions: BTreeMap<String, String>,
    pub template_hashes: BTreeMap<String, String>,
    pub annotation: Option<AnnotationStats>,
    pub stage_seconds: BTreeMap<String, f64>,
    /// Relative path to sha256 of its content.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect_files(dir: &Path, skip: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path == skip {
            continue;
        }
        if path.is_dir() {
            collect_files(&path, skip, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Records a finished stage and rehashes the output directory.
fn update_manifest(
    config: &ExperimentConfig,
    stage: &str,
    started: Instant,
    annotation: Option<AnnotationStats>,
) -> Result<RunManifest, PipelineError> {
    let layout = config.layout();
    let path = layout.manifest();
    let mut manifest: RunManifest = if path.exists() {
        read_json(&path, "ingest")?
    } else {
        RunManifest::default()
    };
    manifest.config_hash = config.hash();
    manifest.registry_version = Registry::builtin().version;
    manifest.lexicon_versions = config
        .extractor()?
        .lexicons()
        .versions()
        .into_iter()
        .collect();
    manifest.template_hashes = config.templates()?.hashes();
    if annotation.is_some() {
        manifest.annotation = annotation;
    }
    manifest
        .stage_seconds
        .insert(stage.to_string(), started.elapsed().as_secs_f64());
    let mut files = Vec::new();
    collect_files(&layout.root, &layout.cache, &mut files)?;
    manifest.files.clear();
    for f in files {
        if f == path {
            continue;
        }
        let rel = f.strip_prefix(&layout.root).expect("collected under root");
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        manifest.files.insert(key, sha256_file(&f)?);
    }
    write_json(&path, &manifest)?;
    Ok(manifest)
}

/// Checks that every file listed in the manifest still has its recorded
/// hash and that no unlisted file exists. Returns the offending paths.
pub fn verify_manifest(config: &ExperimentConfig) -> Result<Vec<String>, PipelineError> {
    let layout = config.layout();
    let manifest: RunManifest = read_json(&layout.manifest(), "ingest")?;
    let mut bad = Vec::new();
    for (rel, hash) in &manifest.files {
        let p = layout.root.join(rel);
        if !p.exists() || &sha256_file(&p)? != hash {
            bad.push(rel.clone());
        }
    }
    let mut files = Vec::new();
    collect_files(&layout.root, &layout.cache, &mut files)?;
    for f in files {
        let rel = f.strip_prefix(&layout.root).expect("collected under root");
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if key != MANIFEST_FILE && !manifest.files.contains_key(&key) {
            bad.push(key);
        }
    }
    Ok(bad)
}

pub fn load_corpus(path: &Path, task: TaskKind) -> Result<Corpus, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(parse_corpus(BufReader::new(file), task)?)
}

/// Writes a synthetic corpus and its generating rule to `out_dir`.
pub fn cmd_synth(params: &SynthParams, out_dir: &Path) -> Result<(), PipelineError> {
    create_dir(out_dir)?;
    let output = generate(params, &MarkerExtractor::default())?;
    let path = out_dir.join("corpus.jsonl");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    output.corpus.write_jsonl(BufWriter::new(file))?;
    write_json(&out_dir.join("truth.json"), &output.truth)?;
    write_json(&out_dir.join("synth_params.json"), params)?;
    Ok(())
}

/// Validates the corpus and stores a normalized copy with summary stats.
pub fn cmd_ingest(config: &ExperimentConfig) -> Result<CorpusStats, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let corpus = load_corpus(&config.corpus, config.task)?;
    let layout = config.layout();
    create_dir(&layout.root)?;
    let path = layout.corpus();
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    corpus.write_jsonl(BufWriter::new(file))?;
    let stats = CorpusStats::compute(&corpus);
    write_json(&layout.root.join("corpus_stats.json"), &stats)?;
    update_manifest(config, "ingest", started, None)?;
    Ok(stats)
}

fn ingested_corpus(config: &ExperimentConfig) -> Result<Corpus, PipelineError> {
    let path = config.layout().corpus();
    if !path.exists() {
        return Err(PipelineError::MissingInput {
            path: path.display().to_string(),
            stage: "ingest",
        });
    }
    load_corpus(&path, config.task)
}

/// Annotates every utterance and dialogue the configured feature sets
/// need. Cached responses are reused, so an interrupted run resumes.
pub fn cmd_annotate(config: &ExperimentConfig) -> Result<AnnotationStats, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let corpus = ingested_corpus(config)?;
    let layout = config.layout();
    let tasks = config.annotation_tasks();
    let templates = config.templates()?;
    let provider = build_provider(&config.provider).map_err(AnnotationError::from)?;
    let cache = AnnotationCache::open(&layout.cache)?;
    let annotator = Annotator {
        templates: &templates,
        provider: provider.as_ref(),
        cache: Some(&cache),
        retry: config.provider.retry_policy(),
        settings: config.request_settings(),
        parallelism: config.provider.parallelism,
    };
    let (store, stats) = annotator.annotate_corpus(&corpus, tasks)?;
    store.save(&layout.annotations())?;
    write_json(&layout.root.join("annotation_stats.json"), &stats)?;
    tracing::info!(
        requests = stats.requests,
        cache_hits = stats.cache_hits,
        network_calls = stats.network_calls,
        missing = stats.missing,
        "annotation finished"
    );
    update_manifest(config, "annotate", started, Some(stats))?;
    Ok(stats)
}

fn discrete_features(
    corpus: &Corpus,
    extractor: &MarkerExtractor,
) -> Result<BTreeMap<String, Vec<crate::lexical::DiscreteFeatures>>, PipelineError> {
    let extracted: Vec<_> = corpus
        .dialogues()
        .par_iter()
        .map(|d| Ok((d.id.clone(), extractor.extract_dialogue(d)?)))
        .collect::<Result<_, LexicalError>>()?;
    Ok(extracted.into_iter().collect())
}

/// Builds the dialogue feature matrix for `options`.
pub fn extract_matrix(
    config: &ExperimentConfig,
    corpus: &Corpus,
    options: &AggregationOptions,
) -> Result<DialogueFeatureMatrix, PipelineError> {
    let needs_discrete =
        options.sets.contains(&FeatureSet::PM) || options.sets.contains(&FeatureSet::CM);
    let needs_llm = options
        .sets
        .iter()
        .any(|s| !matches!(s, FeatureSet::PM | FeatureSet::CM));
    let discrete = if needs_discrete {
        Some(discrete_features(corpus, &config.extractor()?)?)
    } else {
        None
    };
    let annotations = if needs_llm {
        let path = config.layout().annotations();
        if !path.exists() {
            return Err(PipelineError::MissingInput {
                path: path.display().to_string(),
                stage: "annotate",
            });
        }
        Some(AnnotationStore::load(&path)?)
    } else {
        None
    };
    let sources = FeatureSources {
        discrete: discrete.as_ref(),
        annotations: annotations.as_ref(),
    };
    Ok(build_matrix(
        corpus,
        sources,
        &Registry::builtin(),
        options,
    )?)
}

/// Writes `features.csv` and its manifest.
pub fn cmd_extract(config: &ExperimentConfig) -> Result<DialogueFeatureMatrix, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let corpus = ingested_corpus(config)?;
    let matrix = extract_matrix(config, &corpus, &config.aggregation_options())?;
    let layout = config.layout();
    let path = layout.features();
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    matrix.write_csv(BufWriter::new(file))?;
    write_json(&layout.features_manifest(), &matrix.manifest())?;
    tracing::info!(
        rows = matrix.n_rows(),
        columns = matrix.n_cols(),
        "feature matrix written"
    );
    update_manifest(config, "extract", started, None)?;
    Ok(matrix)
}

fn load_matrix(config: &ExperimentConfig) -> Result<DialogueFeatureMatrix, PipelineError> {
    let layout = config.layout();
    let manifest: MatrixManifest = read_json(&layout.features_manifest(), "extract")?;
    let path = layout.features();
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    Ok(DialogueFeatureMatrix::read_csv(
        BufReader::new(file),
        manifest,
    )?)
}

/// Held-out predictions of one model under one fold seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<usize>,
    pub predictions: Vec<f64>,
    /// Selected hyperparameter; `None` for unfitted predictors.
    pub best: Option<Hyperparams>,
    /// Mean held-out selection score of every grid value.
    pub grid_scores: Vec<(Hyperparams, f64)>,
}

/// All seeds of one named model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub name: String,
    pub dialogue_ids: Vec<String>,
    pub targets: Vec<f64>,
    pub seeds: Vec<SeedRun>,
}

impl ModelRun {
    /// Fold scores of every seed, seed-major; the significance tests pair
    /// these.
    pub fn summary(&self, metric: Metric) -> MetricSummary {
        let scores = self
            .seeds
            .iter()
            .flat_map(|s| {
                held_out_fold_scores(&s.predictions, &s.folds, s.k, metric, &self.targets)
            })
            .collect();
        summarize_scores(metric, scores)
    }

    /// Mean and std across seeds of each seed's mean fold score.
    pub fn aggregate(&self, metric: Metric) -> MetricSummary {
        let per_seed = (0..self.seeds.len())
            .map(|i| self.seed_summary(i, metric).mean)
            .collect();
        summarize_scores(metric, per_seed)
    }

    pub fn seed_summary(&self, i: usize, metric: Metric) -> MetricSummary {
        let s = &self.seeds[i];
        summarize_scores(
            metric,
            held_out_fold_scores(&s.predictions, &s.folds, s.k, metric, &self.targets),
        )
    }
}

fn cv_seed(
    design: &dyn FoldDesign,
    y: &[f64],
    settings: FitSettings,
    grid: &[f64],
    folds: &FoldAssignment,
    metric: Metric,
) -> Result<SeedRun, PipelineError> {
    let cv = grid_search_flat_cv(design, y, settings, grid, folds, metric)?;
    Ok(SeedRun {
        seed: folds.seed,
        k: folds.k,
        folds: folds.folds().to_vec(),
        predictions: cv.oof_predictions,
        best: Some(cv.best),
        grid_scores: cv
            .candidates
            .iter()
            .map(|c| (c.hyperparams, c.mean_score))
            .collect(),
    })
}

fn nshot_seed(
    config: &ExperimentConfig,
    corpus: &Corpus,
    annotator: &Annotator<'_>,
    folds: &FoldAssignment,
) -> Result<SeedRun, PipelineError> {
    let template = config.nshot_template_id()?;
    let dialogues = corpus.dialogues();
    let mut jobs = Vec::new();
    for f in 0..folds.k {
        let mut train = folds.train_rows(f);
        let mut rng = ChaCha8Rng::seed_from_u64(folds.seed);
        rng.set_stream(f as u64);
        train.shuffle(&mut rng);
        train.truncate(config.nshot_examples);
        for i in folds.test_rows(f) {
            jobs.push((i, train.clone()));
        }
    }
    let preds: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|(i, examples)| {
            let ex: Vec<(&crate::corpus::Dialogue, f64)> = examples
                .iter()
                .map(|&j| (&dialogues[j], dialogues[j].target.value))
                .collect();
            let p = nshot_prompt_baseline(annotator, &dialogues[*i], &ex, template, config.task)?;
            Ok((*i, p.value))
        })
        .collect::<Result<_, ModelError>>()?;
    let mut predictions = vec![f64::NAN; corpus.len()];
    for (i, p) in preds {
        predictions[i] = p;
    }
    Ok(SeedRun {
        seed: folds.seed,
        k: folds.k,
        folds: folds.folds().to_vec(),
        predictions,
        best: None,
        grid_scores: Vec::new(),
    })
}

/// Hyperparameter chosen most often across seeds; the earliest seed's
/// choice wins ties.
fn consensus_hyperparams(run: &ModelRun) -> Option<Hyperparams> {
    let choices: Vec<Hyperparams> = run.seeds.iter().filter_map(|s| s.best).collect();
    let mut best: Option<(Hyperparams, usize)> = None;
    for c in &choices {
        let count = choices.iter().filter(|o| *o == c).count();
        if best.is_none_or(|(_, n)| count > n) {
            best = Some((*c, count));
        }
    }
    best.map(|(h, _)| h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictionRow {
    model: String,
    seed: u64,
    dialogue_id: String,
    fold: usize,
    prediction: f64,
    target: f64,
}

/// Outcome of `train-eval`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainEvalReport {
    pub runs: Vec<ModelRun>,
    pub metrics: Vec<MetricsRow>,
    pub significance: Vec<SignificanceRow>,
    pub model: FittedLinearModel,
}

impl TrainEvalReport {
    pub fn run(&self, name: &str) -> Option<&ModelRun> {
        self.runs.iter().find(|r| r.name == name)
    }
}

/// Cross-validates the main model and every configured baseline over all
/// seeds, then writes metrics, significance tests, predictions, per-topic
/// results and the final model fitted on all rows.
pub fn cmd_train_eval(config: &ExperimentConfig) -> Result<TrainEvalReport, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let layout = config.layout();
    let corpus = ingested_corpus(config)?;
    let matrix = load_matrix(config)?;
    let ids: Vec<&str> = corpus.dialogues().iter().map(|d| d.id.as_str()).collect();
    if matrix
        .dialogue_ids
        .iter()
        .map(String::as_str)
        .ne(ids.iter().copied())
    {
        return Err(PipelineError::Config(
            "feature matrix rows do not match the corpus; rerun extract".into(),
        ));
    }
    let y = corpus.targets();
    let metrics = Metric::for_task(config.task);
    let selection = metrics[0];
    let settings = config.fit_settings();

    let discrete_matrix = if config.baselines.contains(&BaselineKind::Discrete) {
        let options = AggregationOptions {
            sets: [FeatureSet::PM, FeatureSet::CM].into_iter().collect(),
            disaggregate_by_participant: config.disaggregate,
            include_optional: false,
        };
        Some(extract_matrix(config, &corpus, &options)?)
    } else {
        None
    };
    // Designs are built once, before any fold is touched.
    let mut designs: Vec<(String, Box<dyn FoldDesign + '_>, FitSettings)> = vec![(
        MAIN_MODEL.to_string(),
        Box::new(MatrixDesign(&matrix)),
        settings,
    )];
    let mut nshot = false;
    for b in &config.baselines {
        match b {
            BaselineKind::Constant => {
                let constant = FitSettings {
                    kind: ModelKind::Constant,
                    standardize: false,
                };
                designs.push((b.name().into(), Box::new(MatrixDesign(&matrix)), constant));
            }
            BaselineKind::Bow => designs.push((
                b.name().into(),
                Box::new(BowDesign::new(&corpus, config.bow)),
                settings,
            )),
            BaselineKind::Embedding => {
                let path = config.embeddings.as_ref().expect("validated");
                let table = EmbeddingTable::load(path)?;
                let (design, coverage) = embedding_design(&corpus, &table);
                let mean = coverage.iter().sum::<f64>() / coverage.len().max(1) as f64;
                tracing::info!(coverage = mean, "embedding coverage");
                designs.push((b.name().into(), Box::new(design), settings));
            }
            BaselineKind::Topic => {
                designs.push((b.name().into(), Box::new(topic_onehot(&corpus)), settings))
            }
            BaselineKind::Discrete => {
                let m = discrete_matrix.as_ref().expect("built above");
                designs.push((b.name().into(), Box::new(MatrixDesign(m)), settings));
            }
            BaselineKind::Nshot => nshot = true,
        }
    }

    let fold_sets: Vec<FoldAssignment> = config
        .seeds
        .iter()
        .map(|&s| split_folds(&corpus, config.k, s))
        .collect::<Result<_, _>>()?;
    let mut runs = Vec::new();
    for (name, design, fit) in &designs {
        let seeds = fold_sets
            .iter()
            .map(|folds| cv_seed(design.as_ref(), &y, *fit, &config.grid, folds, selection))
            .collect::<Result<Vec<_>, _>>()?;
        runs.push(ModelRun {
            name: name.clone(),
            dialogue_ids: matrix.dialogue_ids.clone(),
            targets: y.clone(),
            seeds,
        });
    }
    if nshot {
        let templates = config.templates()?;
        let provider = build_provider(&config.provider).map_err(AnnotationError::from)?;
        let cache = AnnotationCache::open(&layout.cache)?;
        let annotator = Annotator {
            templates: &templates,
            provider: provider.as_ref(),
            cache: Some(&cache),
            retry: config.provider.retry_policy(),
            settings: config.request_settings(),
            parallelism: config.provider.parallelism,
        };
        let seeds = fold_sets
            .iter()
            .map(|folds| nshot_seed(config, &corpus, &annotator, folds))
            .collect::<Result<Vec<_>, _>>()?;
        runs.push(ModelRun {
            name: BaselineKind::Nshot.name().into(),
            dialogue_ids: matrix.dialogue_ids.clone(),
            targets: y.clone(),
            seeds,
        });
    }

    create_dir(&layout.runs())?;
    create_dir(&layout.reports())?;
    for run in &runs {
        write_json(&layout.run(&run.name), run)?;
    }

    let mut metric_rows = Vec::new();
    for run in &runs {
        for &metric in &metrics {
            for (i, s) in run.seeds.iter().enumerate() {
                metric_rows.push(MetricsRow::new(
                    &run.name,
                    &config.dataset,
                    &s.seed.to_string(),
                    &run.seed_summary(i, metric),
                ));
            }
            metric_rows.push(MetricsRow::new(
                &run.name,
                &config.dataset,
                "all",
                &run.aggregate(metric),
            ));
        }
    }
    write_csv_rows(&layout.report("metrics.csv"), &metric_rows)?;

    let main = &runs[0];
    let mut significance = Vec::new();
    for other in &config.significance_against {
        let run = runs.iter().find(|r| &r.name == other).expect("validated");
        for &metric in &metrics {
            let a = main.summary(metric).scores;
            let b = run.summary(metric).scores;
            let t = paired_t_test(&a, &b, FOLD_SEED_PAIRING)?;
            significance.push(SignificanceRow {
                dataset: config.dataset.clone(),
                metric,
                model_a: main.name.clone(),
                model_b: run.name.clone(),
                t_statistic: t.t_statistic,
                p_value: t.p_value,
                df: t.df,
                mean_difference: t.mean_difference,
                pairing: t.pairing,
                degenerate: t.degenerate,
            });
        }
    }
    write_csv_rows(&layout.report("significance.csv"), &significance)?;

    let mut prediction_rows = Vec::new();
    for run in &runs {
        for s in &run.seeds {
            for (i, id) in run.dialogue_ids.iter().enumerate() {
                prediction_rows.push(PredictionRow {
                    model: run.name.clone(),
                    seed: s.seed,
                    dialogue_id: id.clone(),
                    fold: s.folds[i],
                    prediction: s.predictions[i],
                    target: y[i],
                });
            }
        }
    }
    write_csv_rows(&layout.report("predictions.csv"), &prediction_rows)?;

    let hp = consensus_hyperparams(main).expect("main model is fitted");
    let all: Vec<usize> = (0..y.len()).collect();
    let (model, _, _) = fit_fold(&MatrixDesign(&matrix), &y, settings, hp, &all, &[])?;
    let model = model.with_seed(config.seeds[0]);
    model.save(&layout.model())?;

    if corpus.dialogues().iter().all(|d| d.topic.is_some()) {
        write_robustness(config, &corpus, &runs)?;
    }
    update_manifest(config, "train-eval", started, None)?;
    Ok(TrainEvalReport {
        runs,
        metrics: metric_rows,
        significance,
        model,
    })
}

fn write_robustness(
    config: &ExperimentConfig,
    corpus: &Corpus,
    runs: &[ModelRun],
) -> Result<Vec<TopicRow>, PipelineError> {
    let layout = config.layout();
    let topics: Vec<Option<String>> = corpus.dialogues().iter().map(|d| d.topic.clone()).collect();
    let metrics = Metric::for_task(config.task);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for run in runs {
        let mut by_cell: BTreeMap<(String, Metric), Vec<Option<f64>>> = BTreeMap::new();
        let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
        for s in &run.seeds {
            for cell in topic_robustness(&s.predictions, &run.targets, &topics, &metrics)? {
                by_cell
                    .entry((cell.topic.clone(), cell.metric))
                    .or_default()
                    .push(cell.value);
                sizes.insert(cell.topic.clone(), cell.n);
                rows.push(TopicRow {
                    model: run.name.clone(),
                    dataset: config.dataset.clone(),
                    seed: s.seed.to_string(),
                    topic: cell.topic,
                    metric: cell.metric,
                    value: cell.value,
                    n: cell.n,
                    note: cell.note,
                });
            }
        }
        for ((topic, metric), values) in by_cell {
            let defined: Option<Vec<f64>> = values.iter().copied().collect();
            let (value, note) = match defined {
                Some(v) => (Some(v.iter().sum::<f64>() / v.len() as f64), None),
                None => (None, Some("undefined for at least one seed".to_string())),
            };
            rows.push(TopicRow {
                model: run.name.clone(),
                dataset: config.dataset.clone(),
                seed: "all".into(),
                n: sizes[&topic],
                topic,
                metric,
                value,
                note,
            });
        }
        let first = &run.seeds[0];
        for mut p in score_vs_topic_points(&first.predictions, &run.targets, &topics) {
            p.series = format!("{}|{}", run.name, p.series);
            points.push(p);
        }
    }
    create_dir(&layout.reports())?;
    write_csv_rows(&layout.report("per_topic.csv"), &rows)?;
    write_csv_rows(&layout.report("plot_score_vs_topic.csv"), &points)?;
    Ok(rows)
}

/// Per-topic metrics from the saved held-out predictions of every run.
pub fn cmd_robustness(config: &ExperimentConfig) -> Result<Vec<TopicRow>, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let layout = config.layout();
    let corpus = ingested_corpus(config)?;
    let mut names = vec![MAIN_MODEL.to_string()];
    names.extend(config.baselines.iter().map(|b| b.name().to_string()));
    let runs = names
        .iter()
        .map(|n| read_json::<ModelRun>(&layout.run(n), "train-eval"))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = write_robustness(config, &corpus, &runs)?;
    update_manifest(config, "robustness", started, None)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainReport {
    pub importance: crate::evaluation::ImportanceReport,
    pub correlations: Vec<CorrelationEntry>,
}

/// Permutation importance of the saved model's configuration and feature
/// correlations with the target and configured pairs.
pub fn cmd_explain(config: &ExperimentConfig) -> Result<ExplainReport, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let layout = config.layout();
    let model_path = layout.model();
    if !model_path.exists() {
        return Err(PipelineError::MissingInput {
            path: model_path.display().to_string(),
            stage: "train-eval",
        });
    }
    let saved = FittedLinearModel::load(&model_path)?;
    let corpus = ingested_corpus(config)?;
    let matrix = load_matrix(config)?;
    if saved.columns != matrix.column_names {
        return Err(PipelineError::Config(
            "saved model columns differ from the feature matrix".into(),
        ));
    }
    let folds = split_folds(&corpus, config.k, saved.seed)?;
    let settings = FitSettings {
        kind: saved.kind,
        standardize: saved.standardization.scaled,
    };
    let metric = Metric::for_task(config.task)[0];
    let (importance, _) = cv_permutation_importance(
        &MatrixDesign(&matrix),
        &matrix.targets,
        settings,
        saved.hyperparams,
        &folds,
        metric,
        config.importance,
    )?;
    create_dir(&layout.reports())?;
    write_csv_rows(&layout.report("importance.csv"), &importance.entries)?;
    let top: Vec<_> = importance
        .ranked()
        .into_iter()
        .take(TOP_IMPORTANCE_ROWS)
        .cloned()
        .collect();
    write_csv_rows(&layout.report("importance_top10.csv"), &top)?;

    let mut correlations = target_correlations(&matrix)?;
    correlations.extend(feature_correlations(&matrix, &config.correlation_pairs)?);
    write_csv_rows(&layout.report("correlations.csv"), &correlations)?;
    update_manifest(config, "explain", started, None)?;
    Ok(ExplainReport {
        importance,
        correlations,
    })
}

/// Writes an audit sheet of `sample_size` sampled utterances (and as many
/// QoA pairs when QoA was annotated). With a completed human sheet, writes
/// the agreement report instead.
pub fn cmd_audit(
    config: &ExperimentConfig,
    sample_size: usize,
    seed: u64,
    human_sheet: Option<&Path>,
) -> Result<Option<crate::annotation::AuditReport>, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let layout = config.layout();
    create_dir(&layout.reports())?;
    let report = match human_sheet {
        Some(path) => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            let rows = read_audit_sheet(BufReader::new(file))?;
            let report = audit_agreement(&rows)?;
            write_json(&layout.report("audit_report.json"), &report)?;
            Some(report)
        }
        None => {
            let store: AnnotationStore =
                AnnotationStore::load(&layout.annotations()).map_err(|e| match e {
                    AnnotationError::Io { path, .. } => PipelineError::MissingInput {
                        path,
                        stage: "annotate",
                    },
                    other => other.into(),
                })?;
            let rows = audit_sample(&store, sample_size, seed)?;
            let path = layout.report("audit_sheet.csv");
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            write_audit_sheet(&rows, BufWriter::new(file))?;
            if config.feature_sets.contains(&FeatureSet::QoA) {
                let pairs = audit_qoa_pairs(&store, sample_size, seed)?;
                let path = layout.report("audit_qoa_sheet.csv");
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                write_audit_sheet(&pairs, BufWriter::new(file))?;
            }
            None
        }
    };
    update_manifest(config, "audit", started, None)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SummaryRow {
    model: String,
    dataset: String,
    metric: Metric,
    value: String,
}

/// Collects the aggregate metric rows into a model-by-metric table.
pub fn cmd_report(config: &ExperimentConfig) -> Result<String, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let layout = config.layout();
    let path = layout.report("metrics.csv");
    if !path.exists() {
        return Err(PipelineError::MissingInput {
            path: path.display().to_string(),
            stage: "train-eval",
        });
    }
    let mut reader = csv::Reader::from_path(&path).map_err(|e| PipelineError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let rows: Vec<MetricsRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let metrics = Metric::for_task(config.task);
    let mut table: BTreeMap<String, BTreeMap<Metric, String>> = BTreeMap::new();
    let mut order = Vec::new();
    let mut summary = Vec::new();
    for r in rows.iter().filter(|r| r.seed == "all") {
        if !order.contains(&r.model) {
            order.push(r.model.clone());
        }
        table
            .entry(r.model.clone())
            .or_default()
            .insert(r.metric, r.formatted.clone());
        summary.push(SummaryRow {
            model: r.model.clone(),
            dataset: r.dataset.clone(),
            metric: r.metric,
            value: r.formatted.clone(),
        });
    }
    write_csv_rows(&layout.report("summary.csv"), &summary)?;
    let mut md = format!("# {}\n\n| model |", config.dataset);
    for m in &metrics {
        md.push_str(&format!(" {m} |"));
    }
    md.push_str("\n|---|");
    md.push_str(&"---|".repeat(metrics.len()));
    md.push('\n');
    for model in &order {
        md.push_str(&format!("| {model} |"));
        for m in &metrics {
            let cell = table[model].get(m).map_or("", String::as_str);
            md.push_str(&format!(" {cell} |"));
        }
        md.push('\n');
    }
    let md_path = layout.report("summary.md");
    fs::write(&md_path, &md).map_err(io_err(&md_path))?;
    update_manifest(config, "report", started, None)?;
    Ok(md)
}

/// Runs ingest, annotate (when needed), extract, train-eval, explain and
/// report in order.
pub fn run_all(config: &ExperimentConfig) -> Result<TrainEvalReport, PipelineError> {
    cmd_ingest(config)?;
    if config.needs_annotations() {
        cmd_annotate(config)?;
    }
    cmd_extract(config)?;
    let report = cmd_train_eval(config)?;
    cmd_explain(config)?;
    cmd_report(config)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            dir.join("c.jsonl"),
            TaskKind::Binary,
            dir.join("out"),
            ModelKind::Logistic,
        );
        c.seeds = vec![0];
        c
    }

    #[test]
    fn validation_rules() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        assert!(c.validate().is_ok());
        c.model = ModelKind::Ridge;
        assert_eq!(c.validate().unwrap_err().exit_code(), 1);
        let mut c = config(dir.path());
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = config(dir.path());
        c.significance_against = vec!["bow".into()];
        assert!(c.validate().is_err());
        c.baselines = vec![BaselineKind::Bow];
        assert!(c.validate().is_ok());
        c.baselines.push(BaselineKind::Nshot);
        assert!(c.validate().is_err());
        c.dataset = "afd".into();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_paths_resolve_against_config_dir() {
        let text = r#"
            corpus = "data/c.jsonl"
            task = "regression"
            output_dir = "out"
            model = "ridge"
            feature_sets = ["PM", "QoA"]
            baselines = ["constant", "bow"]
            [bow]
            min_df = 2
            [importance]
            repeats = 3
            [provider]
            kind = "mock"
        "#;
        let c = ExperimentConfig::from_toml(text, Path::new("/base")).unwrap();
        assert_eq!(c.corpus, Path::new("/base/data/c.jsonl"));
        assert_eq!(c.output_dir, Path::new("/base/out"));
        assert_eq!(c.feature_sets, [FeatureSet::PM, FeatureSet::QoA]);
        assert_eq!(c.bow.min_df, 2);
        assert_eq!(c.importance.repeats, 3);
        assert_eq!(c.k, 7);
        assert_eq!(c.grid, [0.1, 1.0, 10.0, 100.0]);
        assert!(ExperimentConfig::from_toml("corpus = 1", Path::new("/")).is_err());
        assert!(
            ExperimentConfig::from_toml(&format!("{text}\nbogus = 1"), Path::new("/")).is_err()
        );
    }

    #[test]
    fn consensus_prefers_majority_then_first_seed() {
        let seed = |s, a| SeedRun {
            seed: s,
            k: 2,
            folds: vec![],
            predictions: vec![],
            best: Some(Hyperparams::Alpha(a)),
            grid_scores: vec![],
        };
        let mut run = ModelRun {
            name: "m".into(),
            dialogue_ids: vec![],
            targets: vec![],
            seeds: vec![seed(0, 1.0), seed(1, 10.0), seed(2, 10.0)],
        };
        assert_eq!(consensus_hyperparams(&run), Some(Hyperparams::Alpha(10.0)));
        run.seeds.truncate(2);
        assert_eq!(consensus_hyperparams(&run), Some(Hyperparams::Alpha(1.0)));
    }

    #[test]
    fn missing_stage_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path());
        let err = cmd_extract(&c).unwrap_err();
        assert!(
            matches!(
                err,
                PipelineError::MissingInput {
                    stage: "ingest",
                    ..
                }
            ),
            "{err}"
        );
        assert_eq!(err.exit_code(), 1);
    }
}
