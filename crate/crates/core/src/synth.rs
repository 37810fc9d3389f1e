//! Synthetic corpora with planted lexical signal.
//!
//! Each planted signal names a heuristic feature column such as
//! `"PM - Gratitude, mean"` and a token that fires it. Every dialogue draws
//! its own rate per signal and each utterance carries the token with that
//! probability, so the dialogue-level mean varies across dialogues. Targets
//! follow a linear rule on those means plus topic offsets and Gaussian
//! noise; binary labels threshold the latent score at its median.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{column_name, Statistic};
use crate::corpus::{
    Corpus, CorpusError, Dialogue, Target, TaskKind, REGRESSION_MAX, REGRESSION_MIN,
};
use crate::lexical::{DiscreteFeatures, LexicalError, MarkerExtractor};
use crate::registry::FeatureSet;

/// Neutral words that fire no marker rule.
pub const FILLER_WORDS: &[&str] = &[
    "garden", "river", "paint", "window", "coffee", "bicycle", "orange", "lamp", "carpet",
    "pencil", "ladder", "basket", "violin", "tomato", "blanket", "engine", "cookie", "hammer",
    "planet", "button", "candle", "mirror", "kettle", "sandal", "pillow", "wagon", "tunnel",
    "marble", "saddle", "lemon",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible signal spec: {0}")]
    Infeasible(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSignal {
    /// A `PM` or `CM` mean column, e.g. `"CM - # Geography terms, mean"`.
    pub column: String,
    pub token: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicSpec {
    pub name: String,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub n_dialogues: usize,
    pub n_speakers: usize,
    pub min_utterances: usize,
    pub max_utterances: usize,
    pub task: TaskKind,
    pub bias: f64,
    pub noise_sd: f64,
    pub signals: Vec<PlantedSignal>,
    /// Topics are assigned round-robin; none leaves dialogues untopiced.
    #[serde(default)]
    pub topics: Vec<TopicSpec>,
    pub dataset_tag: String,
    pub seed: u64,
}

impl SynthParams {
    /// Binary corpus with two planted signals, gratitude and geography.
    pub fn planted_binary(n_dialogues: usize, seed: u64) -> Self {
        SynthParams {
            n_dialogues,
            n_speakers: 2,
            min_utterances: 6,
            max_utterances: 10,
            task: TaskKind::Binary,
            bias: 0.0,
            noise_sd: 0.1,
            signals: default_signals(2.0, 2.0),
            topics: Vec::new(),
            dataset_tag: "synthetic".into(),
            seed,
        }
    }

    /// Regression corpus on the 1..7 scale with the same two signals.
    pub fn planted_regression(n_dialogues: usize, seed: u64) -> Self {
        SynthParams {
            n_dialogues,
            n_speakers: 2,
            min_utterances: 6,
            max_utterances: 10,
            task: TaskKind::Regression,
            bias: 2.0,
            noise_sd: 0.0,
            signals: default_signals(2.0, 1.0),
            topics: Vec::new(),
            dataset_tag: "synthetic".into(),
            seed,
        }
    }
}

fn default_signals(gratitude: f64, geography: f64) -> Vec<PlantedSignal> {
    vec![
        PlantedSignal {
            column: "PM - Gratitude, mean".into(),
            token: "thanks".into(),
            weight: gratitude,
        },
        PlantedSignal {
            column: "CM - # Geography terms, mean".into(),
            token: "street".into(),
            weight: geography,
        },
    ]
}

/// The generating rule, emitted next to the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub weights: BTreeMap<String, f64>,
    pub bias: f64,
    pub noise_sd: f64,
    pub topic_offsets: BTreeMap<String, f64>,
    /// Planted feature values per dialogue, in signal order.
    pub features: BTreeMap<String, Vec<f64>>,
    pub latent: Vec<f64>,
    /// Median of `latent` for binary tasks.
    pub threshold: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub truth: GroundTruth,
}

struct Plan {
    set: FeatureSet,
    name: String,
}

fn feature_value(f: &DiscreteFeatures, plan: &Plan) -> f64 {
    let v = match plan.set {
        FeatureSet::PM => &f.politeness,
        _ => &f.collaboration,
    };
    v.get(&plan.name).unwrap_or(0.0)
}

fn filler_sentence(rng: &mut ChaCha8Rng, words: usize) -> Vec<String> {
    (0..words)
        .map(|_| FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())].to_string())
        .collect()
}

/// Resolves each signal column and checks that its token fires that
/// feature and no other planted one.
fn plan_signals(
    params: &SynthParams,
    extractor: &MarkerExtractor,
) -> Result<Vec<Plan>, SynthError> {
    let mut plans: Vec<Plan> = Vec::new();
    for s in &params.signals {
        let found = [FeatureSet::PM, FeatureSet::CM]
            .into_iter()
            .find_map(|set| {
                let prefix = format!("{} - ", set.tag());
                let name = s.column.strip_prefix(&prefix)?.strip_suffix(", mean")?;
                (column_name(set, name, Statistic::Mean, None) == s.column).then(|| Plan {
                    set,
                    name: name.to_string(),
                })
            });
        let plan = found.ok_or_else(|| {
            SynthError::Infeasible(format!("'{}' is not a heuristic mean column", s.column))
        })?;
        if !s.weight.is_finite() {
            return Err(SynthError::Infeasible(format!(
                "weight of '{}' is not finite",
                s.column
            )));
        }
        plans.push(plan);
    }
    for (i, s) in params.signals.iter().enumerate() {
        let text = format!("garden {} river.", s.token);
        let probe = Dialogue::new(
            "probe",
            "probe",
            None,
            [("s1", text.as_str())],
            Target::binary(true),
        )?;
        let with = extractor.extract_dialogue(&probe)?;
        let base = Dialogue::new(
            "probe",
            "probe",
            None,
            [("s1", "garden river.")],
            Target::binary(true),
        )?;
        let without = extractor.extract_dialogue(&base)?;
        for (j, plan) in plans.iter().enumerate() {
            let delta = feature_value(&with[0], plan) - feature_value(&without[0], plan);
            if i == j && delta <= 0.0 {
                return Err(SynthError::Infeasible(format!(
                    "token '{}' does not fire '{}'",
                    s.token, s.column
                )));
            }
            if i != j && delta != 0.0 {
                return Err(SynthError::Infeasible(format!(
                    "token '{}' also moves '{}'",
                    s.token, params.signals[j].column
                )));
            }
        }
    }
    Ok(plans)
}

fn validate(params: &SynthParams) -> Result<(), SynthError> {
    if params.n_dialogues < 2 {
        return Err(SynthError::Invalid("need at least 2 dialogues".into()));
    }
    if params.n_speakers == 0 {
        return Err(SynthError::Invalid("need at least 1 speaker".into()));
    }
    if params.min_utterances == 0 || params.min_utterances > params.max_utterances {
        return Err(SynthError::Invalid(
            "utterance range must satisfy 1 <= min <= max".into(),
        ));
    }
    if !(params.noise_sd >= 0.0 && params.noise_sd.is_finite()) || !params.bias.is_finite() {
        return Err(SynthError::Invalid(
            "noise_sd must be >= 0 and bias finite".into(),
        ));
    }
    if params.signals.is_empty() {
        return Err(SynthError::Infeasible("no planted signals".into()));
    }
    Ok(())
}

/// Generates the corpus; the output is a pure function of `params`.
pub fn generate(
    params: &SynthParams,
    extractor: &MarkerExtractor,
) -> Result<SynthOutput, SynthError> {
    validate(params)?;
    let plans = plan_signals(params, extractor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let speakers: Vec<String> = (1..=params.n_speakers)
        .map(|s| format!("speaker{s}"))
        .collect();

    let mut raw = Vec::with_capacity(params.n_dialogues);
    let mut features: Vec<Vec<f64>> = vec![Vec::with_capacity(params.n_dialogues); plans.len()];
    let mut latent = Vec::with_capacity(params.n_dialogues);
    for i in 0..params.n_dialogues {
        let n_utt = rng.random_range(params.min_utterances..=params.max_utterances);
        let rates: Vec<f64> = params.signals.iter().map(|_| rng.random::<f64>()).collect();
        let mut turns = Vec::with_capacity(n_utt);
        let first = rng.random_range(0..speakers.len());
        for u in 0..n_utt {
            let speaker = speakers[(first + u) % speakers.len()].clone();
            let len = 4 + rng.random_range(0..4);
            let mut words = filler_sentence(&mut rng, len);
            for (s, rate) in params.signals.iter().zip(&rates) {
                if rng.random::<f64>() < *rate {
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, s.token.clone());
                }
            }
            turns.push((speaker, format!("{}.", words.join(" "))));
        }
        let topic = (!params.topics.is_empty()).then(|| &params.topics[i % params.topics.len()]);
        let id = format!("syn-{i:05}");
        let dialogue = Dialogue::new(
            id,
            params.dataset_tag.clone(),
            topic.map(|t| t.name.clone()),
            turns,
            Target::binary(false),
        )?;
        let extracted = extractor.extract_dialogue(&dialogue)?;
        let mut score = params.bias + topic.map_or(0.0, |t| t.offset);
        for (k, (plan, s)) in plans.iter().zip(&params.signals).enumerate() {
            let mean = extracted
                .iter()
                .map(|f| feature_value(f, plan))
                .sum::<f64>()
                / extracted.len() as f64;
            features[k].push(mean);
            score += s.weight * mean;
        }
        if params.noise_sd > 0.0 {
            score += params.noise_sd * normal.sample(&mut rng);
        }
        latent.push(score);
        raw.push(dialogue);
    }

    let threshold = match params.task {
        TaskKind::Binary => {
            let mut sorted = latent.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            Some(if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            })
        }
        TaskKind::Regression => None,
    };
    let mut dialogues = Vec::with_capacity(raw.len());
    for (mut d, &score) in raw.into_iter().zip(&latent) {
        d.target = match threshold {
            Some(t) => Target::binary(score > t),
            None => {
                if !(REGRESSION_MIN..=REGRESSION_MAX).contains(&score) {
                    return Err(SynthError::Infeasible(format!(
                        "target {score} of '{}' falls outside [{REGRESSION_MIN}, {REGRESSION_MAX}]",
                        d.id
                    )));
                }
                Target::regression(score)
            }
        };
        dialogues.push(d);
    }
    if params.task == TaskKind::Binary {
        let positives = dialogues.iter().filter(|d| d.target.value == 1.0).count();
        if positives == 0 || positives == dialogues.len() {
            return Err(SynthError::Infeasible(
                "labels collapsed to a single class".into(),
            ));
        }
    }

    let truth = GroundTruth {
        weights: params
            .signals
            .iter()
            .map(|s| (s.column.clone(), s.weight))
            .collect(),
        bias: params.bias,
        noise_sd: params.noise_sd,
        topic_offsets: params
            .topics
            .iter()
            .map(|t| (t.name.clone(), t.offset))
            .collect(),
        features: params
            .signals
            .iter()
            .zip(features)
            .map(|(s, f)| (s.column.clone(), f))
            .collect(),
        latent,
        threshold,
        seed: params.seed,
    };
    Ok(SynthOutput {
        corpus: Corpus::new(dialogues, params.task)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{build_matrix, AggregationOptions, FeatureSources};
    use crate::models::fit_ridge;
    use crate::registry::Registry;

    fn extractor() -> MarkerExtractor {
        MarkerExtractor::default()
    }

    #[test]
    fn filler_words_fire_nothing() {
        let text = format!("{}.", FILLER_WORDS.join(" "));
        let d =
            Dialogue::new("f", "t", None, [("a", text.as_str())], Target::binary(true)).unwrap();
        let f = &extractor().extract_dialogue(&d).unwrap()[0];
        assert!(f.politeness.values.iter().all(|(_, v)| *v == 0.0));
        let counted: f64 = f.collaboration.values[1..9].iter().map(|(_, v)| v).sum();
        assert_eq!(counted, 0.0);
    }

    #[test]
    fn zero_noise_recovers_weights() {
        let out = generate(&SynthParams::planted_regression(150, 7), &extractor()).unwrap();
        let mut discrete = BTreeMap::new();
        for d in out.corpus.dialogues() {
            discrete.insert(d.id.clone(), extractor().extract_dialogue(d).unwrap());
        }
        let registry = Registry::builtin();
        let options = AggregationOptions::new([FeatureSet::PM, FeatureSet::CM]);
        let sources = FeatureSources {
            discrete: Some(&discrete),
            annotations: None,
        };
        let matrix = build_matrix(&out.corpus, sources, &registry, &options).unwrap();
        let cols: Vec<String> = out.truth.weights.keys().cloned().collect();
        let sub = matrix.select_columns(&cols).unwrap();
        for (c, truth) in &out.truth.features {
            assert_eq!(&sub.column(c).unwrap(), truth);
        }
        let model = fit_ridge(sub.values.view(), &sub.targets, 1e-9, false).unwrap();
        let (w, b) = model.raw_scale_coefficients();
        for (j, c) in cols.iter().enumerate() {
            assert!((w[j] - out.truth.weights[c]).abs() < 1e-3, "{c}: {}", w[j]);
        }
        assert!((b - out.truth.bias).abs() < 1e-3);
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let write = |seed| {
            let out = generate(&SynthParams::planted_binary(40, seed), &extractor()).unwrap();
            let mut buf = Vec::new();
            out.corpus.write_jsonl(&mut buf).unwrap();
            buf
        };
        assert_eq!(write(3), write(3));
        assert_ne!(write(3), write(4));
    }

    #[test]
    fn more_thanks_means_higher_targets() {
        let mut params = SynthParams::planted_regression(200, 1);
        params.signals.truncate(1);
        let out = generate(&params, &extractor()).unwrap();
        let g = &out.truth.features["PM - Gratitude, mean"];
        let r = crate::metrics::spearman(g, &out.corpus.targets())
            .unwrap()
            .value;
        assert!(r > 0.99, "{r}");
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut params = SynthParams::planted_binary(20, 0);
        params.signals[0].column = "DT - Asking questions, mean".into();
        assert!(matches!(
            generate(&params, &extractor()),
            Err(SynthError::Infeasible(_))
        ));
        let mut params = SynthParams::planted_binary(20, 0);
        params.signals[0].token = "river".into();
        assert!(matches!(
            generate(&params, &extractor()),
            Err(SynthError::Infeasible(_))
        ));
        let mut params = SynthParams::planted_regression(20, 0);
        params.bias = 6.5;
        assert!(matches!(
            generate(&params, &extractor()),
            Err(SynthError::Infeasible(_))
        ));
    }
}
