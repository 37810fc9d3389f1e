//! Heuristic politeness and collaboration markers.
//!
//! Two approximations are deliberate: "Has subject hedge" fires when a hedge
//! starts within the first four tokens of a sentence (no dependency parse), and
//! content words are alphabetic tokens outside the stopword list (no POS tags).

mod lexicon;
mod tokenize;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dialogue;
use crate::registry::FeatureSet;

pub use lexicon::{Lexicon, LexiconSet};
pub use tokenize::{tokenize, TokenizedUtterance};

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("lexicon '{name}' not found at {path}: {source}")]
    MissingLexicon {
        name: String,
        path: String,
        source: std::io::Error,
    },
    #[error("invalid lexicon '{name}': {message}")]
    InvalidLexicon { name: String, message: String },
    #[error("unknown lexicon '{0}'")]
    UnknownLexicon(String),
    #[error("lexical state belongs to dialogue '{state}', not '{dialogue}'")]
    StateMismatch { state: String, dialogue: String },
    #[error("utterance {got} processed out of order (expected {expected})")]
    OutOfOrder { expected: usize, got: usize },
}

/// Politeness marker names in registry order.
pub const POLITENESS_FEATURES: [&str; 21] = [
    "Please",
    "Start with 'Please'",
    "Has subject hedge",
    "Use of 'by the way'",
    "Hedge words",
    "Assert factuality",
    "Start with deference",
    "Gratitude",
    "Apologising",
    "1st person plural",
    "1st person pronouns",
    "Start with 1st person",
    "2nd person pronouns",
    "Start with 2nd person",
    "Start with greeting",
    "Starts with question",
    "Starts with conjunction",
    "Positive sentiment words",
    "Negative sentiment words",
    "Subjunctive words",
    "Indicative words",
];

/// Collaboration marker names in registry order.
pub const COLLABORATION_FEATURES: [&str; 12] = [
    "# words",
    "# me pronoun",
    "# we pronoun",
    "# you pronoun",
    "# 3rd person pronouns",
    "# Geography terms",
    "# Meta terms",
    "# Certainty terms",
    "# Hedging terms",
    "# New content words",
    "# New content words * # Certainty terms",
    "# New content words * # Hedging terms",
];

/// Tokens within which a hedge counts as a subject hedge.
const SUBJECT_HEDGE_WINDOW: usize = 4;

/// Named feature values for one utterance, in registry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceFeatureVector {
    pub set: FeatureSet,
    pub values: Vec<(String, f64)>,
}

impl UtteranceFeatureVector {
    pub fn new(set: FeatureSet, names: &[&str], values: &[f64]) -> Self {
        debug_assert_eq!(names.len(), values.len());
        UtteranceFeatureVector {
            set,
            values: names
                .iter()
                .zip(values)
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Content words seen so far in one dialogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueLexicalState {
    dialogue_id: String,
    next_index: usize,
    seen_content_words: BTreeSet<String>,
}

impl DialogueLexicalState {
    pub fn new(dialogue_id: impl Into<String>) -> Self {
        DialogueLexicalState {
            dialogue_id: dialogue_id.into(),
            next_index: 0,
            seen_content_words: BTreeSet::new(),
        }
    }

    pub fn seen_content_words(&self) -> &BTreeSet<String> {
        &self.seen_content_words
    }

    pub fn dialogue_id(&self) -> &str {
        &self.dialogue_id
    }
}

/// Per-utterance PM and CM vectors of one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFeatures {
    pub politeness: UtteranceFeatureVector,
    pub collaboration: UtteranceFeatureVector,
}

/// Applies the marker rules using one lexicon set.
#[derive(Debug, Clone)]
pub struct MarkerExtractor {
    lexicons: LexiconSet,
}

impl Default for MarkerExtractor {
    fn default() -> Self {
        Self::new(LexiconSet::builtin())
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl MarkerExtractor {
    pub fn new(lexicons: LexiconSet) -> Self {
        MarkerExtractor { lexicons }
    }

    pub fn lexicons(&self) -> &LexiconSet {
        &self.lexicons
    }

    /// True when `modal` appears directly after "you" anywhere in the sentence.
    fn modal_after_you(&self, sentence: &[String], modals: &Lexicon) -> bool {
        sentence
            .windows(2)
            .any(|w| w[0] == "you" && modals.contains_word(&w[1]))
    }

    /// The 21 politeness flags; each is 1 when its rule fires in any sentence.
    pub fn politeness(&self, utt: &TokenizedUtterance) -> UtteranceFeatureVector {
        let lx = &self.lexicons;
        let mut v = [false; 21];
        for s in utt.sentence_tokens() {
            let hedge_window = s.len().min(SUBJECT_HEDGE_WINDOW);
            let rules = [
                lx.please.any(s),
                lx.please.starts(s),
                (0..hedge_window).any(|i| lx.hedges.match_at(s, i).is_some()),
                lx.by_the_way.any(s),
                lx.hedges.any(s),
                lx.factuality.any(s),
                lx.deference.starts(s),
                lx.gratitude.any(s),
                lx.apology.any(s),
                lx.first_person_plural.any(s),
                lx.first_person_singular.any(s),
                lx.first_person_singular.starts(s),
                lx.second_person.any(s),
                lx.second_person.starts(s),
                lx.greetings.starts(s),
                lx.question_words.starts(s),
                lx.conjunctions.starts(s),
                lx.positive.any(s),
                lx.negative.any(s),
                self.modal_after_you(s, &lx.subjunctive),
                self.modal_after_you(s, &lx.indicative),
            ];
            for (slot, fired) in v.iter_mut().zip(rules) {
                *slot |= fired;
            }
        }
        let values: Vec<f64> = v.iter().map(|&b| flag(b)).collect();
        UtteranceFeatureVector::new(FeatureSet::PM, &POLITENESS_FEATURES, &values)
    }

    /// Content words: alphabetic tokens outside the stopword list.
    pub fn content_words<'a>(&self, utt: &'a TokenizedUtterance) -> BTreeSet<&'a str> {
        utt.tokens
            .iter()
            .filter(|t| t.chars().all(char::is_alphabetic))
            .filter(|t| !self.lexicons.stopwords.contains_word(t))
            .map(String::as_str)
            .collect()
    }

    /// The 12 collaboration counts. Utterances must arrive in index order with
    /// the same state threaded through; the state absorbs this utterance's
    /// content words after counting.
    pub fn collaboration(
        &self,
        dialogue_id: &str,
        utterance_index: usize,
        utt: &TokenizedUtterance,
        state: &mut DialogueLexicalState,
    ) -> Result<UtteranceFeatureVector, LexicalError> {
        if state.dialogue_id != dialogue_id {
            return Err(LexicalError::StateMismatch {
                state: state.dialogue_id.clone(),
                dialogue: dialogue_id.to_string(),
            });
        }
        if utterance_index != state.next_index {
            return Err(LexicalError::OutOfOrder {
                expected: state.next_index,
                got: utterance_index,
            });
        }
        let lx = &self.lexicons;
        let t = &utt.tokens;
        let content = self.content_words(utt);
        let new_content = content
            .iter()
            .filter(|w| !state.seen_content_words.contains(**w))
            .count() as f64;
        let certainty = lx.certainty.count(t) as f64;
        let hedging = lx.hedges.count(t) as f64;
        let values = [
            t.len() as f64,
            lx.first_person_singular.count(t) as f64,
            lx.first_person_plural.count(t) as f64,
            lx.second_person.count(t) as f64,
            lx.third_person.count(t) as f64,
            lx.geography.count(t) as f64,
            lx.meta.count(t) as f64,
            certainty,
            hedging,
            new_content,
            new_content * certainty,
            new_content * hedging,
        ];
        state
            .seen_content_words
            .extend(content.into_iter().map(str::to_string));
        state.next_index += 1;
        Ok(UtteranceFeatureVector::new(
            FeatureSet::CM,
            &COLLABORATION_FEATURES,
            &values,
        ))
    }

    /// One PM and one CM vector per utterance, in order.
    pub fn extract_dialogue(
        &self,
        dialogue: &Dialogue,
    ) -> Result<Vec<DiscreteFeatures>, LexicalError> {
        let mut state = DialogueLexicalState::new(&dialogue.id);
        dialogue
            .utterances
            .iter()
            .map(|u| {
                let tokens = tokenize(&u.text);
                Ok(DiscreteFeatures {
                    politeness: self.politeness(&tokens),
                    collaboration: self.collaboration(
                        &dialogue.id,
                        u.index,
                        &tokens,
                        &mut state,
                    )?,
                })
            })
            .collect()
    }
}
