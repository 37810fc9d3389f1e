use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AnnotationError;
use crate::corpus::{Dialogue, Utterance};

pub const SLOT_HISTORY: &str = "{CONVERSATION_HISTORY}";
pub const SLOT_UTTERANCE: &str = "{UTTERANCE}";
pub const SLOT_DIALOGUE: &str = "{INPUT_DIALOGUE}";
pub const SLOT_CONTEXT: &str = "{CONTEXT}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    DisputeTactics,
    Qoa,
    InfoStyle,
    NshotOum,
    NshotWikitactics,
    NshotAfd,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::DisputeTactics => "dispute_tactics",
            TemplateId::Qoa => "qoa",
            TemplateId::InfoStyle => "info_style",
            TemplateId::NshotOum => "nshot_oum",
            TemplateId::NshotWikitactics => "nshot_wikitactics",
            TemplateId::NshotAfd => "nshot_afd",
        }
    }

    /// Utterance-level templates annotate one utterance at a time.
    pub fn is_utterance_level(self) -> bool {
        matches!(self, TemplateId::DisputeTactics | TemplateId::InfoStyle)
    }

    fn file_name(self) -> String {
        format!("{}.txt", self.as_str())
    }

    pub const ALL: [TemplateId; 6] = [
        TemplateId::DisputeTactics,
        TemplateId::Qoa,
        TemplateId::InfoStyle,
        TemplateId::NshotOum,
        TemplateId::NshotWikitactics,
        TemplateId::NshotAfd,
    ];
}

impl std::str::FromStr for TemplateId {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| AnnotationError::UnknownTemplate(s.to_string()))
    }
}

/// A fully rendered prompt plus the fields that identify it in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template_id: TemplateId,
    pub rendered_text: String,
    pub dialogue_id: String,
    pub utterance_index: Option<usize>,
    pub model_name: String,
    pub temperature: f64,
    /// Oldest history utterances dropped to fit the character budget.
    #[serde(default)]
    pub history_dropped: usize,
}

/// Model-facing settings that shape a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSettings {
    pub model_name: String,
    pub temperature: f64,
    /// Character budget for the dispute-tactics history slot; `None` keeps
    /// the full history.
    pub max_history_chars: Option<usize>,
}

impl Default for RequestSettings {
    fn default() -> Self {
        RequestSettings {
            model_name: "mock".into(),
            temperature: 0.0,
            max_history_chars: None,
        }
    }
}

/// Prompt texts with slot markers, plus the per-dataset opening sentence of
/// the quality-of-arguments prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    texts: BTreeMap<TemplateId, String>,
    qoa_contexts: BTreeMap<String, String>,
}

macro_rules! builtin_template {
    ($file:literal) => {
        include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/assets/templates/",
            $file
        ))
    };
}

fn parse_contexts(source: &str) -> Result<BTreeMap<String, String>, AnnotationError> {
    let mut out = BTreeMap::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (tag, sentence) = line.split_once('\t').ok_or_else(|| {
            AnnotationError::InvalidTemplate(format!("qoa_context.tsv line {}: missing tab", i + 1))
        })?;
        out.insert(tag.trim().to_ascii_lowercase(), sentence.trim().to_string());
    }
    Ok(out)
}

/// Replaces slot markers in a single left-to-right pass, so slot values that
/// happen to contain marker text are never substituted again.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    loop {
        let next = slots
            .iter()
            .filter_map(|(marker, value)| rest.find(marker).map(|pos| (pos, *marker, *value)))
            .min_by_key(|(pos, _, _)| *pos);
        match next {
            Some((pos, marker, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + marker.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// `<user_id=speaker> text` lines, one per utterance.
pub fn render_utterances(utterances: &[Utterance]) -> String {
    utterances
        .iter()
        .map(|u| format!("<user_id={}> {}", u.speaker_id, u.text))
        .collect::<Vec<_>>()
        .join("\n")
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        let texts = BTreeMap::from([
            (
                TemplateId::DisputeTactics,
                builtin_template!("dispute_tactics.txt").to_string(),
            ),
            (TemplateId::Qoa, builtin_template!("qoa.txt").to_string()),
            (
                TemplateId::InfoStyle,
                builtin_template!("info_style.txt").to_string(),
            ),
            (
                TemplateId::NshotOum,
                builtin_template!("nshot_oum.txt").to_string(),
            ),
            (
                TemplateId::NshotWikitactics,
                builtin_template!("nshot_wikitactics.txt").to_string(),
            ),
            (
                TemplateId::NshotAfd,
                builtin_template!("nshot_afd.txt").to_string(),
            ),
        ]);
        let qoa_contexts = parse_contexts(builtin_template!("qoa_context.tsv"))
            .expect("bundled contexts are valid");
        PromptTemplates {
            texts,
            qoa_contexts,
        }
    }

    /// Loads `<template_id>.txt` files and `qoa_context.tsv` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, AnnotationError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|e| {
                AnnotationError::InvalidTemplate(format!("{}: {e}", dir.join(name).display()))
            })
        };
        let mut texts = BTreeMap::new();
        for id in TemplateId::ALL {
            texts.insert(id, read(&id.file_name())?);
        }
        let qoa_contexts = parse_contexts(&read("qoa_context.tsv")?)?;
        Ok(PromptTemplates {
            texts,
            qoa_contexts,
        })
    }

    pub fn text(&self, id: TemplateId) -> &str {
        &self.texts[&id]
    }

    pub fn register_context(&mut self, dataset_tag: &str, sentence: &str) {
        self.qoa_contexts
            .insert(dataset_tag.to_ascii_lowercase(), sentence.to_string());
    }

    /// SHA-256 of every template text, for run manifests.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self
            .texts
            .iter()
            .map(|(id, text)| (id.as_str().to_string(), hex::encode(Sha256::digest(text))))
            .collect();
        let contexts = serde_json::to_string(&self.qoa_contexts).unwrap_or_default();
        out.insert("qoa_context".into(), hex::encode(Sha256::digest(contexts)));
        out
    }

    /// Dispute-tactics prompt for utterance `index`, with utterances before it
    /// as history (empty for the first utterance).
    pub fn render_dispute(
        &self,
        dialogue: &Dialogue,
        index: usize,
        settings: &RequestSettings,
    ) -> Result<PromptRequest, AnnotationError> {
        let n = dialogue.utterances.len();
        if index >= n {
            return Err(AnnotationError::UtteranceOutOfRange {
                dialogue_id: dialogue.id.clone(),
                index,
                len: n,
            });
        }
        let mut history = &dialogue.utterances[..index];
        let mut dropped = 0;
        if let Some(budget) = settings.max_history_chars {
            while !history.is_empty() && render_utterances(history).chars().count() > budget {
                history = &history[1..];
                dropped += 1;
            }
        }
        let history_text = render_utterances(history);
        let utterance = &dialogue.utterances[index];
        let utterance_text = format!("<user_id={}> {}", utterance.speaker_id, utterance.text);
        let rendered_text = fill(
            self.text(TemplateId::DisputeTactics),
            &[
                (SLOT_HISTORY, &history_text),
                (SLOT_UTTERANCE, &utterance_text),
            ],
        );
        Ok(PromptRequest {
            template_id: TemplateId::DisputeTactics,
            rendered_text,
            dialogue_id: dialogue.id.clone(),
            utterance_index: Some(index),
            model_name: settings.model_name.clone(),
            temperature: settings.temperature,
            history_dropped: dropped,
        })
    }

    /// Quality-of-arguments prompt over the whole dialogue, opened by the
    /// sentence registered for the dialogue's dataset tag.
    pub fn render_qoa(
        &self,
        dialogue: &Dialogue,
        settings: &RequestSettings,
    ) -> Result<PromptRequest, AnnotationError> {
        if dialogue.utterances.is_empty() {
            return Err(AnnotationError::EmptyDialogue(dialogue.id.clone()));
        }
        let context = self
            .qoa_contexts
            .get(&dialogue.dataset_tag.to_ascii_lowercase())
            .ok_or_else(|| AnnotationError::UnknownDataset(dialogue.dataset_tag.clone()))?;
        let rendered_text = fill(
            self.text(TemplateId::Qoa),
            &[
                (SLOT_DIALOGUE, &render_utterances(&dialogue.utterances)),
                (SLOT_CONTEXT, context),
            ],
        );
        Ok(PromptRequest {
            template_id: TemplateId::Qoa,
            rendered_text,
            dialogue_id: dialogue.id.clone(),
            utterance_index: None,
            model_name: settings.model_name.clone(),
            temperature: settings.temperature,
            history_dropped: 0,
        })
    }

    /// Information-content and style prompt for one utterance (text only).
    pub fn render_info_style(
        &self,
        dialogue: &Dialogue,
        index: usize,
        settings: &RequestSettings,
    ) -> Result<PromptRequest, AnnotationError> {
        let utterance =
            dialogue
                .utterances
                .get(index)
                .ok_or_else(|| AnnotationError::UtteranceOutOfRange {
                    dialogue_id: dialogue.id.clone(),
                    index,
                    len: dialogue.utterances.len(),
                })?;
        let rendered_text = fill(
            self.text(TemplateId::InfoStyle),
            &[(SLOT_UTTERANCE, &utterance.text)],
        );
        Ok(PromptRequest {
            template_id: TemplateId::InfoStyle,
            rendered_text,
            dialogue_id: dialogue.id.clone(),
            utterance_index: Some(index),
            model_name: settings.model_name.clone(),
            temperature: settings.temperature,
            history_dropped: 0,
        })
    }

    /// N-shot baseline prompt: the dataset prompt with `examples` appended
    /// after it as `(dialogue, target)` demonstrations.
    pub fn render_nshot(
        &self,
        template_id: TemplateId,
        dialogue: &Dialogue,
        examples: &[(&Dialogue, f64)],
        settings: &RequestSettings,
    ) -> Result<PromptRequest, AnnotationError> {
        let (input_label, output_label) = match template_id {
            TemplateId::NshotOum => ("CONVERSATION", "SCORE"),
            TemplateId::NshotWikitactics => ("DISPUTE", "ESCALATION"),
            TemplateId::NshotAfd => ("DEBATE", "OUTCOME"),
            other => return Err(AnnotationError::UnknownTemplate(other.as_str().to_string())),
        };
        let mut rendered_text = fill(
            self.text(template_id),
            &[(SLOT_DIALOGUE, &render_utterances(&dialogue.utterances))],
        );
        if !examples.is_empty() {
            rendered_text.push_str("\n\nExamples:");
            for (example, target) in examples {
                rendered_text.push_str(&format!(
                    "\n{input_label}: \"{}\"\n{output_label}: {}",
                    render_utterances(&example.utterances),
                    target
                ));
            }
        }
        Ok(PromptRequest {
            template_id,
            rendered_text,
            dialogue_id: dialogue.id.clone(),
            utterance_index: None,
            model_name: settings.model_name.clone(),
            temperature: settings.temperature,
            history_dropped: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Target;

    fn dialogue(tag: &str, n: usize) -> Dialogue {
        Dialogue::new(
            "d1",
            tag,
            None,
            (0..n).map(|i| (format!("u{}", i % 2), format!("text {i}"))),
            Target::binary(true),
        )
        .unwrap()
    }

    fn slot_value<'a>(rendered: &'a str, template: &str, slot: &str) -> &'a str {
        let (prefix, suffix) = template.split_once(slot).unwrap();
        let prefix_end = prefix.len();
        let suffix_start = rendered[prefix_end..]
            .find(suffix.split('{').next().unwrap())
            .unwrap();
        &rendered[prefix_end..prefix_end + suffix_start]
    }

    #[test]
    fn first_utterance_has_empty_history() {
        let t = PromptTemplates::builtin();
        let req = t
            .render_dispute(&dialogue("wikitactics", 3), 0, &RequestSettings::default())
            .unwrap();
        assert!(req
            .rendered_text
            .contains("*CONVERSATION HISTORY*: \"\"\n*NEW UTTERANCE*: \"<user_id=u0> text 0\""));
        assert_eq!(req.utterance_index, Some(0));
    }

    #[test]
    fn history_holds_prior_utterances_in_order() {
        let t = PromptTemplates::builtin();
        let req = t
            .render_dispute(&dialogue("wikitactics", 3), 2, &RequestSettings::default())
            .unwrap();
        let history = slot_value(
            &req.rendered_text,
            t.text(TemplateId::DisputeTactics),
            SLOT_HISTORY,
        );
        assert_eq!(history, "<user_id=u0> text 0\n<user_id=u1> text 1");
        assert!(t
            .render_dispute(&dialogue("wikitactics", 3), 5, &RequestSettings::default())
            .is_err());
    }

    #[test]
    fn history_budget_drops_oldest_first() {
        let t = PromptTemplates::builtin();
        let settings = RequestSettings {
            max_history_chars: Some(25),
            ..Default::default()
        };
        let req = t
            .render_dispute(&dialogue("wikitactics", 4), 3, &settings)
            .unwrap();
        assert_eq!(req.history_dropped, 2);
        assert!(req.rendered_text.contains("\"<user_id=u0> text 2\""));
    }

    #[test]
    fn qoa_prompt_uses_dataset_context() {
        let t = PromptTemplates::builtin();
        let d = dialogue("wikitactics", 2);
        let a = t.render_qoa(&d, &RequestSettings::default()).unwrap();
        assert!(a.rendered_text.starts_with("<user_id=u0> text 0\n<user_id=u1> text 1\n\nThe texts above show a dialogue with respect to a potentially controversial edit between two or more individuals from Wikipedia Talk pages."));
        assert!(a
            .rendered_text
            .ends_with("'Thus, the quality score of the discussion is: X', where X is the numeric score (real number) you've determined."));
        let b = t.render_qoa(&d, &RequestSettings::default()).unwrap();
        assert_eq!(a.rendered_text, b.rendered_text);
        assert!(matches!(
            t.render_qoa(&dialogue("reddit", 2), &RequestSettings::default()),
            Err(AnnotationError::UnknownDataset(_))
        ));
    }

    #[test]
    fn slot_text_is_not_resubstituted() {
        let t = PromptTemplates::builtin();
        let d = Dialogue::new(
            "x",
            "oum",
            None,
            [("a", "literal {UTTERANCE} marker")],
            Target::regression(2.0),
        )
        .unwrap();
        let req = t
            .render_info_style(&d, 0, &RequestSettings::default())
            .unwrap();
        assert!(req
            .rendered_text
            .starts_with("UTTERANCE: \"literal {UTTERANCE} marker\"\n"));
    }

    #[test]
    fn nshot_examples_are_appended_only() {
        let t = PromptTemplates::builtin();
        let d = dialogue("oum", 2);
        let ex = dialogue("oum", 1);
        let s = RequestSettings::default();
        let zero = t.render_nshot(TemplateId::NshotOum, &d, &[], &s).unwrap();
        let five = t
            .render_nshot(TemplateId::NshotOum, &d, &[(&ex, 3.0); 5], &s)
            .unwrap();
        assert!(zero.rendered_text.ends_with("SCORE:"));
        assert!(five.rendered_text.starts_with(&zero.rendered_text));
        let block = &five.rendered_text[zero.rendered_text.len()..];
        assert_eq!(block.matches("\nSCORE: 3").count(), 5);
        assert!(t.render_nshot(TemplateId::Qoa, &d, &[], &s).is_err());
    }

    #[test]
    fn directory_templates_match_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/templates");
        let t = PromptTemplates::from_dir(&dir).unwrap();
        assert_eq!(t, PromptTemplates::builtin());
        assert_eq!(t.hashes().len(), 7);
    }
}
