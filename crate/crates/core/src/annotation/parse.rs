use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A response that could not be turned into an annotation. The raw response
/// is kept so it can be audited.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum ParseErrorKind {
    #[error("missing flag '{0}'")]
    MissingFlag(String),
    #[error("concluding phrase not found")]
    MissingPhrase,
    #[error("no number after the concluding phrase")]
    MissingNumber,
    #[error("score {0} outside [0,10]")]
    OutOfRange(f64),
    #[error("no number in response")]
    NoNumber,
}

fn fail<T>(kind: ParseErrorKind, response: &str) -> Result<T, ParseError> {
    Err(ParseError {
        kind,
        response: response.to_string(),
    })
}

/// Rebuttal levels in ascending order, with both level-4 tactics.
pub const REBUTTAL_FLAGS: [&str; 9] = [
    "Level 0",
    "Level 1",
    "Level 2",
    "Level 3",
    "Level 4 (Stating your stance)",
    "Level 4 (Repeated argument)",
    "Level 5",
    "Level 6",
    "Level 7",
];

pub const COORDINATION_FLAGS: [&str; 9] = [
    "Label A", "Label B", "Label C", "Label D", "Label E", "Label F", "Label G", "Label H",
    "Label I",
];

/// Registry feature names for the 18 dispute-tactics flags, in flag order.
pub const DISPUTE_FEATURES: [&str; 18] = [
    "Name calling/hostility",
    "Ad hominem/ad argument",
    "Attempted derailing/off-topic",
    "Policing the discussion",
    "Stating your stance",
    "Repeated argument",
    "Counterargument",
    "Refutation",
    "Refuting the central point",
    "Bailing out",
    "Contextualisation",
    "Asking questions",
    "Providing clarification",
    "Suggesting a compromise",
    "Coordinating",
    "Conceding/recanting",
    "I don't know",
    "Other",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeTacticsAnnotation {
    /// Indexed like [`REBUTTAL_FLAGS`].
    pub levels: [u8; 9],
    /// Indexed like [`COORDINATION_FLAGS`].
    pub labels: [u8; 9],
}

impl DisputeTacticsAnnotation {
    /// `(feature name, value)` in registry order.
    pub fn features(&self) -> Vec<(&'static str, f64)> {
        DISPUTE_FEATURES
            .iter()
            .zip(self.levels.iter().chain(self.labels.iter()))
            .map(|(name, v)| (*name, f64::from(*v)))
            .collect()
    }

    pub fn to_response_text(&self) -> String {
        REBUTTAL_FLAGS
            .iter()
            .zip(self.levels)
            .chain(COORDINATION_FLAGS.iter().zip(self.labels))
            .map(|(flag, v)| format!("- {flag}: {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

static DISPUTE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?im)^(?:[\s>*\-•+]|\d+[.)])*\**\s*(level|label)\s*([0-7a-i])\b([^:\n]*?):\**\s*\[?\s*([01])(\s*/\s*[01])?",
    )
    .unwrap()
});

/// Reads the 18 `Level k` / `Label X` flags. The two level-4 lines are told
/// apart by "stance" or "repeat" in their description, falling back to order
/// of appearance.
pub fn parse_dispute_tactics(response: &str) -> Result<DisputeTacticsAnnotation, ParseError> {
    let mut levels: [Option<u8>; 9] = [None; 9];
    let mut labels: [Option<u8>; 9] = [None; 9];
    let mut untagged_level4: Vec<u8> = Vec::new();

    for cap in DISPUTE_LINE.captures_iter(response) {
        if cap.get(5).is_some() {
            // An unfilled "[1/0]" placeholder.
            continue;
        }
        let value: u8 = if &cap[4] == "1" { 1 } else { 0 };
        let id = cap[2].to_ascii_lowercase();
        let descriptor = cap[3].to_ascii_lowercase();
        if cap[1].eq_ignore_ascii_case("label") {
            let c = id.chars().next().unwrap();
            if c.is_ascii_alphabetic() {
                labels[(c as u8 - b'a') as usize] = Some(value);
            }
            continue;
        }
        let Some(k) = id.chars().next().and_then(|c| c.to_digit(10)) else {
            continue;
        };
        let slot = match k {
            0..=3 => k as usize,
            4 if descriptor.contains("stance") => 4,
            4 if descriptor.contains("repeat") => 5,
            4 => {
                untagged_level4.push(value);
                continue;
            }
            _ => k as usize + 1,
        };
        levels[slot] = Some(value);
    }
    for value in untagged_level4 {
        if levels[4].is_none() {
            levels[4] = Some(value);
        } else if levels[5].is_none() {
            levels[5] = Some(value);
        }
    }

    let mut out = DisputeTacticsAnnotation {
        levels: [0; 9],
        labels: [0; 9],
    };
    for (i, v) in levels.iter().enumerate() {
        match v {
            Some(v) => out.levels[i] = *v,
            None => {
                return fail(
                    ParseErrorKind::MissingFlag(REBUTTAL_FLAGS[i].into()),
                    response,
                )
            }
        }
    }
    for (i, v) in labels.iter().enumerate() {
        match v {
            Some(v) => out.labels[i] = *v,
            None => {
                return fail(
                    ParseErrorKind::MissingFlag(COORDINATION_FLAGS[i].into()),
                    response,
                )
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoaAnnotation {
    pub score: f64,
    pub raw_response: String,
}

static QOA_PHRASE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)quality[\W_]+score[\W_]+of[\W_]+the[\W_]+discussion[\W_]+is").unwrap()
});
static QOA_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[\W_&&[^-]]|-\s)*(-?\d+(?:\.\d+)?)").unwrap());

/// Score after the last "the quality score of the discussion is" phrase.
/// Scores outside [0,10] are rejected, never clamped.
pub fn parse_qoa(response: &str) -> Result<QoaAnnotation, ParseError> {
    let Some(phrase) = QOA_PHRASE.find_iter(response).last() else {
        return fail(ParseErrorKind::MissingPhrase, response);
    };
    let rest = &response[phrase.end()..];
    let Some(cap) = QOA_NUMBER.captures(rest) else {
        return fail(ParseErrorKind::MissingNumber, response);
    };
    let score: f64 = cap[1].parse().expect("regex guarantees a number");
    if !(0.0..=10.0).contains(&score) {
        return fail(ParseErrorKind::OutOfRange(score), response);
    }
    Ok(QoaAnnotation {
        score,
        raw_response: response.to_string(),
    })
}

static FIRST_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?").unwrap());

/// First number in a free-text response (n-shot baselines).
pub fn parse_number(response: &str) -> Result<f64, ParseError> {
    match FIRST_NUMBER.find(response) {
        Some(m) => Ok(m.as_str().parse().expect("regex guarantees a number")),
        None => fail(ParseErrorKind::NoNumber, response),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LowHigh {
    pub low: u8,
    pub high: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sentiment {
    pub negative: u8,
    pub neutral: u8,
    pub positive: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Uncertainty {
    pub epistemic: u8,
    pub doxastic: u8,
    pub investigative: u8,
    pub conditional: u8,
    pub none: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoStyleAnnotation {
    pub frazier: LowHigh,
    pub yngve: LowHigh,
    pub p_density: LowHigh,
    pub c_density: LowHigh,
    pub formality: LowHigh,
    pub politeness: LowHigh,
    pub sentiment: Sentiment,
    pub uncertainty: Uncertainty,
    /// Set when the raw flags broke a one-hot constraint and were fixed.
    pub repaired: bool,
}

/// Response line labels in prompt order.
pub const INFO_STYLE_FLAGS: [&str; 20] = [
    "Low Frazier Score",
    "High Frazier Score",
    "Low Yngve Score",
    "High Yngve Score",
    "Low Propositional Density",
    "High Propositional Density",
    "Low Content Density",
    "High Content Density",
    "Low Formality",
    "High Formality",
    "Low Politeness",
    "High Politeness",
    "Negative Sentiment",
    "Neutral Sentiment",
    "Positive Sentiment",
    "Epistemic Uncertainty",
    "Doxastic Uncertainty",
    "Investigative Uncertainty",
    "Conditional Uncertainty",
    "No Uncertainty",
];

impl InfoStyleAnnotation {
    fn flags(&self) -> [u8; 20] {
        let u = &self.uncertainty;
        [
            self.frazier.low,
            self.frazier.high,
            self.yngve.low,
            self.yngve.high,
            self.p_density.low,
            self.p_density.high,
            self.c_density.low,
            self.c_density.high,
            self.formality.low,
            self.formality.high,
            self.politeness.low,
            self.politeness.high,
            self.sentiment.negative,
            self.sentiment.neutral,
            self.sentiment.positive,
            u.epistemic,
            u.doxastic,
            u.investigative,
            u.conditional,
            u.none,
        ]
    }

    fn from_flags(f: [u8; 20], repaired: bool) -> Self {
        let pair = |i: usize| LowHigh {
            low: f[i],
            high: f[i + 1],
        };
        InfoStyleAnnotation {
            frazier: pair(0),
            yngve: pair(2),
            p_density: pair(4),
            c_density: pair(6),
            formality: pair(8),
            politeness: pair(10),
            sentiment: Sentiment {
                negative: f[12],
                neutral: f[13],
                positive: f[14],
            },
            uncertainty: Uncertainty {
                epistemic: f[15],
                doxastic: f[16],
                investigative: f[17],
                conditional: f[18],
                none: f[19],
            },
            repaired,
        }
    }

    /// Information-content features `(name, value)`, registry order.
    /// The Frazier/Yngve flags come last and only with `include_optional`.
    pub fn ic_features(&self, include_optional: bool) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("Low propositional density", f64::from(self.p_density.low)),
            ("High propositional density", f64::from(self.p_density.high)),
            ("Low content density", f64::from(self.c_density.low)),
            ("High content density", f64::from(self.c_density.high)),
        ];
        if include_optional {
            out.extend([
                ("Low Frazier score", f64::from(self.frazier.low)),
                ("High Frazier score", f64::from(self.frazier.high)),
                ("Low Yngve score", f64::from(self.yngve.low)),
                ("High Yngve score", f64::from(self.yngve.high)),
            ]);
        }
        out
    }

    /// Style-and-tone features `(name, value)`, registry order.
    pub fn st_features(&self) -> Vec<(&'static str, f64)> {
        let u = &self.uncertainty;
        vec![
            ("Low formality", f64::from(self.formality.low)),
            ("High formality", f64::from(self.formality.high)),
            ("Low politeness", f64::from(self.politeness.low)),
            ("High politeness", f64::from(self.politeness.high)),
            ("Negative sentiment", f64::from(self.sentiment.negative)),
            ("Neutral sentiment", f64::from(self.sentiment.neutral)),
            ("Positive sentiment", f64::from(self.sentiment.positive)),
            ("Epistemic uncertainty", f64::from(u.epistemic)),
            ("Doxastic uncertainty", f64::from(u.doxastic)),
            ("Investigative uncertainty", f64::from(u.investigative)),
            ("Conditional uncertainty", f64::from(u.conditional)),
            ("No uncertainty", f64::from(u.none)),
        ]
    }

    /// A well-formed response that parses back to these flags.
    pub fn to_response_text(&self) -> String {
        INFO_STYLE_FLAGS
            .iter()
            .zip(self.flags())
            .map(|(flag, v)| format!("- {flag}: {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

static INFO_FLAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(low|high|negative|neutral|positive|epistemic|doxastic|investigative|conditional|no)[\s_]+(frazier(?:[\s_]+score)?|yngve(?:[\s_]+score)?|propositional[\s_]+density|content[\s_]+density|formality|politeness|sentiment|uncertainty)\b[\s*]*[:=\-]?[\s*]*\[?\s*([01])(\s*/\s*[01])?",
    )
    .unwrap()
});

fn flag_index(qualifier: &str, dimension: &str) -> Option<usize> {
    let q = qualifier.to_ascii_lowercase();
    let d = dimension.to_ascii_lowercase();
    let d = d
        .split(|c: char| c.is_whitespace() || c == '_')
        .next()
        .unwrap_or("");
    let base = match d {
        "frazier" => 0,
        "yngve" => 2,
        "propositional" => 4,
        "content" => 6,
        "formality" => 8,
        "politeness" => 10,
        "sentiment" => {
            return match q.as_str() {
                "negative" => Some(12),
                "neutral" => Some(13),
                "positive" => Some(14),
                _ => None,
            }
        }
        "uncertainty" => {
            return match q.as_str() {
                "epistemic" => Some(15),
                "doxastic" => Some(16),
                "investigative" => Some(17),
                "conditional" => Some(18),
                "no" => Some(19),
                _ => None,
            }
        }
        _ => return None,
    };
    match q.as_str() {
        "low" => Some(base),
        "high" => Some(base + 1),
        _ => None,
    }
}

/// Keeps one flag of a one-hot group. Returns whether anything changed.
/// Several 1s keep the one asserted last; all 0s set `fallback`.
fn one_hot(
    flags: &mut [u8; 20],
    positions: &[usize; 20],
    group: &[usize],
    fallback: usize,
) -> bool {
    let on: Vec<usize> = group.iter().copied().filter(|&i| flags[i] == 1).collect();
    match on.len() {
        1 => false,
        0 => {
            flags[fallback] = 1;
            true
        }
        _ => {
            let keep = *on.iter().max_by_key(|&&i| positions[i]).unwrap();
            for i in on {
                flags[i] = u8::from(i == keep);
            }
            true
        }
    }
}

/// Reads the 20 info/style flags (several may share a line) and repairs
/// broken one-hot groups: a low/high pair or the sentiment triple with
/// several 1s keeps the flag asserted last; with none set, "low" or
/// "neutral" is chosen. "No uncertainty" is cleared when a type is set and
/// set when nothing is.
pub fn parse_info_style(response: &str) -> Result<InfoStyleAnnotation, ParseError> {
    let mut seen: [Option<u8>; 20] = [None; 20];
    let mut positions = [0usize; 20];
    for cap in INFO_FLAG.captures_iter(response) {
        if cap.get(4).is_some() {
            continue;
        }
        if let Some(i) = flag_index(&cap[1], &cap[2]) {
            seen[i] = Some(u8::from(&cap[3] == "1"));
            positions[i] = cap.get(0).unwrap().start();
        }
    }
    let mut flags = [0u8; 20];
    for (i, v) in seen.iter().enumerate() {
        match v {
            Some(v) => flags[i] = *v,
            None => {
                return fail(
                    ParseErrorKind::MissingFlag(INFO_STYLE_FLAGS[i].into()),
                    response,
                )
            }
        }
    }

    let mut repaired = false;
    for low in [0, 2, 4, 6, 8, 10] {
        repaired |= one_hot(&mut flags, &positions, &[low, low + 1], low);
    }
    repaired |= one_hot(&mut flags, &positions, &[12, 13, 14], 13);
    let any_type = flags[15..19].contains(&1);
    if any_type && flags[19] == 1 {
        flags[19] = 0;
        repaired = true;
    } else if !any_type && flags[19] == 0 {
        flags[19] = 1;
        repaired = true;
    }
    Ok(InfoStyleAnnotation::from_flags(flags, repaired))
}
