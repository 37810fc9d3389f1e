//! Canonical feature registry: which features exist, in which column order.
//!
//! The registry file is tab-separated, one feature per line:
//! `<set>\t<feature name>[\t<flag>]` where the optional flag is `dialogue`
//! (one raw column per dialogue rather than mean/grad statistics) or
//! `optional` (left out unless explicitly requested).

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("unknown feature set '{0}'")]
    UnknownSet(String),
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The six feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Politeness markers (heuristic).
    PM,
    /// Collaboration markers (heuristic).
    CM,
    /// Dispute tactics (LLM).
    DT,
    /// Quality of arguments (LLM, dialogue-level).
    QoA,
    /// Information content (LLM).
    IC,
    /// Style and tone (LLM).
    ST,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] = [
        FeatureSet::PM,
        FeatureSet::CM,
        FeatureSet::DT,
        FeatureSet::QoA,
        FeatureSet::IC,
        FeatureSet::ST,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureSet::PM => "PM",
            FeatureSet::CM => "CM",
            FeatureSet::DT => "DT",
            FeatureSet::QoA => "QoA",
            FeatureSet::IC => "IC",
            FeatureSet::ST => "ST",
        }
    }

    /// Heuristic sets need no language model.
    pub fn is_discrete(self) -> bool {
        matches!(self, FeatureSet::PM | FeatureSet::CM)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureSet {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|set| set.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RegistryError::UnknownSet(s.to_string()))
    }
}

/// Granularity at which a feature is annotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Utterance,
    Dialogue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub set: FeatureSet,
    pub name: String,
    pub level: Level,
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    pub version: String,
    entries: Vec<RegistryEntry>,
}

const BUILTIN: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/registry.tsv"));

impl Registry {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled registry is valid")
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let source = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&source)
    }

    pub fn parse(source: &str) -> Result<Self, RegistryError> {
        let mut version = String::from("unversioned");
        let mut entries: Vec<RegistryEntry> = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line_no = i + 1;
            if let Some(comment) = line.trim().strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(RegistryError::Invalid {
                    line: line_no,
                    message: format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let set: FeatureSet = fields[0].parse().map_err(|_| RegistryError::Invalid {
                line: line_no,
                message: format!("unknown feature set '{}'", fields[0]),
            })?;
            let name = fields[1].trim().to_string();
            if name.is_empty() {
                return Err(RegistryError::Invalid {
                    line: line_no,
                    message: "empty feature name".into(),
                });
            }
            let (level, optional) = match fields.get(2).map(|f| f.trim()) {
                None | Some("") => (Level::Utterance, false),
                Some("dialogue") => (Level::Dialogue, false),
                Some("optional") => (Level::Utterance, true),
                Some(other) => {
                    return Err(RegistryError::Invalid {
                        line: line_no,
                        message: format!("unknown flag '{other}'"),
                    })
                }
            };
            if entries.iter().any(|e| e.set == set && e.name == name) {
                return Err(RegistryError::Invalid {
                    line: line_no,
                    message: format!("duplicate feature {set} - {name}"),
                });
            }
            entries.push(RegistryEntry {
                set,
                name,
                level,
                optional,
            });
        }
        Ok(Registry { version, entries })
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    /// Entries of the requested sets in registry order.
    pub fn select(
        &self,
        sets: &BTreeSet<FeatureSet>,
        include_optional: bool,
    ) -> Vec<&RegistryEntry> {
        self.entries
            .iter()
            .filter(|e| sets.contains(&e.set) && (include_optional || !e.optional))
            .collect()
    }

    pub fn names(&self, set: FeatureSet) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.set == set)
            .map(|e| e.name.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry_shape() {
        let reg = Registry::builtin();
        assert_eq!(reg.version, "1.0");
        assert_eq!(reg.names(FeatureSet::PM).len(), 21);
        assert_eq!(reg.names(FeatureSet::CM).len(), 12);
        assert_eq!(reg.names(FeatureSet::DT).len(), 18);
        assert_eq!(reg.names(FeatureSet::QoA), vec!["QoA"]);
        assert_eq!(reg.names(FeatureSet::IC).len(), 8);
        assert_eq!(reg.names(FeatureSet::ST).len(), 12);
        let all: BTreeSet<_> = FeatureSet::ALL.into_iter().collect();
        assert_eq!(reg.select(&all, false).len(), 68);
        assert_eq!(reg.select(&all, true).len(), 72);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Registry::parse("XX\tfoo").is_err());
        assert!(Registry::parse("PM\tfoo\tweird").is_err());
        assert!(Registry::parse("PM\tfoo\nPM\tfoo").is_err());
        assert!(Registry::parse("PM").is_err());
    }

    #[test]
    fn set_tags_parse_case_insensitively() {
        assert_eq!("qoa".parse::<FeatureSet>().unwrap(), FeatureSet::QoA);
        assert!("XY".parse::<FeatureSet>().is_err());
    }
}
