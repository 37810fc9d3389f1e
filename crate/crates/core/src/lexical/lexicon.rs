use std::collections::HashSet;
use std::path::Path;

use super::tokenize::tokenize;
use super::LexicalError;

/// A versioned word/phrase list. Phrases are stored as token sequences produced
/// by the same tokenizer that processes utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub version: String,
    entries: Vec<Vec<String>>,
    words: HashSet<String>,
    max_len: usize,
}

impl Lexicon {
    /// Parses the lexicon file format: one entry per line, `#` starts a
    /// comment, and a `# version: <v>` comment sets the version.
    pub fn parse(name: &str, source: &str) -> Result<Self, LexicalError> {
        let mut version = String::from("unversioned");
        let mut entries = Vec::new();
        for line in source.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let tokens = tokenize(line).tokens;
            if tokens.is_empty() {
                return Err(LexicalError::InvalidLexicon {
                    name: name.to_string(),
                    message: format!("entry '{line}' has no word tokens"),
                });
            }
            if !entries.contains(&tokens) {
                entries.push(tokens);
            }
        }
        Self::from_entries(name, &version, entries)
    }

    pub fn from_words<I, S>(name: &str, words: I) -> Result<Self, LexicalError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = words
            .into_iter()
            .map(|w| tokenize(w.as_ref()).tokens)
            .collect();
        Self::from_entries(name, "inline", entries)
    }

    fn from_entries(
        name: &str,
        version: &str,
        entries: Vec<Vec<String>>,
    ) -> Result<Self, LexicalError> {
        if entries.is_empty() || entries.iter().any(Vec::is_empty) {
            return Err(LexicalError::InvalidLexicon {
                name: name.to_string(),
                message: "lexicon has no entries".into(),
            });
        }
        let words = entries
            .iter()
            .filter(|e| e.len() == 1)
            .map(|e| e[0].clone())
            .collect();
        let max_len = entries.iter().map(Vec::len).max().unwrap_or(1);
        Ok(Lexicon {
            name: name.to_string(),
            version: version.to_string(),
            entries,
            words,
            max_len,
        })
    }

    pub fn load(name: &str, path: &Path) -> Result<Self, LexicalError> {
        let source =
            std::fs::read_to_string(path).map_err(|source| LexicalError::MissingLexicon {
                name: name.to_string(),
                path: path.display().to_string(),
                source,
            })?;
        Self::parse(name, &source)
    }

    pub fn entries(&self) -> &[Vec<String>] {
        &self.entries
    }

    /// Whether a single token is a one-word entry.
    pub fn contains_word(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    /// Length of the longest entry matching `tokens` at position `start`.
    pub fn match_at(&self, tokens: &[String], start: usize) -> Option<usize> {
        let longest = self.max_len.min(tokens.len().saturating_sub(start));
        (1..=longest).rev().find(|&len| {
            let window = &tokens[start..start + len];
            if len == 1 {
                self.words.contains(&window[0])
            } else {
                self.entries.iter().any(|e| e.as_slice() == window)
            }
        })
    }

    /// Start positions of greedy, non-overlapping, longest-first matches.
    pub fn match_starts(&self, tokens: &[String]) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.match_at(tokens, i) {
                Some(len) => {
                    starts.push(i);
                    i += len;
                }
                None => i += 1,
            }
        }
        starts
    }

    pub fn count(&self, tokens: &[String]) -> usize {
        self.match_starts(tokens).len()
    }

    pub fn any(&self, tokens: &[String]) -> bool {
        (0..tokens.len()).any(|i| self.match_at(tokens, i).is_some())
    }

    /// Whether an entry matches at the first token.
    pub fn starts(&self, tokens: &[String]) -> bool {
        self.match_at(tokens, 0).is_some()
    }
}

macro_rules! lexicon_set {
    ($($field:ident => $file:literal),+ $(,)?) => {
        /// Every word list the marker rules consult. Rules read only these
        /// lists, so lexicon revisions never require code changes.
        #[derive(Debug, Clone, PartialEq)]
        pub struct LexiconSet {
            $(pub $field: Lexicon,)+
        }

        impl LexiconSet {
            /// File names expected by [`LexiconSet::from_dir`].
            pub const FILES: &'static [&'static str] = &[$($file),+];

            /// Lexicons bundled with the crate.
            pub fn builtin() -> Self {
                LexiconSet {
                    $($field: Lexicon::parse(
                        stringify!($field),
                        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/lexicons/", $file)),
                    )
                    .expect("bundled lexicon is valid"),)+
                }
            }

            /// Loads every lexicon from `dir`; a missing file is an error.
            pub fn from_dir(dir: &Path) -> Result<Self, LexicalError> {
                Ok(LexiconSet {
                    $($field: Lexicon::load(stringify!($field), &dir.join($file))?,)+
                })
            }

            /// `(name, version)` for every lexicon, in declaration order.
            pub fn versions(&self) -> Vec<(String, String)> {
                vec![$((self.$field.name.clone(), self.$field.version.clone())),+]
            }

            pub fn get_mut(&mut self, name: &str) -> Option<&mut Lexicon> {
                match name {
                    $(stringify!($field) => Some(&mut self.$field),)+
                    _ => None,
                }
            }
        }
    };
}

lexicon_set! {
    please => "please.txt",
    by_the_way => "by_the_way.txt",
    hedges => "hedges.txt",
    factuality => "factuality.txt",
    deference => "deference.txt",
    gratitude => "gratitude.txt",
    apology => "apology.txt",
    first_person_plural => "first_person_plural.txt",
    first_person_singular => "first_person_singular.txt",
    second_person => "second_person.txt",
    third_person => "third_person.txt",
    greetings => "greetings.txt",
    question_words => "question_words.txt",
    conjunctions => "conjunctions.txt",
    positive => "positive.txt",
    negative => "negative.txt",
    subjunctive => "subjunctive.txt",
    indicative => "indicative.txt",
    certainty => "certainty.txt",
    geography => "geography.txt",
    meta => "meta.txt",
    stopwords => "stopwords.txt",
}

impl LexiconSet {
    /// Replaces one lexicon by name (e.g. dataset-specific meta terms).
    pub fn replace(&mut self, name: &str, mut lexicon: Lexicon) -> Result<(), LexicalError> {
        let slot = self
            .get_mut(name)
            .ok_or_else(|| LexicalError::UnknownLexicon(name.to_string()))?;
        lexicon.name = name.to_string();
        *slot = lexicon;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens
    }

    #[test]
    fn parses_version_comments_and_phrases() {
        let lex = Lexicon::parse("x", "# version: 2.1\n# comment\nmaybe\n\nby the way\n").unwrap();
        assert_eq!(lex.version, "2.1");
        assert_eq!(lex.entries().len(), 2);
        assert_eq!(lex.entries()[1], vec!["by", "the", "way"]);
    }

    #[test]
    fn empty_lexicon_is_rejected() {
        assert!(Lexicon::parse("x", "# nothing\n").is_err());
    }

    #[test]
    fn longest_match_wins_and_counts_do_not_overlap() {
        let lex = Lexicon::from_words("h", ["i think", "think", "maybe"]).unwrap();
        let t = toks("i think maybe you think");
        assert_eq!(lex.match_at(&t, 0), Some(2));
        assert_eq!(lex.match_starts(&t), vec![0, 2, 4]);
        assert_eq!(lex.count(&t), 3);
    }

    #[test]
    fn builtin_set_loads_and_round_trips_through_a_directory() {
        let set = LexiconSet::builtin();
        assert!(set.gratitude.contains_word("thanks"));
        assert!(set.by_the_way.any(&toks("oh by the way")));

        let dir = tempfile::tempdir().unwrap();
        let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/lexicons");
        for file in LexiconSet::FILES {
            std::fs::copy(assets.join(file), dir.path().join(file)).unwrap();
        }
        assert_eq!(LexiconSet::from_dir(dir.path()).unwrap(), set);

        std::fs::remove_file(dir.path().join("meta.txt")).unwrap();
        assert!(matches!(
            LexiconSet::from_dir(dir.path()),
            Err(LexicalError::MissingLexicon { .. })
        ));
    }

    #[test]
    fn replace_overrides_by_name() {
        let mut set = LexiconSet::builtin();
        set.replace("meta", Lexicon::from_words("m", ["map", "marker"]).unwrap())
            .unwrap();
        assert!(set.meta.contains_word("marker"));
        assert_eq!(set.meta.name, "meta");
        assert!(set
            .replace("nope", Lexicon::from_words("m", ["x"]).unwrap())
            .is_err());
    }
}
