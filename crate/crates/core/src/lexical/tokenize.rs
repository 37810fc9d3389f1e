use std::iter::Peekable;
use std::ops::Range;
use std::str::Chars;

use serde::{Deserialize, Serialize};

/// Lowercased word tokens with sentence spans over token indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedUtterance {
    pub tokens: Vec<String>,
    /// Disjoint, ordered, non-empty token ranges.
    pub sentences: Vec<Range<usize>>,
    pub raw: String,
}

impl TokenizedUtterance {
    pub fn sentence_tokens(&self) -> impl Iterator<Item = &[String]> {
        self.sentences.iter().map(|r| &self.tokens[r.clone()])
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '’' | '”' | ')' | ']' | '}' | '»')
}

/// True when the terminal punctuation just consumed ends a sentence: the next
/// non-closing, non-terminal character is whitespace or the end of input.
fn ends_sentence(rest: &Peekable<Chars<'_>>) -> bool {
    for c in rest.clone() {
        if is_terminal(c) || is_closer(c) {
            continue;
        }
        return c.is_whitespace();
    }
    true
}

/// Splits text into lowercased word tokens and sentences.
///
/// Tokens are maximal runs of alphanumeric characters; an apostrophe or hyphen
/// joins two alphanumeric runs (`don't`, `non-existence`). Every other
/// character is a boundary and is dropped. A sentence ends at `.`, `!` or `?`
/// followed by whitespace or the end of the text.
pub fn tokenize(text: &str) -> TokenizedUtterance {
    let mut tokens: Vec<String> = Vec::new();
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut sentence_start = 0;
    let mut chars = text.chars().peekable();

    fn flush(current: &mut String, tokens: &mut Vec<String>) {
        if !current.is_empty() {
            tokens.push(std::mem::take(current));
        }
    }

    while let Some(c) = chars.next() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            continue;
        }
        let joiner = matches!(c, '\'' | '’' | '-' | '‐');
        if joiner && !current.is_empty() && chars.peek().is_some_and(|n| n.is_alphanumeric()) {
            current.push(if c == '-' || c == '‐' { '-' } else { '\'' });
            continue;
        }
        flush(&mut current, &mut tokens);
        if is_terminal(c) && ends_sentence(&chars) && tokens.len() > sentence_start {
            sentences.push(sentence_start..tokens.len());
            sentence_start = tokens.len();
        }
    }
    flush(&mut current, &mut tokens);
    if tokens.len() > sentence_start {
        sentences.push(sentence_start..tokens.len());
    }

    TokenizedUtterance {
        tokens,
        sentences,
        raw: text.to_string(),
    }
}
