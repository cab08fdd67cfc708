//! Text normalization shared by every feature.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characters of raw body text that make up the "intro".
pub const INTRO_CHARS: usize = 250;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Snowball English stem of an already-lowercased token.
pub fn stem(token: &str) -> String {
    stemmer().stem(token).into_owned()
}

/// Parses a word list: one token per line, `#` starts a comment.
pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn load_word_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub stem: bool,
    pub ngram_n: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: parse_word_list(DEFAULT_STOPWORDS),
            stem: true,
            ngram_n: 2,
        }
    }
}

impl PreprocessConfig {
    pub fn with_stopwords(stopwords: BTreeSet<String>) -> Self {
        PreprocessConfig {
            stopwords,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ngram_n == 0 {
            return Err(Error::InvalidArgument("ngram_n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub raw_sentences: Vec<String>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_set(&self) -> HashSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }
}

/// Lowercased maximal alphanumeric runs.
pub fn raw_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

pub fn preprocess(text: &str, cfg: &PreprocessConfig) -> TokenSeq {
    let mut tokens = Vec::new();
    for word in raw_words(text) {
        if cfg.stopwords.contains(&word) {
            continue;
        }
        let token = if cfg.stem { stem(&word) } else { word };
        // a stem can collide with a stopword ("ones" -> "one")
        if token.is_empty() || cfg.stopwords.contains(&token) {
            continue;
        }
        tokens.push(token);
    }
    TokenSeq {
        tokens,
        raw_sentences: split_sentences(text),
    }
}

/// Distinct contiguous windows of `n` tokens.
pub fn ngrams(tokens: &[String], n: usize) -> HashSet<&[String]> {
    assert!(n >= 1, "n-gram size must be at least 1");
    if tokens.len() < n {
        return HashSet::new();
    }
    tokens.windows(n).collect()
}

pub fn intro(body_text: &str) -> String {
    body_text.chars().take(INTRO_CHARS).collect()
}

/// Splits after `.`, `!` or `?` when followed by whitespace or end of text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}
