//! Annotation and sentiment sources for the parse- and sentiment-based features.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{raw_words, stem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Headline,
    Body,
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "headline" => Ok(Side::Headline),
            "body" => Ok(Side::Body),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

/// Grammatical subjects and objects of one text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoleSets {
    pub subjects: BTreeSet<String>,
    pub objects: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairAnnotation {
    pub headline: RoleSets,
    pub body: RoleSets,
}

pub trait AnnotationProvider: Send + Sync {
    fn lookup(&self, pair_id: usize) -> Option<&PairAnnotation>;
}

/// Lowercases and (optionally) stems an externally produced token.
pub fn normalize_token(token: &str, stem_tokens: bool) -> Option<String> {
    let joined: Vec<String> = raw_words(token).collect();
    if joined.is_empty() {
        return None;
    }
    let word = joined.join(" ");
    Some(if stem_tokens { stem(&word) } else { word })
}

/// Annotations read from a `pair_id \t side \t role \t token` file.
#[derive(Debug, Default)]
pub struct AnnotationSidecar {
    pairs: HashMap<usize, PairAnnotation>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl AnnotationSidecar {
    pub fn parse(text: &str, stem_tokens: bool) -> Result<Self> {
        let mut pairs: HashMap<usize, PairAnnotation> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| Error::Parse(format!("annotation line {}: {msg}", n + 1));
            if fields.len() != 4 {
                if n == 0 {
                    continue; // header
                }
                return Err(bad("expected 4 tab-separated fields"));
            }
            let Ok(pair_id) = fields[0].trim().parse::<usize>() else {
                if n == 0 {
                    continue;
                }
                return Err(bad("invalid pair id"));
            };
            let side: Side = fields[1].parse().map_err(|e: String| bad(&e))?;
            let Some(token) = normalize_token(fields[3], stem_tokens) else {
                continue;
            };
            let entry = pairs.entry(pair_id).or_default();
            let sets = match side {
                Side::Headline => &mut entry.headline,
                Side::Body => &mut entry.body,
            };
            match fields[2].trim() {
                "subj" => sets.subjects.insert(token),
                "obj" => sets.objects.insert(token),
                other => return Err(bad(&format!("unknown role {other:?}"))),
            };
        }
        Ok(AnnotationSidecar {
            pairs,
            ..Default::default()
        })
    }

    pub fn load(path: impl AsRef<Path>, stem_tokens: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, stem_tokens)
    }

    pub fn insert(&mut self, pair_id: usize, annotation: PairAnnotation) {
        self.pairs.insert(pair_id, annotation);
    }

    /// `(hits, misses)` seen by `lookup`.
    pub fn coverage(&self) -> (usize, usize) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }
}

impl AnnotationProvider for AnnotationSidecar {
    fn lookup(&self, pair_id: usize) -> Option<&PairAnnotation> {
        let found = self.pairs.get(&pair_id);
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }
}

pub trait SentimentProvider: Send + Sync {
    /// Sentence polarity in [-1, 1].
    fn score(&self, sentence: &str) -> f64;
}

const DEFAULT_LEXICON: &str = include_str!("../../data/sentiment_lexicon.tsv");

/// Mean polarity of the lexicon words found in a sentence (0 when none are).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconSentiment {
    scores: BTreeMap<String, f64>,
}

impl Default for LexiconSentiment {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

impl LexiconSentiment {
    /// Parses `token \t score` lines; tokens are stemmed and the first entry wins.
    pub fn parse(text: &str) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(token), Some(score), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!(
                    "lexicon line {}: expected token<TAB>score",
                    n + 1
                )));
            };
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("lexicon line {}: bad score", n + 1)))?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::Parse(format!("lexicon line {}: score outside [-1, 1]", n + 1)));
            }
            scores.entry(stem(&token.trim().to_lowercase())).or_insert(score);
        }
        Ok(LexiconSentiment { scores })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl SentimentProvider for LexiconSentiment {
    fn score(&self, sentence: &str) -> f64 {
        let hits: Vec<f64> = raw_words(sentence)
            .filter_map(|w| self.scores.get(&stem(&w)).copied())
            .collect();
        if hits.is_empty() {
            0.0
        } else {
            hits.iter().sum::<f64>() / hits.len() as f64
        }
    }
}

/// Externally computed sentence scores: `pair_id \t side \t sentence_index \t score`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SentenceScores {
    scores: HashMap<(usize, Side), BTreeMap<usize, f64>>,
}

impl SentenceScores {
    pub fn parse(text: &str) -> Result<Self> {
        let mut scores: HashMap<(usize, Side), BTreeMap<usize, f64>> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse(format!("sentence score line {}", n + 1));
            let parsed = (|| {
                if f.len() != 4 {
                    return None;
                }
                Some((
                    f[0].trim().parse::<usize>().ok()?,
                    f[1].parse::<Side>().ok()?,
                    f[2].trim().parse::<usize>().ok()?,
                    f[3].trim().parse::<f64>().ok()?,
                ))
            })();
            let Some((pair, side, idx, score)) = parsed else {
                if n == 0 {
                    continue; // header
                }
                return Err(bad());
            };
            if !score.is_finite() || !(-1.0..=1.0).contains(&score) {
                return Err(bad());
            }
            scores.entry((pair, side)).or_default().insert(idx, score);
        }
        Ok(SentenceScores { scores })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Mean of the recorded scores for one side of a pair.
    pub fn mean(&self, pair_id: usize, side: Side) -> Option<f64> {
        let s = self.scores.get(&(pair_id, side))?;
        if s.is_empty() {
            return None;
        }
        Some(s.values().sum::<f64>() / s.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_parsing_and_coverage() {
        let s = AnnotationSidecar::parse(
            "pair_id\tside\trole\ttoken\n0\theadline\tsubj\tPolice\n0\tbody\tsubj\tpolice\n0\tbody\tsubj\tofficials\n0\tbody\tobj\tgraves\n",
            true,
        )
        .unwrap();
        let a = s.lookup(0).unwrap();
        assert_eq!(a.headline.subjects.iter().collect::<Vec<_>>(), vec!["polic"]);
        assert_eq!(a.body.subjects.len(), 2);
        assert!(s.lookup(5).is_none());
        assert_eq!(s.coverage(), (1, 1));
        assert!(AnnotationSidecar::parse("0\theadline\tverb\tx\n1\tbody\tverb\ty\n", true).is_err());
    }

    #[test]
    fn lexicon_scoring() {
        let lex = LexiconSentiment::parse("good\t0.5\nbad\t-1\n").unwrap();
        assert_eq!(lex.score("A good day"), 0.5);
        assert_eq!(lex.score("good and bad"), -0.25);
        assert_eq!(lex.score("nothing here"), 0.0);
        assert!(LexiconSentiment::parse("x\t2\n").is_err());
        assert!(LexiconSentiment::default().len() > 100);
    }

    #[test]
    fn sentence_score_sidecar() {
        let s =
            SentenceScores::parse("pair_id\tside\tsentence_index\tscore\n3\tbody\t0\t0.5\n3\tbody\t1\t-1\n").unwrap();
        assert_eq!(s.mean(3, Side::Body), Some(-0.25));
        assert_eq!(s.mean(3, Side::Headline), None);
        assert!(SentenceScores::parse("x\n3\tbody\t0\t4\n").is_err());
    }
}
