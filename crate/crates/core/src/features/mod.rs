//! The 20 hand-crafted headline/body features.

mod cache;
mod extract;
mod providers;

use std::collections::BTreeSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{raw_words, split_sentences, stem};

pub use cache::{read_feature_cache, write_feature_cache, CacheMeta, FeatureRow};
pub use extract::{FeatureConfig, FeatureResources, Sidecars, DEFAULT_REFUTE_WORDS, RESOURCES_VERSION};
pub use providers::{
    normalize_token, AnnotationProvider, AnnotationSidecar, LexiconSentiment, PairAnnotation, RoleSets, SentenceScores,
    SentimentProvider, Side,
};

pub const N_FEATURES: usize = 20;

/// Column names in canonical order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "dep_object_overlap",
    "dep_subject_overlap",
    "ngram_overlap",
    "ngram_overlap_intro",
    "word_overlap",
    "word_overlap_intro",
    "cosine_count",
    "cosine_tfidf",
    "doc_similarity",
    "doc_similarity_intro",
    "hamming_distance",
    "wmdistance",
    "len_stance",
    "len_body",
    "KL_pk_qk",
    "KL_qk_pk",
    "refute",
    "refute_intro",
    "sentiment_body",
    "sentiment_stance",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dep_object_overlap: u32,
    pub dep_subject_overlap: u32,
    pub ngram_overlap: f64,
    pub ngram_overlap_intro: f64,
    pub word_overlap: f64,
    pub word_overlap_intro: f64,
    pub cosine_count: f64,
    pub cosine_tfidf: f64,
    pub doc_similarity: f64,
    pub doc_similarity_intro: f64,
    pub hamming_distance: f64,
    pub wmdistance: f64,
    pub len_stance: u32,
    pub len_body: u32,
    pub kl_pk_qk: f64,
    pub kl_qk_pk: f64,
    pub refute: bool,
    pub refute_intro: bool,
    pub sentiment_body: f64,
    pub sentiment_stance: f64,
}

/// Rounds to 9 significant digits, the precision kept by the feature cache.
pub fn quantize(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.dep_object_overlap as f64,
            self.dep_subject_overlap as f64,
            self.ngram_overlap,
            self.ngram_overlap_intro,
            self.word_overlap,
            self.word_overlap_intro,
            self.cosine_count,
            self.cosine_tfidf,
            self.doc_similarity,
            self.doc_similarity_intro,
            self.hamming_distance,
            self.wmdistance,
            self.len_stance as f64,
            self.len_body as f64,
            self.kl_pk_qk,
            self.kl_qk_pk,
            flag(self.refute),
            flag(self.refute_intro),
            self.sentiment_body,
            self.sentiment_stance,
        ]
    }

    /// Inverse of [`to_array`](Self::to_array); validates integer and flag columns.
    pub fn from_array(v: &[f64; N_FEATURES]) -> Result<Self> {
        let int = |i: usize| -> Result<u32> {
            let x = v[i];
            if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                Ok(x as u32)
            } else {
                Err(Error::Malformed(format!(
                    "{} must be a non-negative integer, got {x}",
                    FEATURE_NAMES[i]
                )))
            }
        };
        let bit = |i: usize| -> Result<bool> {
            match v[i] {
                0.0 => Ok(false),
                1.0 => Ok(true),
                x => Err(Error::Malformed(format!(
                    "{} must be 0 or 1, got {x}",
                    FEATURE_NAMES[i]
                ))),
            }
        };
        let fv = FeatureVector {
            dep_object_overlap: int(0)?,
            dep_subject_overlap: int(1)?,
            ngram_overlap: v[2],
            ngram_overlap_intro: v[3],
            word_overlap: v[4],
            word_overlap_intro: v[5],
            cosine_count: v[6],
            cosine_tfidf: v[7],
            doc_similarity: v[8],
            doc_similarity_intro: v[9],
            hamming_distance: v[10],
            wmdistance: v[11],
            len_stance: int(12)?,
            len_body: int(13)?,
            kl_pk_qk: v[14],
            kl_qk_pk: v[15],
            refute: bit(16)?,
            refute_intro: bit(17)?,
            sentiment_body: v[18],
            sentiment_stance: v[19],
        };
        fv.check()?;
        Ok(fv)
    }

    /// Checks finiteness and the documented range of each bounded feature.
    pub fn check(&self) -> Result<()> {
        let a = self.to_array();
        for (i, &x) in a.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(FEATURE_NAMES[i].to_string()));
            }
        }
        let ranges: [(usize, f64, f64); 11] = [
            (2, 0.0, 1.0),
            (3, 0.0, 1.0),
            (4, 0.0, 1.0),
            (5, 0.0, 1.0),
            (6, -1.0, 1.0),
            (7, -1.0, 1.0),
            (8, -1.0, 1.0),
            (9, -1.0, 1.0),
            (10, 0.0, 1.0),
            (18, -1.0, 1.0),
            (19, -1.0, 1.0),
        ];
        for (i, lo, hi) in ranges {
            if !(lo..=hi).contains(&a[i]) {
                return Err(Error::Malformed(format!(
                    "{} = {} outside [{lo}, {hi}]",
                    FEATURE_NAMES[i], a[i]
                )));
            }
        }
        for i in [11, 14, 15] {
            if a[i] < 0.0 {
                return Err(Error::Malformed(format!("{} = {} is negative", FEATURE_NAMES[i], a[i])));
            }
        }
        Ok(())
    }

    pub(crate) fn quantized(mut self) -> Self {
        for x in [
            &mut self.ngram_overlap,
            &mut self.ngram_overlap_intro,
            &mut self.word_overlap,
            &mut self.word_overlap_intro,
            &mut self.cosine_count,
            &mut self.cosine_tfidf,
            &mut self.doc_similarity,
            &mut self.doc_similarity_intro,
            &mut self.hamming_distance,
            &mut self.wmdistance,
            &mut self.kl_pk_qk,
            &mut self.kl_qk_pk,
            &mut self.sentiment_body,
            &mut self.sentiment_stance,
        ] {
            *x = quantize(*x);
        }
        self
    }
}

/// Intersection over union; 0 when both sets are empty.
pub fn jaccard<T: Eq + Hash>(a: &std::collections::HashSet<T>, b: &std::collections::HashSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `(subject overlap, object overlap)` counts; `(0, 0)` when the provider has no entry.
pub fn grammatical_overlap(pair_id: usize, provider: &dyn AnnotationProvider) -> (u32, u32) {
    match provider.lookup(pair_id) {
        Some(a) => (
            a.headline.subjects.intersection(&a.body.subjects).count() as u32,
            a.headline.objects.intersection(&a.body.objects).count() as u32,
        ),
        None => (0, 0),
    }
}

/// Stems of a refutation word list.
pub fn refute_stems<'a>(words: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
    words.into_iter().map(|w| stem(&w.to_lowercase())).collect()
}

/// Whether any word of `text` shares a stem with the refutation list.
pub fn refute_flag(text: &str, stems: &BTreeSet<String>) -> bool {
    raw_words(text).any(|w| stems.contains(&stem(&w)))
}

/// Mean sentence score; 0 for text without sentences.
pub fn sentiment_avg(text: &str, provider: &dyn SentimentProvider) -> f64 {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return 0.0;
    }
    sentences.iter().map(|s| provider.score(s)).sum::<f64>() / sentences.len() as f64
}
