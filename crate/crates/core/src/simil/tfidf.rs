use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TFIDF_VERSION: &str = "tfidf-v1";

/// Sorted (column, weight) pairs.
pub type SparseVec = Vec<(usize, f64)>;

/// Smoothed inverse document frequencies over a fixed vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TfIdfModel {
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TfIdfFile {
    version: String,
    /// Token at column `i`.
    vocab: Vec<String>,
    idf: Vec<f64>,
}

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1, columns in sorted token order.
pub fn fit_tfidf<S: AsRef<[String]>>(corpus: &[S]) -> Result<TfIdfModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("TF-IDF corpus"));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: BTreeSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    let mut vocab = BTreeMap::new();
    let mut idf = Vec::with_capacity(df.len());
    for (i, (t, d)) in df.into_iter().enumerate() {
        vocab.insert(t.to_string(), i);
        idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
    }
    Ok(TfIdfModel { vocab, idf })
}

impl TfIdfModel {
    pub fn vocab_len(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocab.get(token).map(|&i| self.idf[i])
    }

    /// Raw-count TF times idf, L2-normalized; unseen tokens are ignored.
    pub fn transform(&self, tokens: &[String]) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.vocab.get(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut v {
                *w /= norm;
            }
        }
        v
    }

    /// Cosine of two sparse vectors; 0 when either is empty.
    pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let na = a.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        let nb = b.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (dot / (na * nb)).clamp(-1.0, 1.0)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut tokens = vec![String::new(); self.idf.len()];
        for (t, &i) in &self.vocab {
            tokens[i] = t.clone();
        }
        Ok(serde_json::to_string(&TfIdfFile {
            version: TFIDF_VERSION.into(),
            vocab: tokens,
            idf: self.idf.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TfIdfFile = serde_json::from_str(text)?;
        if file.version != TFIDF_VERSION {
            return Err(Error::Version {
                expected: TFIDF_VERSION.into(),
                found: file.version,
            });
        }
        if file.vocab.len() != file.idf.len() {
            return Err(Error::Dimension {
                context: "tf-idf vocabulary",
                expected: file.vocab.len(),
                found: file.idf.len(),
            });
        }
        if file.idf.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Malformed("idf values must be finite and positive".into()));
        }
        let vocab = file.vocab.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(TfIdfModel { vocab, idf: file.idf })
    }
}
