//! Topic model trained by collapsed Gibbs sampling, plus directed KL divergence.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

const LDA_VERSION: &str = "lda-v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub train_iters: usize,
    pub infer_iters: usize,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams::with_topics(100)
    }
}

impl LdaParams {
    /// Conventional priors: alpha = 50 / K, beta = 0.01.
    pub fn with_topics(topics: usize) -> Self {
        LdaParams {
            topics,
            alpha: 50.0 / topics as f64,
            beta: 0.01,
            train_iters: 500,
            infer_iters: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    topics: usize,
    alpha: f64,
    beta: f64,
    vocab: BTreeMap<String, usize>,
    /// `topics x vocab` counts, row-major.
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct LdaFile {
    version: String,
    topics: usize,
    alpha: f64,
    beta: f64,
    vocab: Vec<String>,
    topic_word_counts: Vec<Vec<u32>>,
    topic_totals: Vec<u64>,
}

/// Per-document topic proportions.
pub type TopicDistribution = Vec<f64>;

fn cumulative_sample(weights: &mut [f64], rng: &mut ChaCha8Rng) -> usize {
    let mut acc = 0.0;
    for w in weights.iter_mut() {
        acc += *w;
        *w = acc;
    }
    let u = rng.gen::<f64>() * acc;
    weights.iter().position(|&c| u < c).unwrap_or(weights.len() - 1)
}

/// Trains a topic model with collapsed Gibbs sampling.
///
/// Each token's topic is resampled with weight
/// `(n_dk + alpha) * (n_kw + beta) / (n_k + V * beta)`, counts excluding the
/// token itself.
pub fn lda_train<S: AsRef<[String]>>(corpus: &[S], params: &LdaParams) -> Result<LdaModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("topic model corpus"));
    }
    if params.topics == 0 || params.train_iters == 0 {
        return Err(Error::InvalidArgument(
            "topic count and iteration count must be at least 1".into(),
        ));
    }
    if !(params.alpha > 0.0 && params.beta > 0.0) {
        return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
    }
    let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        for t in doc.as_ref() {
            vocab.entry(t.clone()).or_insert(0);
        }
    }
    if vocab.is_empty() {
        return Err(Error::Empty("topic model vocabulary"));
    }
    for (i, v) in vocab.values_mut().enumerate() {
        *v = i;
    }
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| d.as_ref().iter().map(|t| vocab[t]).collect())
        .collect();

    let k = params.topics;
    let v = vocab.len();
    let (alpha, beta) = (params.alpha, params.beta);
    let vbeta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut doc_topic = vec![0u32; docs.len() * k];
    let mut topic_word = vec![0u32; k * v];
    let mut topic_totals = vec![0u64; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let mut zd = Vec::with_capacity(doc.len());
        for &w in doc {
            let t = rng.gen_range(0..k);
            doc_topic[d * k + t] += 1;
            topic_word[t * v + w] += 1;
            topic_totals[t] += 1;
            zd.push(t);
        }
        z.push(zd);
    }

    let mut weights = vec![0.0f64; k];
    for _ in 0..params.train_iters {
        for (d, doc) in docs.iter().enumerate() {
            let nd = &mut doc_topic[d * k..(d + 1) * k];
            for (pos, &w) in doc.iter().enumerate() {
                let old = z[d][pos];
                nd[old] -= 1;
                topic_word[old * v + w] -= 1;
                topic_totals[old] -= 1;
                for t in 0..k {
                    weights[t] = (nd[t] as f64 + alpha) * (topic_word[t * v + w] as f64 + beta)
                        / (topic_totals[t] as f64 + vbeta);
                }
                let new = cumulative_sample(&mut weights, &mut rng);
                nd[new] += 1;
                topic_word[new * v + w] += 1;
                topic_totals[new] += 1;
                z[d][pos] = new;
            }
        }
    }

    Ok(LdaModel {
        topics: k,
        alpha,
        beta,
        vocab,
        topic_word,
        topic_totals,
    })
}

impl LdaModel {
    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn word_index(&self, token: &str) -> Option<usize> {
        self.vocab.get(token).copied()
    }

    pub fn topic_word_count(&self, topic: usize, word: usize) -> u32 {
        self.topic_word[topic * self.vocab.len() + word]
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    /// Total number of token assignments held by the model.
    pub fn token_count(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// Fold-in Gibbs inference with the topic-word counts frozen.
    ///
    /// The returned proportions average `(n_dk + alpha) / (n_d + K * alpha)` over the
    /// last `max(1, iters / 2)` sweeps. Documents without known tokens get the
    /// uniform distribution.
    pub fn infer(&self, doc: &[String], iters: usize, seed: u64) -> TopicDistribution {
        let k = self.topics;
        let words: Vec<usize> = doc.iter().filter_map(|t| self.word_index(t)).collect();
        if words.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let v = self.vocab.len();
        let vbeta = v as f64 * self.beta;
        // per-token topic likelihoods are fixed during fold-in
        let phi: Vec<f64> = words
            .iter()
            .flat_map(|&w| {
                (0..k).map(move |t| {
                    (self.topic_word[t * v + w] as f64 + self.beta) / (self.topic_totals[t] as f64 + vbeta)
                })
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nd = vec![0u32; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.gen_range(0..k);
                nd[t] += 1;
                t
            })
            .collect();

        let iters = iters.max(1);
        let keep = (iters / 2).max(1);
        let denom = words.len() as f64 + k as f64 * self.alpha;
        let mut theta = vec![0.0f64; k];
        let mut weights = vec![0.0f64; k];
        for sweep in 0..iters {
            for pos in 0..words.len() {
                nd[z[pos]] -= 1;
                let row = &phi[pos * k..(pos + 1) * k];
                for t in 0..k {
                    weights[t] = (nd[t] as f64 + self.alpha) * row[t];
                }
                let new = cumulative_sample(&mut weights, &mut rng);
                nd[new] += 1;
                z[pos] = new;
            }
            if sweep >= iters - keep {
                for t in 0..k {
                    theta[t] += (nd[t] as f64 + self.alpha) / denom;
                }
            }
        }
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|x| *x /= total);
        theta
    }

    pub fn to_json(&self) -> Result<String> {
        let v = self.vocab.len();
        let mut tokens = vec![String::new(); v];
        for (t, &i) in &self.vocab {
            tokens[i] = t.clone();
        }
        let file = LdaFile {
            version: LDA_VERSION.into(),
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            vocab: tokens,
            topic_word_counts: self.topic_word.chunks(v).map(<[u32]>::to_vec).collect(),
            topic_totals: self.topic_totals.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LdaFile = serde_json::from_str(text)?;
        if file.version != LDA_VERSION {
            return Err(Error::Version {
                expected: LDA_VERSION.into(),
                found: file.version,
            });
        }
        let v = file.vocab.len();
        if file.topics == 0 || file.topic_word_counts.len() != file.topics || file.topic_totals.len() != file.topics {
            return Err(Error::Malformed("topic count does not match count matrices".into()));
        }
        let mut topic_word = Vec::with_capacity(file.topics * v);
        for (row, &total) in file.topic_word_counts.iter().zip(&file.topic_totals) {
            if row.len() != v {
                return Err(Error::Dimension {
                    context: "topic-word row",
                    expected: v,
                    found: row.len(),
                });
            }
            if row.iter().map(|&c| c as u64).sum::<u64>() != total {
                return Err(Error::Malformed("topic totals disagree with topic-word counts".into()));
            }
            topic_word.extend_from_slice(row);
        }
        let vocab: BTreeMap<String, usize> = file.vocab.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        if vocab.len() != v {
            return Err(Error::Malformed("duplicate vocabulary entry".into()));
        }
        Ok(LdaModel {
            topics: file.topics,
            alpha: file.alpha,
            beta: file.beta,
            vocab,
            topic_word,
            topic_totals: file.topic_totals,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub const DEFAULT_KL_EPS: f64 = 1e-10;

/// `sum_k p_k ln(p_k / q_k)` after adding `eps` to both sides and renormalizing.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T], eps: T) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            context: "KL divergence",
            expected: p.len(),
            found: q.len(),
        });
    }
    let smooth = |x: &[T]| -> Vec<T> {
        let total: T = x.iter().map(|&v| v + eps).sum();
        x.iter().map(|&v| (v + eps) / total).collect()
    };
    let (ps, qs) = (smooth(p), smooth(q));
    let kl: T = ps
        .iter()
        .zip(&qs)
        .filter(|(a, _)| **a > T::zero())
        .map(|(&a, &b)| a * (a / b).ln())
        .sum();
    Ok(kl.max(T::zero()))
}
