use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cache::FeatureRow;
use super::providers::{AnnotationProvider, LexiconSentiment, SentenceScores, Side};
use super::{grammatical_overlap, jaccard, refute_flag, refute_stems, sentiment_avg, FeatureVector};
use crate::corpus::{ArticleBody, Dataset};
use crate::error::{Error, Result};
use crate::simil::{
    avg_embedding, cosine, fit_tfidf, hamming_norm, pair_binary_vectors, wmd, EmbeddingTable, SparseVec, TfIdfModel,
    WmdConfig,
};
use crate::textproc::{intro, ngrams, preprocess, PreprocessConfig};
use crate::topics::{kl_divergence, lda_train, LdaModel, LdaParams, DEFAULT_KL_EPS};

pub const RESOURCES_VERSION: &str = "features-v1";

pub const DEFAULT_REFUTE_WORDS: [&str; 7] = ["fake", "fraud", "hoax", "not", "deny", "fabricate", "authenticity"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub preprocess: PreprocessConfig,
    /// Training settings for the topic model; `seed` also seeds fold-in inference.
    pub lda: LdaParams,
    pub wmd: WmdConfig,
    pub kl_eps: f64,
    pub refute_words: BTreeSet<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            preprocess: PreprocessConfig::default(),
            lda: LdaParams::default(),
            wmd: WmdConfig::default(),
            kl_eps: DEFAULT_KL_EPS,
            refute_words: DEFAULT_REFUTE_WORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        if self.kl_eps.is_nan() || self.kl_eps <= 0.0 {
            return Err(Error::InvalidArgument("KL smoothing must be positive".into()));
        }
        if !(self.wmd.cap >= 0.0 && self.wmd.cap.is_finite()) {
            return Err(Error::InvalidArgument("WMD cap must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn unstemmed(&self) -> PreprocessConfig {
        PreprocessConfig {
            stem: false,
            ..self.preprocess.clone()
        }
    }
}

/// Per-split optional inputs.
#[derive(Clone, Copy, Default)]
pub struct Sidecars<'a> {
    pub annotations: Option<&'a dyn AnnotationProvider>,
    pub sentence_scores: Option<&'a SentenceScores>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EmbeddingRef {
    path: Option<PathBuf>,
    digest: String,
}

#[derive(Serialize, Deserialize)]
struct ResourceManifest {
    version: String,
    config: FeatureConfig,
    lexicon: LexiconSentiment,
    embeddings: Option<EmbeddingRef>,
    fingerprint: String,
}

/// Everything feature extraction needs, fitted on a training split.
#[derive(Clone, Debug)]
pub struct FeatureResources {
    config: FeatureConfig,
    tfidf: TfIdfModel,
    lda: LdaModel,
    lexicon: LexiconSentiment,
    embeddings: Option<Arc<EmbeddingTable<f32>>>,
    embedding_ref: Option<EmbeddingRef>,
    refute: BTreeSet<String>,
    fingerprint: String,
}

struct DocInfo {
    tokens: Vec<String>,
    surface: Vec<String>,
    tfidf: SparseVec,
    theta: Vec<f64>,
    avg: Vec<f32>,
    refute: bool,
    sentiment: f64,
}

struct BodyInfo {
    full: DocInfo,
    intro: DocInfo,
}

impl FeatureResources {
    /// Fits TF-IDF on the distinct headlines and bodies of `train` and, unless
    /// `lda` is given, a topic model on its distinct bodies.
    pub fn fit(train: &Dataset, config: FeatureConfig, lda: Option<LdaModel>) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training split"));
        }
        let body_ids: BTreeSet<u32> = train.instances().iter().map(|i| i.body_id).collect();
        let mut headlines: Vec<&str> = train.instances().iter().map(|i| i.headline.as_str()).collect();
        headlines.sort_unstable();
        headlines.dedup();

        let body_tokens: Vec<Vec<String>> = body_ids
            .par_iter()
            .map(|id| preprocess(&train.body(*id).text, &config.preprocess).tokens)
            .collect();
        let mut corpus: Vec<Vec<String>> = headlines
            .par_iter()
            .map(|h| preprocess(h, &config.preprocess).tokens)
            .collect();
        corpus.extend(body_tokens.iter().cloned());
        let tfidf = fit_tfidf(&corpus)?;
        let lda = match lda {
            Some(m) => m,
            None => lda_train(&body_tokens, &config.lda)?,
        };
        Self::assemble(config, tfidf, lda, LexiconSentiment::default(), None, None)
    }

    fn assemble(
        config: FeatureConfig,
        tfidf: TfIdfModel,
        lda: LdaModel,
        lexicon: LexiconSentiment,
        embeddings: Option<Arc<EmbeddingTable<f32>>>,
        embedding_ref: Option<EmbeddingRef>,
    ) -> Result<Self> {
        let refute = refute_stems(&config.refute_words);
        let mut r = FeatureResources {
            config,
            tfidf,
            lda,
            lexicon,
            embeddings,
            embedding_ref,
            refute,
            fingerprint: String::new(),
        };
        r.fingerprint = r.compute_fingerprint()?;
        Ok(r)
    }

    fn compute_fingerprint(&self) -> Result<String> {
        let mut h = Sha256::new();
        for part in [
            RESOURCES_VERSION.to_string(),
            serde_json::to_string(&self.config)?,
            self.tfidf.to_json()?,
            self.lda.to_json()?,
            serde_json::to_string(&self.lexicon)?,
            self.embedding_ref.as_ref().map_or("none".into(), |e| e.digest.clone()),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn with_lexicon(mut self, lexicon: LexiconSentiment) -> Result<Self> {
        self.lexicon = lexicon;
        self.fingerprint = self.compute_fingerprint()?;
        Ok(self)
    }

    /// Attaches word vectors; `source` is recorded so a saved bundle can reload them.
    pub fn with_embeddings(mut self, table: Arc<EmbeddingTable<f32>>, source: Option<PathBuf>) -> Result<Self> {
        self.embedding_ref = Some(EmbeddingRef {
            path: source,
            digest: table.digest(),
        });
        self.embeddings = Some(table);
        self.fingerprint = self.compute_fingerprint()?;
        Ok(self)
    }

    /// Supplies the vectors a loaded bundle was fitted with; the file digest must match.
    pub fn attach_embeddings(&mut self, table: Arc<EmbeddingTable<f32>>) -> Result<()> {
        match &self.embedding_ref {
            Some(r) if r.digest == *table.digest() => {
                self.embeddings = Some(table);
                Ok(())
            }
            Some(r) => Err(Error::FingerprintMismatch {
                expected: r.digest.clone(),
                found: table.digest(),
            }),
            None => Err(Error::InvalidArgument(
                "these resources were fitted without embeddings".into(),
            )),
        }
    }

    /// Recorded embedding file, when the resources use embeddings.
    pub fn embedding_source(&self) -> Option<Option<&Path>> {
        self.embedding_ref.as_ref().map(|r| r.path.as_deref())
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn tfidf(&self) -> &TfIdfModel {
        &self.tfidf
    }

    pub fn lda(&self) -> &LdaModel {
        &self.lda
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn has_embeddings(&self) -> bool {
        self.embedding_ref.is_some()
    }

    /// Lowercased surface words an embedding lookup may need for `texts`.
    pub fn embedding_vocabulary<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> HashSet<String> {
        let cfg = self.config.unstemmed();
        texts.into_iter().flat_map(|t| preprocess(t, &cfg).tokens).collect()
    }

    /// Names of the features that are constant for lack of an input.
    pub fn inactive_features(&self, sidecars: &Sidecars) -> Vec<&'static str> {
        let mut out = Vec::new();
        if sidecars.annotations.is_none() {
            out.extend(["dep_object_overlap", "dep_subject_overlap"]);
        }
        if !self.has_embeddings() {
            out.extend(["doc_similarity", "doc_similarity_intro", "wmdistance"]);
        }
        out
    }

    fn ready(&self) -> Result<()> {
        if self.embedding_ref.is_some() && self.embeddings.is_none() {
            return Err(Error::InvalidArgument(
                "resources were fitted with embeddings; attach the same vectors before extracting".into(),
            ));
        }
        Ok(())
    }

    fn doc_info(&self, text: &str, topics: bool) -> DocInfo {
        let tokens = preprocess(text, &self.config.preprocess).tokens;
        let surface = preprocess(text, &self.config.unstemmed()).tokens;
        let theta = if topics {
            self.lda
                .infer(&tokens, self.config.lda.infer_iters, self.config.lda.seed)
        } else {
            Vec::new()
        };
        let avg = match &self.embeddings {
            Some(t) => avg_embedding(&surface, t),
            None => Vec::new(),
        };
        DocInfo {
            tfidf: self.tfidf.transform(&tokens),
            refute: refute_flag(text, &self.refute),
            sentiment: sentiment_avg(text, &self.lexicon),
            tokens,
            surface,
            theta,
            avg,
        }
    }

    fn body_info(&self, text: &str) -> BodyInfo {
        BodyInfo {
            full: self.doc_info(text, true),
            intro: self.doc_info(&intro(text), false),
        }
    }

    fn combine(&self, pair_id: usize, h: &DocInfo, b: &BodyInfo, sidecars: &Sidecars) -> Result<FeatureVector> {
        let n = self.config.preprocess.ngram_n;
        let (dep_subject_overlap, dep_object_overlap) = match sidecars.annotations {
            Some(p) => grammatical_overlap(pair_id, p),
            None => (0, 0),
        };
        fn words(d: &DocInfo) -> HashSet<&str> {
            d.tokens.iter().map(String::as_str).collect()
        }
        let hw = words(h);
        let (hv, bv) = pair_binary_vectors::<f64>(&h.tokens, &b.full.tokens);
        let (doc_similarity, doc_similarity_intro, wmdistance) = match &self.embeddings {
            Some(t) => (
                cosine(&h.avg, &b.full.avg)? as f64,
                cosine(&h.avg, &b.intro.avg)? as f64,
                wmd(&h.surface, &b.full.surface, t, &self.config.wmd) as f64,
            ),
            None => (0.0, 0.0, self.config.wmd.cap),
        };
        let eps = self.config.kl_eps;
        let scored = |side: Side, fallback: f64| {
            sidecars
                .sentence_scores
                .and_then(|s| s.mean(pair_id, side))
                .unwrap_or(fallback)
        };
        let fv = FeatureVector {
            dep_object_overlap,
            dep_subject_overlap,
            ngram_overlap: jaccard(&ngrams(&h.tokens, n), &ngrams(&b.full.tokens, n)),
            ngram_overlap_intro: jaccard(&ngrams(&h.tokens, n), &ngrams(&b.intro.tokens, n)),
            word_overlap: jaccard(&hw, &words(&b.full)),
            word_overlap_intro: jaccard(&hw, &words(&b.intro)),
            cosine_count: cosine(&hv, &bv)?,
            cosine_tfidf: TfIdfModel::cosine(&h.tfidf, &b.full.tfidf),
            doc_similarity,
            doc_similarity_intro,
            hamming_distance: hamming_norm(&hv, &bv)?,
            wmdistance: wmdistance.max(0.0),
            len_stance: h.tokens.len() as u32,
            len_body: b.full.tokens.len() as u32,
            kl_pk_qk: kl_divergence(&h.theta, &b.full.theta, eps)?.max(0.0),
            kl_qk_pk: kl_divergence(&b.full.theta, &h.theta, eps)?.max(0.0),
            refute: b.full.refute,
            refute_intro: b.intro.refute,
            sentiment_body: scored(Side::Body, b.full.sentiment),
            sentiment_stance: scored(Side::Headline, h.sentiment),
        }
        .quantized();
        fv.check()?;
        Ok(fv)
    }

    /// Features of one headline/body pair.
    pub fn extract_pair(
        &self,
        pair_id: usize,
        headline: &str,
        body: &ArticleBody,
        sidecars: &Sidecars,
    ) -> Result<FeatureVector> {
        self.ready()?;
        let h = self.doc_info(headline, true);
        let b = self.body_info(&body.text);
        self.combine(pair_id, &h, &b, sidecars)
    }

    /// Features for every instance, computing each distinct body and headline once.
    pub fn extract_dataset(&self, ds: &Dataset, sidecars: &Sidecars) -> Result<Vec<FeatureRow>> {
        self.ready()?;
        let body_ids: Vec<u32> = ds
            .instances()
            .iter()
            .map(|i| i.body_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let bodies: HashMap<u32, BodyInfo> = body_ids
            .par_iter()
            .map(|&id| (id, self.body_info(&ds.body(id).text)))
            .collect();
        let headlines: BTreeSet<&str> = ds.instances().iter().map(|i| i.headline.as_str()).collect();
        let headlines: Vec<&str> = headlines.into_iter().collect();
        let heads: HashMap<&str, DocInfo> = headlines.par_iter().map(|&h| (h, self.doc_info(h, true))).collect();
        ds.instances()
            .par_iter()
            .map(|inst| {
                let features = self.combine(
                    inst.pair_id,
                    &heads[inst.headline.as_str()],
                    &bodies[&inst.body_id],
                    sidecars,
                )?;
                Ok(FeatureRow {
                    pair_id: inst.pair_id,
                    stance: inst.stance,
                    features,
                })
            })
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("tfidf.json", self.tfidf.to_json()?)?;
        write("lda.json", self.lda.to_json()?)?;
        let manifest = ResourceManifest {
            version: RESOURCES_VERSION.into(),
            config: self.config.clone(),
            lexicon: self.lexicon.clone(),
            embeddings: self.embedding_ref.clone(),
            fingerprint: self.fingerprint.clone(),
        };
        write("resources.json", serde_json::to_string_pretty(&manifest)?)?;
        write("fingerprint", format!("{}\n", self.fingerprint))
    }

    /// Loads saved resources. Embeddings, if used, must be attached afterwards.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let manifest: ResourceManifest = serde_json::from_str(&read("resources.json")?)?;
        if manifest.version != RESOURCES_VERSION {
            return Err(Error::Version {
                expected: RESOURCES_VERSION.into(),
                found: manifest.version,
            });
        }
        let tfidf = TfIdfModel::from_json(&read("tfidf.json")?)?;
        let lda = LdaModel::from_json(&read("lda.json")?)?;
        let r = Self::assemble(manifest.config, tfidf, lda, manifest.lexicon, None, manifest.embeddings)?;
        if r.fingerprint != manifest.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: manifest.fingerprint,
                found: r.fingerprint,
            });
        }
        let recorded = read("fingerprint")?;
        if recorded.trim() != r.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: recorded.trim().to_string(),
                found: r.fingerprint,
            });
        }
        Ok(r)
    }
}
