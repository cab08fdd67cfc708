//! Synthetic FNC-style corpora.
//!
//! Each body belongs to one topic (a block of invented words) and carries one
//! stance flavour through marker words. Related headlines reuse the body's
//! topic and inherit its flavour; unrelated headlines come from another topic.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fnc_stance::corpus::{ArticleBody, BodyTable, Dataset, Stance, StanceInstance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub topics: usize,
    pub words_per_topic: usize,
    pub bodies: usize,
    pub unrelated_per_body: usize,
    pub related_per_body: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topics: 8,
            words_per_topic: 24,
            bodies: 48,
            unrelated_per_body: 9,
            related_per_body: 4,
            seed: 7,
        }
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mir", "ta", "ven", "su", "dor", "pi", "ral", "ne", "gu", "zem", "bo", "xi", "fal", "qu",
];
const FILLER: [&str; 8] = ["the", "and", "of", "in", "was", "that", "on", "with"];
const AGREE_MARKERS: [&str; 5] = ["confirmed", "true", "verified", "success", "great"];
const DISAGREE_MARKERS: [&str; 5] = ["hoax", "fake", "denied", "false", "fabricated"];
const DISCUSS_MARKERS: [&str; 5] = ["reportedly", "allegedly", "claims", "unconfirmed", "rumours"];

pub struct SynthCorpus {
    pub topic_words: Vec<Vec<String>>,
    pub bodies: BodyTable,
    pub instances: Vec<StanceInstance>,
}

fn invent_words(rng: &mut ChaCha8Rng, count: usize, taken: &mut std::collections::HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(3..=4);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn sentence(rng: &mut ChaCha8Rng, topic: &[String], marker: Option<&str>) -> String {
    let len = rng.gen_range(7..=11);
    let mut words: Vec<String> = (0..len)
        .map(|_| {
            if rng.gen_bool(0.3) {
                FILLER.choose(rng).unwrap().to_string()
            } else {
                topic.choose(rng).unwrap().clone()
            }
        })
        .collect();
    if let Some(m) = marker {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, m.to_string());
    }
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut taken = std::collections::HashSet::new();
    let topic_words: Vec<Vec<String>> = (0..cfg.topics)
        .map(|_| invent_words(&mut rng, cfg.words_per_topic, &mut taken))
        .collect();
    let mut bodies = BTreeMap::new();
    let mut instances = Vec::new();
    for b in 0..cfg.bodies {
        let body_id = (b * 3 + 11) as u32;
        let topic = b % cfg.topics;
        let flavour = match rng.gen_range(0..20) {
            0..=5 => Stance::Agree,
            6..=8 => Stance::Disagree,
            _ => Stance::Discuss,
        };
        let markers: &[&str] = match flavour {
            Stance::Agree => &AGREE_MARKERS,
            Stance::Disagree => &DISAGREE_MARKERS,
            _ => &DISCUSS_MARKERS,
        };
        let n_sent = rng.gen_range(5..=9);
        let text: Vec<String> = (0..n_sent)
            .map(|i| {
                let m = (i % 2 == 0).then(|| *markers.choose(&mut rng).unwrap());
                sentence(&mut rng, &topic_words[topic], m)
            })
            .collect();
        bodies.insert(
            body_id,
            ArticleBody {
                body_id,
                text: text.join(" "),
            },
        );

        let mut heads: Vec<(String, Stance)> = Vec::new();
        for _ in 0..cfg.related_per_body {
            let n = rng.gen_range(4..=7);
            let mut words: Vec<String> = (0..n)
                .map(|_| topic_words[topic].choose(&mut rng).unwrap().clone())
                .collect();
            words[0][..1].make_ascii_uppercase();
            heads.push((words.join(" "), flavour));
        }
        for _ in 0..cfg.unrelated_per_body {
            let other = (topic + rng.gen_range(1..cfg.topics)) % cfg.topics;
            let n = rng.gen_range(4..=7);
            let words: Vec<String> = (0..n)
                .map(|_| topic_words[other].choose(&mut rng).unwrap().clone())
                .collect();
            heads.push((words.join(" "), Stance::Unrelated));
        }
        heads.shuffle(&mut rng);
        for (headline, stance) in heads {
            instances.push(StanceInstance {
                pair_id: 0,
                headline,
                body_id,
                stance: Some(stance),
            });
        }
    }
    instances.shuffle(&mut rng);
    for (i, inst) in instances.iter_mut().enumerate() {
        inst.pair_id = i;
    }
    SynthCorpus {
        topic_words,
        bodies,
        instances,
    }
}

impl SynthCorpus {
    pub fn dataset(&self) -> Dataset {
        Dataset::new(self.instances.clone(), self.bodies.clone()).unwrap()
    }

    /// Splits by body: bodies whose position is a multiple of `every` go to the
    /// second part. Pair ids are renumbered per part.
    pub fn split(&self, every: usize) -> (SynthCorpus, SynthCorpus) {
        let ids: Vec<u32> = self.bodies.keys().copied().collect();
        let held: std::collections::HashSet<u32> = ids
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| i % every == 0)
            .map(|(_, id)| id)
            .collect();
        let part = |keep: bool| {
            let bodies: BodyTable = self
                .bodies
                .iter()
                .filter(|(id, _)| held.contains(id) != keep)
                .map(|(id, b)| (*id, b.clone()))
                .collect();
            let mut instances: Vec<StanceInstance> = self
                .instances
                .iter()
                .filter(|i| bodies.contains_key(&i.body_id))
                .cloned()
                .collect();
            for (i, inst) in instances.iter_mut().enumerate() {
                inst.pair_id = i;
            }
            SynthCorpus {
                topic_words: self.topic_words.clone(),
                bodies,
                instances,
            }
        };
        (part(true), part(false))
    }

    /// Writes `<prefix>_stances.csv` and `<prefix>_bodies.csv` in the FNC-1 layout.
    pub fn write_csvs(&self, dir: &Path, prefix: &str) -> (PathBuf, PathBuf) {
        let stances = dir.join(format!("{prefix}_stances.csv"));
        let bodies = dir.join(format!("{prefix}_bodies.csv"));
        let mut w = csv::Writer::from_path(&stances).unwrap();
        w.write_record(["Headline", "Body ID", "Stance"]).unwrap();
        for i in &self.instances {
            w.write_record([i.headline.as_str(), &i.body_id.to_string(), i.stance.unwrap().as_str()])
                .unwrap();
        }
        w.flush().unwrap();
        let mut w = csv::Writer::from_path(&bodies).unwrap();
        w.write_record(["Body ID", "articleBody"]).unwrap();
        for b in self.bodies.values() {
            w.write_record([b.body_id.to_string().as_str(), b.text.as_str()])
                .unwrap();
        }
        w.flush().unwrap();
        (stances, bodies)
    }

    /// Word vectors in word2vec text format: topic words cluster around a
    /// per-topic centre, everything else is scattered.
    pub fn write_embeddings(&self, path: &Path, dim: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        for words in &self.topic_words {
            let centre: Vec<f64> = (0..dim).map(|_| 3.0 * normal.sample(&mut rng)).collect();
            for w in words {
                rows.push((
                    w.clone(),
                    centre.iter().map(|c| c + 0.5 * normal.sample(&mut rng)).collect(),
                ));
            }
        }
        for w in AGREE_MARKERS.iter().chain(&DISAGREE_MARKERS).chain(&DISCUSS_MARKERS) {
            rows.push((w.to_string(), (0..dim).map(|_| normal.sample(&mut rng)).collect()));
        }
        let mut f = BufWriter::new(File::create(path).unwrap());
        writeln!(f, "{} {dim}", rows.len()).unwrap();
        for (w, v) in rows {
            let vals: Vec<String> = v.iter().map(|x| format!("{x:.5}")).collect();
            writeln!(f, "{w} {}", vals.join(" ")).unwrap();
        }
    }
}

/// Labels only, with exact per-class counts, over a single shared body.
pub fn label_only_dataset(counts: [usize; 4]) -> Dataset {
    let mut bodies = BodyTable::new();
    bodies.insert(
        0,
        ArticleBody {
            body_id: 0,
            text: String::new(),
        },
    );
    let mut instances = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            instances.push(StanceInstance {
                pair_id: instances.len(),
                headline: String::new(),
                body_id: 0,
                stance: Stance::from_index(k),
            });
        }
    }
    Dataset::new(instances, bodies).unwrap()
}
