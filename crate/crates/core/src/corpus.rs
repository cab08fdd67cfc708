//! FNC-1 dataset loading, class resampling and grouped cross-validation folds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Agree,
    Disagree,
    Discuss,
    Unrelated,
}

impl Stance {
    /// Label order used by every table and matrix in the crate.
    pub const ALL: [Stance; 4] = [Stance::Agree, Stance::Disagree, Stance::Discuss, Stance::Unrelated];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stance> {
        Self::ALL.get(i).copied()
    }

    pub fn is_related(self) -> bool {
        self != Stance::Unrelated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Agree => "agree",
            Stance::Disagree => "disagree",
            Stance::Discuss => "discuss",
            Stance::Unrelated => "unrelated",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agree" => Ok(Stance::Agree),
            "disagree" => Ok(Stance::Disagree),
            "discuss" => Ok(Stance::Discuss),
            "unrelated" => Ok(Stance::Unrelated),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleBody {
    pub body_id: u32,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceInstance {
    /// Zero-based row index in the originating stances file.
    pub pair_id: usize,
    pub headline: String,
    pub body_id: u32,
    pub stance: Option<Stance>,
}

pub type BodyTable = BTreeMap<u32, ArticleBody>;

/// Headline/body pairs joined against their body table.
#[derive(Clone, Debug)]
pub struct Dataset {
    instances: Vec<StanceInstance>,
    bodies: Arc<BodyTable>,
}

impl Dataset {
    /// Joins instances with bodies. An unresolved body id is an error.
    pub fn new(instances: Vec<StanceInstance>, bodies: impl Into<Arc<BodyTable>>) -> Result<Self> {
        let bodies = bodies.into();
        for inst in &instances {
            if !bodies.contains_key(&inst.body_id) {
                return Err(Error::UnknownBody {
                    pair_id: inst.pair_id,
                    body_id: inst.body_id,
                });
            }
        }
        Ok(Dataset { instances, bodies })
    }

    pub fn load(stances: impl AsRef<Path>, bodies: impl AsRef<Path>, labeled: bool) -> Result<Self> {
        let bodies = load_bodies(bodies)?;
        let instances = load_stances(stances, labeled)?;
        Dataset::new(instances, bodies)
    }

    pub fn instances(&self) -> &[StanceInstance] {
        &self.instances
    }

    pub fn bodies(&self) -> &BodyTable {
        &self.bodies
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn body(&self, body_id: u32) -> &ArticleBody {
        // join totality is checked on construction
        &self.bodies[&body_id]
    }

    pub fn body_text(&self, inst: &StanceInstance) -> &str {
        &self.body(inst.body_id).text
    }

    /// Restricts to the given instance indices, sharing the body table.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            bodies: Arc::clone(&self.bodies),
        }
    }

    pub fn labels(&self) -> Vec<Option<Stance>> {
        self.instances.iter().map(|i| i.stance).collect()
    }

    /// Per-class counts in `Stance::ALL` order; unlabeled instances are ignored.
    pub fn label_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for s in self.instances.iter().filter_map(|i| i.stance) {
            counts[s.index()] += 1;
        }
        counts
    }

    /// Appends seeded duplicates of `target` instances until the class holds `target_count`.
    pub fn oversample(&self, target: Stance, target_count: usize, seed: u64) -> Result<Dataset> {
        let labels: Vec<Option<Stance>> = self.labels();
        let extra = oversample_indices(&labels, target, target_count, seed)?;
        let mut instances = self.instances.clone();
        instances.extend(extra.into_iter().map(|i| self.instances[i].clone()));
        Ok(Dataset {
            instances,
            bodies: Arc::clone(&self.bodies),
        })
    }

    /// Writes `pair_id \t stance \t headline \t body_id` rows.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(out, "pair_id\tstance\theadline\tbody_id")?;
            for inst in &self.instances {
                let stance = inst.stance.map(Stance::as_str).unwrap_or("");
                let headline = inst.headline.replace(['\t', '\n', '\r'], " ");
                writeln!(out, "{}\t{}\t{}\t{}", inst.pair_id, stance, headline, inst.body_id)?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let row = err.position().map(|p| p.record()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::Csv {
            path: path.to_path_buf(),
            row,
            msg: format!("{kind:?}"),
        },
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim_start_matches('\u{feff}').trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Reads a `Body ID,articleBody` CSV.
pub fn load_bodies(path: impl AsRef<Path>) -> Result<BodyTable> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_col = column(&headers, "Body ID")?;
    let text_col = column(&headers, "articleBody")?;
    let mut bodies = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = row as u64 + 1;
        let raw_id = record.get(id_col).unwrap_or_default().trim();
        let body_id: u32 = raw_id.parse().map_err(|_| Error::Csv {
            path: path.to_path_buf(),
            row,
            msg: format!("invalid body id {raw_id:?}"),
        })?;
        let text = record.get(text_col).unwrap_or_default().to_string();
        if bodies.insert(body_id, ArticleBody { body_id, text }).is_some() {
            return Err(Error::DuplicateBodyId(body_id));
        }
    }
    Ok(bodies)
}

/// Reads a `Headline,Body ID[,Stance]` CSV, preserving row order.
pub fn load_stances(path: impl AsRef<Path>, labeled: bool) -> Result<Vec<StanceInstance>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let headline_col = column(&headers, "Headline")?;
    let id_col = column(&headers, "Body ID")?;
    let stance_col = if labeled {
        Some(column(&headers, "Stance")?)
    } else {
        column(&headers, "Stance").ok()
    };
    let mut out = Vec::new();
    for (pair_id, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = pair_id as u64 + 1;
        let raw_id = record.get(id_col).unwrap_or_default().trim();
        let body_id: u32 = raw_id.parse().map_err(|_| Error::Csv {
            path: path.to_path_buf(),
            row,
            msg: format!("invalid body id {raw_id:?}"),
        })?;
        let stance = match stance_col {
            Some(c) => {
                let value = record.get(c).unwrap_or_default();
                Some(
                    value
                        .parse::<Stance>()
                        .map_err(|value| Error::UnknownStance { row, value })?,
                )
            }
            None => None,
        };
        out.push(StanceInstance {
            pair_id,
            headline: record.get(headline_col).unwrap_or_default().to_string(),
            body_id,
            stance,
        });
    }
    Ok(out)
}

/// Indices of `target` instances to append (drawn uniformly with replacement) so
/// that the class reaches `target_count`.
pub fn oversample_indices(
    labels: &[Option<Stance>],
    target: Stance,
    target_count: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let pool: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == Some(target))
        .map(|(i, _)| i)
        .collect();
    if target_count < pool.len() {
        return Err(Error::InvalidArgument(format!(
            "oversample target {target_count} is below the current {target} count {}",
            pool.len()
        )));
    }
    let missing = target_count - pool.len();
    if missing == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "cannot oversample {target}: class has no instances"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..missing).map(|_| pool[rng.gen_range(0..pool.len())]).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Splits `body_ids` (one per instance) into `k` folds grouped by body.
///
/// Body groups are shuffled with the seed, then each group goes to the fold with
/// the fewest instances so far (lowest fold index on ties).
pub fn make_folds_by_body(body_ids: &[u32], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &b) in body_ids.iter().enumerate() {
        groups.entry(b).or_default().push(i);
    }
    if k > groups.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} distinct body ids",
            groups.len()
        )));
    }
    let mut order: Vec<u32> = groups.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut sizes = vec![0usize; k];
    let mut assignment: HashMap<u32, usize> = HashMap::with_capacity(order.len());
    for body in order {
        let fold = (0..k).min_by_key(|&f| (sizes[f], f)).unwrap();
        sizes[fold] += groups[&body].len();
        assignment.insert(body, fold);
    }

    let mut folds: Vec<Fold> = (0..k)
        .map(|_| Fold {
            train: Vec::new(),
            holdout: Vec::new(),
        })
        .collect();
    for (i, b) in body_ids.iter().enumerate() {
        let home = assignment[b];
        for (f, fold) in folds.iter_mut().enumerate() {
            if f == home {
                fold.holdout.push(i);
            } else {
                fold.train.push(i);
            }
        }
    }
    Ok(folds)
}

pub fn make_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let ids: Vec<u32> = ds.instances().iter().map(|i| i.body_id).collect();
    make_folds_by_body(&ids, k, seed)
}

/// Number of distinct body ids referenced by a dataset.
pub fn distinct_bodies(ds: &Dataset) -> usize {
    ds.instances().iter().map(|i| i.body_id).collect::<BTreeSet<_>>().len()
}
