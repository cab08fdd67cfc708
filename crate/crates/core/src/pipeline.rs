//! One- and two-stage stance classifiers, cross-validated grid search and
//! model bundles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_folds, oversample_indices, Dataset, Stance};
use crate::error::{Error, Result};
use crate::eval::fnc_score;
use crate::features::{FeatureConfig, FeatureResources, FeatureRow, Sidecars, N_FEATURES};
use crate::gbdt::{fit, BoostedEnsemble, DenseMatrix, TrainParams};
use crate::simil::EmbeddingTable;

pub const BUNDLE_VERSION: &str = "pipeline-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    OneStage,
    TwoStage,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1stage" | "one_stage" => Ok(Variant::OneStage),
            "2stage" | "two_stage" => Ok(Variant::TwoStage),
            other => Err(format!("unknown plan {other:?} (expected 1stage or 2stage)")),
        }
    }
}

/// Duplicate `target` rows until the class matches the count of `to_match`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oversample {
    pub target: Stance,
    pub to_match: Stance,
    pub seed: u64,
}

impl Oversample {
    pub fn disagree_to_agree(seed: u64) -> Self {
        Oversample {
            target: Stance::Disagree,
            to_match: Stance::Agree,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub variant: Variant,
    pub stage1_params: TrainParams,
    /// Ignored by the one-stage variant.
    pub stage2_params: TrainParams,
    pub oversample: Option<Oversample>,
    /// Feature columns each stage sees; `None` means all of them.
    #[serde(default)]
    pub stage1_features: Option<Vec<usize>>,
    #[serde(default)]
    pub stage2_features: Option<Vec<usize>>,
}

impl StagePlan {
    pub fn new(variant: Variant, params: TrainParams) -> Self {
        StagePlan {
            variant,
            stage1_params: params.clone(),
            stage2_params: params,
            oversample: None,
            stage1_features: None,
            stage2_features: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1_params.validate()?;
        self.stage2_params.validate()?;
        for mask in [&self.stage1_features, &self.stage2_features].into_iter().flatten() {
            if mask.is_empty() || mask.iter().any(|&c| c >= N_FEATURES) {
                return Err(Error::InvalidArgument(format!(
                    "feature mask must list columns below {N_FEATURES}"
                )));
            }
        }
        if let Some(o) = &self.oversample {
            if o.target == o.to_match {
                return Err(Error::InvalidArgument(
                    "oversampling target equals its reference class".into(),
                ));
            }
            if self.variant == Variant::TwoStage && o.target.is_related() != o.to_match.is_related() {
                return Err(Error::InvalidArgument(
                    "two-stage oversampling must pair classes from the same stage".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainedPipeline {
    pub plan: StagePlan,
    /// Fingerprint of the feature resources the models were trained against.
    pub fingerprint: String,
    pub stage1: BoostedEnsemble<f64>,
    pub stage2: Option<BoostedEnsemble<f64>>,
    pub resources: Option<FeatureResources>,
}

const STAGE1_RELATED: usize = 0;
const STAGE1_UNRELATED: usize = 1;

fn matrix(rows: &[&FeatureRow], mask: Option<&[usize]>) -> Result<DenseMatrix<f64>> {
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let a = r.features.to_array();
            match mask {
                Some(m) => m.iter().map(|&c| a[c]).collect(),
                None => a.to_vec(),
            }
        })
        .collect();
    DenseMatrix::from_rows(&data)
}

fn gold(rows: &[&FeatureRow]) -> Result<Vec<Stance>> {
    rows.iter()
        .map(|r| {
            r.stance
                .ok_or_else(|| Error::InvalidArgument(format!("training row {} has no stance", r.pair_id)))
        })
        .collect()
}

/// Appends duplicated rows of `o.target` so it matches `o.to_match`.
fn oversampled<'a>(rows: Vec<&'a FeatureRow>, o: &Oversample) -> Result<Vec<&'a FeatureRow>> {
    let labels: Vec<Option<Stance>> = rows.iter().map(|r| r.stance).collect();
    let want = labels.iter().filter(|&&s| s == Some(o.to_match)).count();
    let have = labels.iter().filter(|&&s| s == Some(o.target)).count();
    if want <= have {
        return Ok(rows);
    }
    let extra = oversample_indices(&labels, o.target, want, o.seed)?;
    let mut out = rows.clone();
    out.extend(extra.into_iter().map(|i| rows[i]));
    Ok(out)
}

/// Label counts (in `Stance::ALL` order) each stage is trained on.
pub fn stage_label_counts(plan: &StagePlan, rows: &[FeatureRow]) -> Result<Vec<[usize; 4]>> {
    let sets = stage_rows(plan, rows)?;
    Ok(sets
        .iter()
        .map(|set| {
            let mut c = [0usize; 4];
            for r in set {
                if let Some(s) = r.stance {
                    c[s.index()] += 1;
                }
            }
            c
        })
        .collect())
}

fn stage_rows<'a>(plan: &StagePlan, rows: &'a [FeatureRow]) -> Result<Vec<Vec<&'a FeatureRow>>> {
    let all: Vec<&FeatureRow> = rows.iter().collect();
    gold(&all)?;
    let os = plan.oversample.as_ref();
    match plan.variant {
        Variant::OneStage => Ok(vec![match os {
            Some(o) => oversampled(all, o)?,
            None => all,
        }]),
        Variant::TwoStage => {
            let related: Vec<&FeatureRow> = all.iter().copied().filter(|r| r.stance.unwrap().is_related()).collect();
            if related.is_empty() {
                return Err(Error::Empty("related training subset"));
            }
            let (s1, s2) = match os {
                Some(o) if o.target.is_related() => (all, oversampled(related, o)?),
                Some(o) => (oversampled(all, o)?, related),
                None => (all, related),
            };
            Ok(vec![s1, s2])
        }
    }
}

/// Trains on precomputed features. `fingerprint` identifies the resources that
/// produced `rows`.
pub fn train_on_features(plan: &StagePlan, rows: &[FeatureRow], fingerprint: &str) -> Result<TrainedPipeline> {
    plan.validate()?;
    if rows.is_empty() {
        return Err(Error::Empty("training features"));
    }
    let sets = stage_rows(plan, rows)?;
    let labels = |set: &[&FeatureRow], map: &dyn Fn(Stance) -> usize| -> Result<Vec<usize>> {
        Ok(gold(set)?.into_iter().map(map).collect())
    };
    let (stage1, stage2) = match plan.variant {
        Variant::OneStage => {
            let x = matrix(&sets[0], plan.stage1_features.as_deref())?;
            let y = labels(&sets[0], &|s| s.index())?;
            (fit(&x, &y, 4, &plan.stage1_params)?, None)
        }
        Variant::TwoStage => {
            let x1 = matrix(&sets[0], plan.stage1_features.as_deref())?;
            let y1 = labels(&sets[0], &|s| {
                if s.is_related() {
                    STAGE1_RELATED
                } else {
                    STAGE1_UNRELATED
                }
            })?;
            let x2 = matrix(&sets[1], plan.stage2_features.as_deref())?;
            let y2 = labels(&sets[1], &|s| s.index())?;
            let m1 = fit(&x1, &y1, 2, &plan.stage1_params)?;
            let m2 = fit(&x2, &y2, 3, &plan.stage2_params)?;
            (m1, Some(m2))
        }
    };
    Ok(TrainedPipeline {
        plan: plan.clone(),
        fingerprint: fingerprint.to_string(),
        stage1,
        stage2,
        resources: None,
    })
}

/// Extracts training features with `resources` and trains.
pub fn train(
    plan: &StagePlan,
    train_ds: &Dataset,
    resources: FeatureResources,
    sidecars: &Sidecars,
) -> Result<TrainedPipeline> {
    let rows = resources.extract_dataset(train_ds, sidecars)?;
    let mut p = train_on_features(plan, &rows, resources.fingerprint())?;
    p.resources = Some(resources);
    Ok(p)
}

impl TrainedPipeline {
    /// Predicts features produced by resources with the given fingerprint.
    pub fn predict(&self, rows: &[FeatureRow], fingerprint: &str) -> Result<Vec<Stance>> {
        if fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                found: fingerprint.to_string(),
            });
        }
        let refs: Vec<&FeatureRow> = rows.iter().collect();
        let x1 = matrix(&refs, self.plan.stage1_features.as_deref())?;
        let first = self.stage1.predict_labels(&x1)?;
        match (&self.plan.variant, &self.stage2) {
            (Variant::OneStage, _) => first
                .into_iter()
                .map(|c| Stance::from_index(c).ok_or_else(|| Error::Malformed(format!("class {c}"))))
                .collect(),
            (Variant::TwoStage, Some(m2)) => {
                let x2 = matrix(&refs, self.plan.stage2_features.as_deref())?;
                let mut out = Vec::with_capacity(rows.len());
                for (i, c) in first.into_iter().enumerate() {
                    out.push(if c == STAGE1_UNRELATED {
                        Stance::Unrelated
                    } else {
                        let k = m2.predict_label(x2.row(i))?;
                        Stance::from_index(k).ok_or_else(|| Error::Malformed(format!("class {k}")))?
                    });
                }
                Ok(out)
            }
            (Variant::TwoStage, None) => Err(Error::Malformed("two-stage pipeline without a stage-2 model".into())),
        }
    }

    /// Extracts features with the bundled resources and predicts.
    pub fn predict_dataset(&self, ds: &Dataset, sidecars: &Sidecars) -> Result<Vec<Stance>> {
        let r = self
            .resources
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("pipeline carries no feature resources".into()))?;
        let rows = r.extract_dataset(ds, sidecars)?;
        self.predict(&rows, r.fingerprint())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = BundleManifest {
            version: BUNDLE_VERSION.into(),
            plan: self.plan.clone(),
            fingerprint: self.fingerprint.clone(),
        };
        let p = dir.join("plan.json");
        fs::write(&p, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&p, e))?;
        self.stage1.save(dir.join("stage1.model.json"))?;
        let s2 = dir.join("stage2.model.json");
        match &self.stage2 {
            Some(m) => m.save(&s2)?,
            None if s2.exists() => fs::remove_file(&s2).map_err(|e| Error::io(&s2, e))?,
            None => {}
        }
        let res = dir.join("resources");
        match &self.resources {
            Some(r) => r.save(&res)?,
            None => {
                fs::create_dir_all(&res).map_err(|e| Error::io(&res, e))?;
                let p = res.join("fingerprint");
                fs::write(&p, format!("{}\n", self.fingerprint)).map_err(|e| Error::io(&p, e))?;
            }
        }
        Ok(())
    }

    /// Loads a bundle. Resources are loaded when present; embeddings must then be
    /// attached by the caller.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = dir.join("plan.json");
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let manifest: BundleManifest = serde_json::from_str(&text)?;
        if manifest.version != BUNDLE_VERSION {
            return Err(Error::Version {
                expected: BUNDLE_VERSION.into(),
                found: manifest.version,
            });
        }
        manifest.plan.validate()?;
        let stage1 = BoostedEnsemble::load(dir.join("stage1.model.json"))?;
        let s2 = dir.join("stage2.model.json");
        let stage2 = match manifest.plan.variant {
            Variant::TwoStage => Some(BoostedEnsemble::load(&s2)?),
            Variant::OneStage => None,
        };
        let res = dir.join("resources");
        let resources = if res.join("resources.json").exists() {
            let r = FeatureResources::load(&res)?;
            if r.fingerprint() != manifest.fingerprint {
                return Err(Error::FingerprintMismatch {
                    expected: manifest.fingerprint,
                    found: r.fingerprint().to_string(),
                });
            }
            Some(r)
        } else {
            None
        };
        let expected_classes = match manifest.plan.variant {
            Variant::OneStage => 4,
            Variant::TwoStage => 2,
        };
        if stage1.n_classes != expected_classes || stage2.as_ref().is_some_and(|m| m.n_classes != 3) {
            return Err(Error::Malformed("model class counts do not match the plan".into()));
        }
        Ok(TrainedPipeline {
            plan: manifest.plan,
            fingerprint: manifest.fingerprint,
            stage1,
            stage2,
            resources,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    version: String,
    plan: StagePlan,
    fingerprint: String,
}

/// Hyperparameter grid. Keys are `TrainParams` field names applied to both
/// stages, or prefixed with `stage1.` / `stage2.` to target one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub BTreeMap<String, Vec<f64>>);

const GRID_KEYS: [&str; 8] = [
    "n_rounds",
    "learning_rate",
    "max_depth",
    "lambda_l2",
    "gamma_min_gain",
    "min_child_weight",
    "subsample",
    "colsample",
];

fn set_param(p: &mut TrainParams, key: &str, v: f64) -> Result<()> {
    let count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::InvalidArgument(format!(
                "{key} must be a non-negative integer, got {v}"
            )))
        }
    };
    match key {
        "n_rounds" => p.n_rounds = count(v)?,
        "max_depth" => p.max_depth = count(v)?,
        "learning_rate" => p.learning_rate = v,
        "lambda_l2" => p.lambda_l2 = v,
        "gamma_min_gain" => p.gamma_min_gain = v,
        "min_child_weight" => p.min_child_weight = v,
        "subsample" => p.subsample = v,
        "colsample" => p.colsample = v,
        _ => return Err(Error::InvalidArgument(format!("unknown grid parameter {key:?}"))),
    }
    Ok(())
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidArgument("grid is empty".into()));
        }
        for (k, vals) in &self.0 {
            let base = k
                .strip_prefix("stage1.")
                .or_else(|| k.strip_prefix("stage2."))
                .unwrap_or(k);
            if !GRID_KEYS.contains(&base) {
                return Err(Error::InvalidArgument(format!("unknown grid parameter {k:?}")));
            }
            if vals.is_empty() {
                return Err(Error::InvalidArgument(format!("grid parameter {k:?} has no values")));
            }
        }
        Ok(())
    }

    /// Every combination, last key varying fastest.
    pub fn points(&self) -> Vec<Vec<(String, f64)>> {
        let mut out: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (k, vals) in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((k.clone(), v));
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn apply(template: &StagePlan, point: &[(String, f64)]) -> Result<StagePlan> {
        let mut plan = template.clone();
        for (k, v) in point {
            if let Some(b) = k.strip_prefix("stage1.") {
                set_param(&mut plan.stage1_params, b, *v)?;
            } else if let Some(b) = k.strip_prefix("stage2.") {
                set_param(&mut plan.stage2_params, b, *v)?;
            } else {
                set_param(&mut plan.stage1_params, k, *v)?;
                set_param(&mut plan.stage2_params, k, *v)?;
            }
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub point: Vec<(String, f64)>,
    pub fold_scores: Vec<f64>,
    pub mean_relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub best: usize,
    pub best_plan: StagePlan,
}

impl GridReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let keys: Vec<&str> = self.rows[0].point.iter().map(|(k, _)| k.as_str()).collect();
        let folds = self.rows[0].fold_scores.len();
        out.push_str(&keys.join("\t"));
        out.push_str("\tmean_relative");
        for f in 0..folds {
            let _ = write!(out, "\tfold_{}", f + 1);
        }
        out.push_str("\tbest\n");
        for (i, row) in self.rows.iter().enumerate() {
            let vals: Vec<String> = row.point.iter().map(|(_, v)| v.to_string()).collect();
            out.push_str(&vals.join("\t"));
            let _ = write!(out, "\t{:.6}", row.mean_relative);
            for s in &row.fold_scores {
                let _ = write!(out, "\t{s:.6}");
            }
            let _ = writeln!(out, "\t{}", u8::from(i == self.best));
        }
        out
    }
}

/// Train/holdout features for one fold.
pub struct FoldFeatures {
    pub train: Vec<FeatureRow>,
    pub holdout: Vec<FeatureRow>,
    pub fingerprint: String,
}

/// Mean relative FNC score of `plan` over the folds.
pub fn cross_validate(plan: &StagePlan, folds: &[FoldFeatures]) -> Result<Vec<f64>> {
    folds
        .iter()
        .map(|f| {
            let p = train_on_features(plan, &f.train, &f.fingerprint)?;
            let pred = p.predict(&f.holdout, &f.fingerprint)?;
            let refs: Vec<&FeatureRow> = f.holdout.iter().collect();
            let truth = gold(&refs)?;
            let (score, max) = fnc_score(&truth, &pred)?;
            Ok(score / max)
        })
        .collect()
}

fn rounds(p: &StagePlan) -> usize {
    match p.variant {
        Variant::OneStage => p.stage1_params.n_rounds,
        Variant::TwoStage => p.stage1_params.n_rounds + p.stage2_params.n_rounds,
    }
}

fn depth(p: &StagePlan) -> (usize, usize) {
    match p.variant {
        Variant::OneStage => (p.stage1_params.max_depth, 0),
        Variant::TwoStage => (p.stage1_params.max_depth, p.stage2_params.max_depth),
    }
}

/// Scores every grid point on prepared folds. The best point has the highest
/// mean; ties go to fewer rounds, then shallower trees, then grid order.
pub fn grid_search_prepared(template: &StagePlan, grid: &Grid, folds: &[FoldFeatures]) -> Result<GridReport> {
    grid.validate()?;
    if folds.len() < 2 {
        return Err(Error::InvalidArgument("grid search needs at least two folds".into()));
    }
    let points = grid.points();
    let plans: Vec<StagePlan> = points.iter().map(|p| Grid::apply(template, p)).collect::<Result<_>>()?;
    let scores: Vec<Vec<f64>> = plans
        .par_iter()
        .map(|p| cross_validate(p, folds))
        .collect::<Result<_>>()?;
    let rows: Vec<GridRow> = points
        .into_iter()
        .zip(scores)
        .map(|(point, fold_scores)| GridRow {
            mean_relative: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
            point,
            fold_scores,
        })
        .collect();
    let mut best = 0;
    for i in 1..rows.len() {
        let (a, b) = (&rows[i], &rows[best]);
        let better = a.mean_relative > b.mean_relative
            || (a.mean_relative == b.mean_relative
                && (rounds(&plans[i]), depth(&plans[i])) < (rounds(&plans[best]), depth(&plans[best])));
        if better {
            best = i;
        }
    }
    Ok(GridReport {
        best_plan: plans[best].clone(),
        rows,
        best,
    })
}

/// K-fold grid search over `ds` with folds grouped by body. `featurize` turns a
/// (train, holdout) split into features; it must fit any resources on the train
/// part only.
pub fn grid_search<F>(
    template: &StagePlan,
    grid: &Grid,
    ds: &Dataset,
    k: usize,
    seed: u64,
    featurize: F,
) -> Result<GridReport>
where
    F: Fn(&Dataset, &Dataset) -> Result<FoldFeatures> + Sync,
{
    grid.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument("grid search needs at least two folds".into()));
    }
    let folds = make_folds(ds, k, seed)?;
    let prepared: Vec<FoldFeatures> = folds
        .par_iter()
        .map(|f| featurize(&ds.subset(&f.train), &ds.subset(&f.holdout)))
        .collect::<Result<_>>()?;
    grid_search_prepared(template, grid, &prepared)
}

/// A `featurize` callback that refits TF-IDF and the topic model on every
/// fold's training part.
pub fn refit_per_fold<'a>(
    config: &'a FeatureConfig,
    embeddings: Option<Arc<EmbeddingTable<f32>>>,
    sidecars: Sidecars<'a>,
) -> impl Fn(&Dataset, &Dataset) -> Result<FoldFeatures> + Sync + 'a {
    move |train, holdout| {
        let mut r = FeatureResources::fit(train, config.clone(), None)?;
        if let Some(e) = &embeddings {
            r = r.with_embeddings(Arc::clone(e), None)?;
        }
        Ok(FoldFeatures {
            train: r.extract_dataset(train, &sidecars)?,
            holdout: r.extract_dataset(holdout, &sidecars)?,
            fingerprint: r.fingerprint().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    fn row(pair_id: usize, stance: Stance, a: f64, b: f64) -> FeatureRow {
        FeatureRow {
            pair_id,
            stance: Some(stance),
            features: FeatureVector {
                word_overlap: a,
                cosine_tfidf: b,
                ..Default::default()
            },
        }
    }

    /// Unrelated pairs have low overlap; related ones are split by the tf-idf cosine.
    fn toy() -> Vec<FeatureRow> {
        let mut rows = Vec::new();
        for i in 0..40 {
            let t = (i % 10) as f64 / 10.0;
            rows.push(row(rows.len(), Stance::Unrelated, 0.05 * t, t));
            rows.push(row(rows.len(), Stance::Agree, 0.6 + 0.1 * t, 0.9));
            rows.push(row(rows.len(), Stance::Discuss, 0.6 + 0.1 * t, 0.5));
            if i % 4 == 0 {
                rows.push(row(rows.len(), Stance::Disagree, 0.6 + 0.1 * t, 0.1));
            }
        }
        rows
    }

    fn small() -> TrainParams {
        TrainParams {
            n_rounds: 20,
            max_depth: 3,
            ..Default::default()
        }
    }

    #[test]
    fn two_stage_routing_and_fit() {
        let rows = toy();
        let plan = StagePlan::new(Variant::TwoStage, small());
        let p = train_on_features(&plan, &rows, "fp").unwrap();
        let pred = p.predict(&rows, "fp").unwrap();
        let truth: Vec<Stance> = rows.iter().map(|r| r.stance.unwrap()).collect();
        assert_eq!(pred, truth);
        let refs: Vec<&FeatureRow> = rows.iter().collect();
        let s1 = p.stage1.predict_labels(&matrix(&refs, None).unwrap()).unwrap();
        for (c, s) in s1.iter().zip(&pred) {
            assert_eq!(*c == STAGE1_UNRELATED, *s == Stance::Unrelated);
        }
        assert!(matches!(
            p.predict(&rows, "other"),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn one_stage_predicts_four_classes() {
        let rows = toy();
        let p = train_on_features(&StagePlan::new(Variant::OneStage, small()), &rows, "fp").unwrap();
        assert_eq!(p.stage1.n_classes, 4);
        assert!(p.stage2.is_none());
        let truth: Vec<Stance> = rows.iter().map(|r| r.stance.unwrap()).collect();
        assert_eq!(p.predict(&rows, "fp").unwrap(), truth);
    }

    #[test]
    fn only_unrelated_is_an_error() {
        let rows: Vec<FeatureRow> = (0..5).map(|i| row(i, Stance::Unrelated, 0.0, 0.0)).collect();
        let plan = StagePlan::new(Variant::TwoStage, small());
        assert!(matches!(train_on_features(&plan, &rows, "fp"), Err(Error::Empty(_))));
    }

    #[test]
    fn oversampling_hits_stage_two_only() {
        let rows = toy();
        let mut plan = StagePlan::new(Variant::TwoStage, small());
        plan.oversample = Some(Oversample::disagree_to_agree(3));
        let counts = stage_label_counts(&plan, &rows).unwrap();
        assert_eq!(counts[0], [40, 10, 40, 40]);
        assert_eq!(counts[1], [40, 40, 40, 0]);
        plan.variant = Variant::OneStage;
        assert_eq!(stage_label_counts(&plan, &rows).unwrap()[0], [40, 40, 40, 40]);
    }

    #[test]
    fn grid_enumeration_and_ties() {
        let mut g = Grid::default();
        g.0.insert("max_depth".into(), vec![2.0, 6.0]);
        g.0.insert("stage2.n_rounds".into(), vec![5.0, 10.0, 20.0]);
        assert_eq!(g.points().len(), 6);
        let plan = Grid::apply(&StagePlan::new(Variant::TwoStage, small()), &g.points()[5]).unwrap();
        assert_eq!((plan.stage1_params.max_depth, plan.stage2_params.n_rounds), (6, 20));
        assert_eq!(plan.stage1_params.n_rounds, 20);
        g.0.insert("bogus".into(), vec![1.0]);
        assert!(g.validate().is_err());
        let mut bad = Grid::default();
        bad.0.insert("max_depth".into(), vec![1.5]);
        assert!(Grid::apply(&StagePlan::new(Variant::OneStage, small()), &bad.points()[0]).is_err());

        // every point separates the toy data perfectly, so the cheapest wins
        let rows = toy();
        let folds: Vec<FoldFeatures> = (0..2)
            .map(|k| FoldFeatures {
                train: rows.iter().filter(|r| r.pair_id % 2 != k).cloned().collect(),
                holdout: rows.iter().filter(|r| r.pair_id % 2 == k).cloned().collect(),
                fingerprint: "fp".into(),
            })
            .collect();
        let mut g = Grid::default();
        g.0.insert("n_rounds".into(), vec![30.0, 20.0]);
        g.0.insert("max_depth".into(), vec![4.0, 3.0]);
        let report = grid_search_prepared(&StagePlan::new(Variant::TwoStage, small()), &g, &folds).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.rows[report.best].mean_relative, 1.0);
        assert_eq!(report.best_plan.stage1_params.n_rounds, 20);
        assert_eq!(report.best_plan.stage1_params.max_depth, 3);
        assert_eq!(report.to_tsv().lines().count(), 5);
    }

    #[test]
    fn bundle_round_trip() {
        let rows = toy();
        let p = train_on_features(&StagePlan::new(Variant::TwoStage, small()), &rows, "fp").unwrap();
        let dir = tempfile::tempdir().unwrap();
        p.save(dir.path()).unwrap();
        let back = TrainedPipeline::load(dir.path()).unwrap();
        assert_eq!(
            (&back.plan, &back.fingerprint, &back.stage1, &back.stage2),
            (&p.plan, &p.fingerprint, &p.stage1, &p.stage2)
        );
        assert_eq!(back.predict(&rows, "fp").unwrap(), p.predict(&rows, "fp").unwrap());
        for f in [
            "plan.json",
            "stage1.model.json",
            "stage2.model.json",
            "resources/fingerprint",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
