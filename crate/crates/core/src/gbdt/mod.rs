//! Gradient-boosted decision trees with a softmax objective and Newton leaf values.

mod loss;
mod split;
mod tree;

use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

pub use loss::{grad_hess, log_loss, softmax};
pub use split::{find_best_split, split_gain, SplitCandidate};
pub use tree::TreeNode;

use tree::{grow_tree, SortedColumns};

pub const MODEL_VERSION: &str = "gbdt-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub gamma_min_gain: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_rounds: 1000,
            learning_rate: 0.1,
            max_depth: 6,
            lambda_l2: 1.0,
            gamma_min_gain: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.learning_rate) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !unit(self.subsample) || !unit(self.colsample) {
            return Err(Error::InvalidArgument(
                "subsample and colsample must be in (0, 1]".into(),
            ));
        }
        if !(self.lambda_l2 >= 0.0 && self.gamma_min_gain >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(Error::InvalidArgument(
                "lambda_l2, gamma_min_gain and min_child_weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "feature matrix",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "feature matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Copies the selected rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the selected columns.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        DenseMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }
}

/// Trained multiclass ensemble: `trees[round][class]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BoostedEnsemble<T> {
    pub version: String,
    pub n_classes: usize,
    pub n_features: usize,
    pub base_score: T,
    pub params: TrainParams,
    /// Mean training log-loss after each round.
    pub train_loss: Vec<f64>,
    pub trees: Vec<Vec<TreeNode<T>>>,
}

/// Fits a softmax boosted ensemble.
///
/// Each round computes per-class gradients and hessians from the current logits,
/// then grows one tree per class on the (optionally subsampled) rows and columns.
pub fn fit<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[usize],
    n_classes: usize,
    params: &TrainParams,
) -> Result<BoostedEnsemble<T>> {
    params.validate()?;
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(Error::Empty("training matrix"));
    }
    if y.len() != n {
        return Err(Error::Dimension {
            context: "training labels",
            expected: n,
            found: y.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::InvalidArgument("at least two classes are required".into()));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training matrix".into()));
    }

    let sorted = SortedColumns::new(x);
    let base_score = T::zero();
    let mut logits = vec![base_score; n * n_classes];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_sub = ((n as f64 * params.subsample).round() as usize).clamp(1, n);
    let f_sub = ((x.cols() as f64 * params.colsample).round() as usize).clamp(1, x.cols());

    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_loss = Vec::with_capacity(params.n_rounds);
    let mut probs = vec![T::zero(); n * n_classes];
    let mut g_k = vec![T::zero(); n];
    let mut h_k = vec![T::zero(); n];
    for _ in 0..params.n_rounds {
        for (p, z) in probs.chunks_mut(n_classes).zip(logits.chunks(n_classes)) {
            p.copy_from_slice(&softmax(z));
        }
        let (g, h) = grad_hess(y, &probs, n_classes)?;

        let in_bag: Vec<bool> = if n_sub < n {
            let mut mask = vec![false; n];
            for i in sample(&mut rng, n, n_sub).into_iter() {
                mask[i] = true;
            }
            mask
        } else {
            vec![true; n]
        };

        let mut round = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            let features: Vec<usize> = if f_sub < x.cols() {
                let mut f: Vec<usize> = sample(&mut rng, x.cols(), f_sub).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..x.cols()).collect()
            };
            for i in 0..n {
                g_k[i] = g[i * n_classes + k];
                h_k[i] = h[i * n_classes + k];
            }
            round.push(grow_tree(x, &sorted, &g_k, &h_k, &in_bag, &features, params));
        }
        for i in 0..n {
            let row = x.row(i);
            for (k, tree) in round.iter().enumerate() {
                logits[i * n_classes + k] = logits[i * n_classes + k] + tree.predict(row);
            }
        }
        trees.push(round);

        for (p, z) in probs.chunks_mut(n_classes).zip(logits.chunks(n_classes)) {
            p.copy_from_slice(&softmax(z));
        }
        train_loss.push(log_loss(y, &probs, n_classes));
    }

    Ok(BoostedEnsemble {
        version: MODEL_VERSION.into(),
        n_classes,
        n_features: x.cols(),
        base_score,
        params: params.clone(),
        train_loss,
        trees,
    })
}

impl<T: Scalar> BoostedEnsemble<T> {
    pub fn n_rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                context: "prediction input",
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut z = vec![self.base_score; self.n_classes];
        for round in &self.trees {
            for (zk, tree) in z.iter_mut().zip(round) {
                *zk = *zk + tree.predict(x);
            }
        }
        Ok(z)
    }

    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn predict_label(&self, x: &[T]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for k in 1..p.len() {
            if p[k] > p[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn predict_labels(&self, x: &DenseMatrix<T>) -> Result<Vec<usize>> {
        (0..x.rows()).map(|r| self.predict_label(x.row(r))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Version {
                expected: MODEL_VERSION.into(),
                found: self.version.clone(),
            });
        }
        if self.n_classes < 2 || self.n_features == 0 {
            return Err(Error::Malformed(
                "model needs two classes and at least one feature".into(),
            ));
        }
        for (r, round) in self.trees.iter().enumerate() {
            if round.len() != self.n_classes {
                return Err(Error::Malformed(format!(
                    "round {r} has {} trees for {} classes",
                    round.len(),
                    self.n_classes
                )));
            }
            for tree in round {
                tree.validate(self.n_features)
                    .map_err(|e| Error::Malformed(format!("round {r}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the version before the full structure so old files get a clear error
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        match probe.get("version").and_then(|v| v.as_str()) {
            Some(MODEL_VERSION) => {}
            Some(other) => {
                return Err(Error::Version {
                    expected: MODEL_VERSION.into(),
                    found: other.into(),
                })
            }
            None => return Err(Error::Malformed("missing version field".into())),
        }
        let model: Self = serde_json::from_value(probe).map_err(|e| Error::Malformed(e.to_string()))?;
        model.validate()?;
        Ok(model)
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

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(rounds: usize, depth: usize) -> TrainParams {
        TrainParams {
            n_rounds: rounds,
            max_depth: depth,
            learning_rate: 0.3,
            min_child_weight: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn constant_label() {
        let x = DenseMatrix::new(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = fit(&x, &[2; 5], 3, &quick(1, 3)).unwrap();
        for v in [-10.0, 0.5, 100.0] {
            assert_eq!(m.predict_label(&[v]).unwrap(), 2);
        }
    }

    #[test]
    fn separable_one_dimensional() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let x = DenseMatrix::new(20, 1, xs).unwrap();
        let m = fit(&x, &y, 2, &quick(10, 1)).unwrap();
        assert_eq!(m.predict_labels(&x).unwrap(), y);
        assert!(m.trees.iter().flatten().all(|t| t.depth() <= 1));
    }

    #[test]
    fn zero_rounds_is_uniform() {
        let x = DenseMatrix::new(2, 2, vec![0.0f64, 1.0, 1.0, 0.0]).unwrap();
        let m = fit(&x, &[0, 1], 3, &quick(0, 2)).unwrap();
        let p = m.predict_proba(&[0.3, 0.3]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(m.predict_label(&[0.3, 0.3]).unwrap(), 0);
        assert!(m.predict_label(&[0.3]).is_err());
    }

    #[test]
    fn input_validation() {
        let x = DenseMatrix::new(2, 1, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(fit(&x, &[0, 1], 2, &quick(1, 1)), Err(Error::NonFinite(_))));
        let x = DenseMatrix::<f64>::new(0, 1, vec![]).unwrap();
        assert!(fit(&x, &[], 2, &quick(1, 1)).is_err());
        let x = DenseMatrix::new(1, 1, vec![0.0]).unwrap();
        assert!(fit(&x, &[5], 2, &quick(1, 1)).is_err());
        let bad = TrainParams {
            learning_rate: 0.0,
            ..quick(1, 1)
        };
        assert!(fit(&x, &[0], 2, &bad).is_err());
    }

    #[test]
    fn serialization_is_canonical() {
        let x = DenseMatrix::new(6, 2, vec![0.0, 1.0, 1.0, 0.5, 2.0, 0.1, 3.0, 0.9, 4.0, 0.2, 5.0, 0.3]).unwrap();
        let m = fit(&x, &[0, 0, 1, 1, 2, 2], 3, &quick(3, 2)).unwrap();
        let a = m.to_json().unwrap();
        let back = BoostedEnsemble::<f64>::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
        for r in 0..6 {
            assert_eq!(
                back.predict_proba(x.row(r)).unwrap(),
                m.predict_proba(x.row(r)).unwrap()
            );
        }
        assert!(matches!(
            BoostedEnsemble::<f64>::from_json(&a[..a.len() / 2]),
            Err(Error::Malformed(_))
        ));
        let other = a.replacen(MODEL_VERSION, "gbdt-v0", 1);
        assert!(matches!(
            BoostedEnsemble::<f64>::from_json(&other),
            Err(Error::Version { .. })
        ));
    }

    #[test]
    fn single_leaf_round_trip() {
        let x = DenseMatrix::new(2, 1, vec![0.0f32, 1.0]).unwrap();
        let m = fit(&x, &[0, 1], 2, &quick(2, 0)).unwrap();
        assert!(m.trees.iter().flatten().all(|t| t.depth() == 0));
        let back = BoostedEnsemble::<f32>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn seeded_subsampling_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64, i as f64])
            .collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let p = TrainParams {
            subsample: 0.7,
            colsample: 0.67,
            seed: 9,
            ..quick(5, 3)
        };
        assert_eq!(
            fit(&x, &y, 3, &p).unwrap().to_json().unwrap(),
            fit(&x, &y, 3, &p).unwrap().to_json().unwrap()
        );
    }
}
