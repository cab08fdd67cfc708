//! Brute-force references for the numeric kernels. Nothing here calls into
//! the code it checks except for plain data containers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use fnc_stance::gbdt::{DenseMatrix, TrainParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::lp::transport_cost;

/// Cross-entropy of one sample via log-sum-exp.
pub fn sample_loss(z: &[f64], y: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[y]
}

fn shifted(z: &[f64], k: usize, d: f64) -> Vec<f64> {
    let mut w = z.to_vec();
    w[k] += d;
    w
}

/// Richardson-extrapolated central first and second differences of
/// [`sample_loss`] along logit `k`.
pub fn numeric_derivatives(z: &[f64], y: usize, k: usize) -> (f64, f64) {
    let first = |h: f64| (sample_loss(&shifted(z, k, h), y) - sample_loss(&shifted(z, k, -h), y)) / (2.0 * h);
    let second = |h: f64| {
        (sample_loss(&shifted(z, k, h), y) - 2.0 * sample_loss(z, y) + sample_loss(&shifted(z, k, -h), y)) / (h * h)
    };
    let (h1, h2) = (1e-3, 1e-2);
    let g = (4.0 * first(h1 / 2.0) - first(h1)) / 3.0;
    let hess = (4.0 * second(h2 / 2.0) - second(h2)) / 3.0;
    (g, hess)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Noisy nonlinear classification data with `classes` ordinal labels.
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: usize) -> (DenseMatrix<f64>, Vec<usize>) {
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let score = row[0] + 0.5 * row[1 % d] * row[d - 1] + 0.3 * rng.gen_range(-1.0..1.0);
        y.push(((score + 1.5) / 3.0 * classes as f64).clamp(0.0, classes as f64 - 1.0) as usize);
        data.extend(row);
    }
    (DenseMatrix::new(n, d, data).unwrap(), y)
}

/// Best `(feature, threshold, gain)` by summing both children for every
/// midpoint of every column.
pub fn exhaustive_split(x: &DenseMatrix<f64>, g: &[f64], h: &[f64], p: &TrainParams) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    let score = |g: f64, h: f64| g * g / (h + p.lambda_l2);
    let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..x.rows() {
                if x.get(i, f) < thr {
                    gl += g[i];
                    hl += h[i];
                }
            }
            let (gr, hr) = (gt - gl, ht - hl);
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gt, ht)) - p.gamma_min_gain;
            if gain > 0.0 && best.is_none_or(|b| gain > b.2) {
                best = Some((f, thr, gain));
            }
        }
    }
    best
}

/// Two topics over disjoint vocabularies; returns documents and their true topic.
pub fn two_topic_corpus(docs: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<String>>, Vec<usize>) {
    let vocab = [
        (0..20).map(|i| format!("alpha{i}")).collect::<Vec<_>>(),
        (0..20).map(|i| format!("omega{i}")).collect::<Vec<_>>(),
    ];
    let mut out = Vec::new();
    let mut labels = Vec::new();
    for d in 0..docs {
        let t = d % 2;
        let len = rng.gen_range(30..60);
        out.push((0..len).map(|_| vocab[t][rng.gen_range(0..20)].clone()).collect());
        labels.push(t);
    }
    (out, labels)
}

/// Fraction of items whose cluster's majority label matches their own.
pub fn purity(assigned: &[usize], truth: &[usize]) -> f64 {
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&a, &t) in assigned.iter().zip(truth) {
        *counts.entry(a).or_default().entry(t).or_default() += 1;
    }
    let hit: usize = counts.values().map(|c| c.values().max().copied().unwrap_or(0)).sum();
    hit as f64 / truth.len() as f64
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
        .0
}

/// Word Mover's Distance solved as a dense LP; `None` if either side has no
/// embedded token.
pub fn wmd_lp(a: &[String], b: &[String], vectors: &HashMap<String, Vec<f64>>) -> Option<f64> {
    fn weights<'a>(doc: &'a [String], vectors: &HashMap<String, Vec<f64>>) -> Vec<(&'a str, f64)> {
        let mut c: BTreeMap<&str, f64> = BTreeMap::new();
        for t in doc.iter().filter(|t| vectors.contains_key(*t)) {
            *c.entry(t.as_str()).or_default() += 1.0;
        }
        let total: f64 = c.values().sum();
        c.into_iter().map(|(t, n)| (t, n / total)).collect()
    }
    let (wa, wb) = (weights(a, vectors), weights(b, vectors));
    if wa.is_empty() || wb.is_empty() {
        return None;
    }
    let mut cost = Vec::new();
    for (ta, _) in &wa {
        for (tb, _) in &wb {
            let d2: f64 = vectors[*ta]
                .iter()
                .zip(&vectors[*tb])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            cost.push(d2.sqrt());
        }
    }
    let supply: Vec<f64> = wa.iter().map(|p| p.1).collect();
    let demand: Vec<f64> = wb.iter().map(|p| p.1).collect();
    Some(transport_cost(&supply, &demand, &cost))
}

/// Label counts of an FNC stance CSV, read with a bare CSV reader and the
/// last column taken as the label.
pub fn count_stance_labels(path: &Path) -> HashMap<String, usize> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        *out.entry(rec[rec.len() - 1].trim().to_string()).or_default() += 1;
    }
    out
}
