use crate::error::{Error, Result};
use crate::num::Scalar;

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exp: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Softmax cross-entropy derivatives for row-major `n x k` probabilities:
/// `g = p - [y = k]`, `h = p (1 - p)`.
pub fn grad_hess<T: Scalar>(labels: &[usize], probs: &[T], n_classes: usize) -> Result<(Vec<T>, Vec<T>)> {
    if probs.len() != labels.len() * n_classes {
        return Err(Error::Dimension {
            context: "gradient probabilities",
            expected: labels.len() * n_classes,
            found: probs.len(),
        });
    }
    let mut g = Vec::with_capacity(probs.len());
    let mut h = Vec::with_capacity(probs.len());
    for (row, &y) in probs.chunks(n_classes).zip(labels) {
        if y >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        for (k, &p) in row.iter().enumerate() {
            let target = if k == y { T::one() } else { T::zero() };
            g.push(p - target);
            h.push(p * (T::one() - p));
        }
    }
    Ok((g, h))
}

/// Mean negative log-likelihood of the true classes.
pub fn log_loss<T: Scalar>(labels: &[usize], probs: &[T], n_classes: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .chunks(n_classes)
        .zip(labels)
        .map(|(row, &y)| -row[y].to_f64_lossy().max(1e-15).ln())
        .sum();
    total / labels.len() as f64
}
