use serde::{Deserialize, Serialize};

use super::TrainParams;
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate<T> {
    pub threshold: T,
    pub gain: T,
}

/// Structure score `G^2 / (H + lambda)`.
#[inline]
pub(crate) fn score<T: Scalar>(g: T, h: T, lambda: T) -> T {
    g * g / (h + lambda)
}

/// `0.5 * [S(L) + S(R) - S(parent)] - gamma`.
#[inline]
pub fn split_gain<T: Scalar>(gl: T, hl: T, gr: T, hr: T, lambda: T, gamma: T) -> T {
    let half = T::lit(0.5);
    half * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda)) - gamma
}

/// Threshold strictly above `lo` and at most `hi`, so `x < threshold` separates them.
#[inline]
pub(crate) fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) * T::lit(0.5);
    if lo < mid && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Exact greedy scan of one feature column.
///
/// Candidates sit at midpoints between consecutive distinct values; splits with a
/// child hessian below `min_child_weight` are skipped. Returns the first
/// (lowest-threshold) candidate of maximal gain, or `None` when no gain is positive.
pub fn find_best_split<T: Scalar>(values: &[T], g: &[T], h: &[T], params: &TrainParams) -> Option<SplitCandidate<T>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let total_g: T = g.iter().copied().sum();
    let total_h: T = h.iter().copied().sum();
    let lambda = T::lit(params.lambda_l2);
    let gamma = T::lit(params.gamma_min_gain);
    let mcw = T::lit(params.min_child_weight);

    let mut best: Option<SplitCandidate<T>> = None;
    let (mut gl, mut hl) = (T::zero(), T::zero());
    for w in 0..order.len() {
        let i = order[w];
        if w > 0 {
            let prev = values[order[w - 1]];
            if values[i] > prev {
                let (gr, hr) = (total_g - gl, total_h - hl);
                if hl >= mcw && hr >= mcw {
                    let gain = split_gain(gl, hl, gr, hr, lambda, gamma);
                    if gain > T::zero() && best.is_none_or(|b| gain > b.gain) {
                        best = Some(SplitCandidate {
                            threshold: midpoint(prev, values[i]),
                            gain,
                        });
                    }
                }
            }
        }
        gl = gl + g[i];
        hl = hl + h[i];
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn loose() -> TrainParams {
        TrainParams {
            min_child_weight: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn constant_column_has_no_split() {
        assert!(find_best_split(&[2.0, 2.0, 2.0], &[1.0, -1.0, 0.5], &[0.25; 3], &loose()).is_none());
    }

    #[test]
    fn separable_column_splits_at_zero() {
        // uniform 2-class probabilities, labels 0,0,1,1; gradients for class 0
        let g = [-0.5, -0.5, 0.5, 0.5];
        let h = [0.25; 4];
        let s = find_best_split(&[-1.0, -1.0, 1.0, 1.0], &g, &h, &loose()).unwrap();
        assert_eq!(s.threshold, 0.0);
        // 0.5 * (1/1.5 + 1/1.5 - 0) with lambda = 1
        assert_abs_diff_eq!(s.gain, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn min_child_weight_blocks_small_children() {
        let g = [-0.5, -0.5, 0.5, 0.5];
        let h = [0.25; 4];
        assert!(find_best_split(&[-1.0, -1.0, 1.0, 1.0], &g, &h, &TrainParams::default()).is_none());
    }

    #[test]
    fn midpoint_between_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo < t && t <= hi);
    }
}
