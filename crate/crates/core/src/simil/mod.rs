//! Vector-space similarity measures and Word Mover's Distance.

mod embed;
mod tfidf;
mod transport;
mod wmd;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::num::Scalar;

pub use embed::{avg_embedding, load_embeddings, load_embeddings_filtered, EmbeddingTable};
pub use tfidf::{fit_tfidf, SparseVec, TfIdfModel};
pub use transport::{relaxed_cost, solve_transport, TransportPlan, TransportProblem};
pub use wmd::{nbow, wmd, WmdConfig, DEFAULT_WMD_CAP, EXACT_WMD_LIMIT};

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            context: "cosine",
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v) {
        dot = dot + a * b;
        nu = nu + a * a;
        nv = nv + b * b;
    }
    if nu == T::zero() || nv == T::zero() {
        return Ok(T::zero());
    }
    let c = dot / (nu.sqrt() * nv.sqrt());
    Ok(c.max(-T::one()).min(T::one()))
}

/// Presence vectors over the sorted union of both token sets.
pub fn pair_binary_vectors<T: Scalar>(h: &[String], b: &[String]) -> (Vec<T>, Vec<T>) {
    let hs: BTreeSet<&str> = h.iter().map(String::as_str).collect();
    let bs: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let indicator = |present: bool| if present { T::one() } else { T::zero() };
    hs.union(&bs)
        .map(|t| (indicator(hs.contains(t)), indicator(bs.contains(t))))
        .unzip()
}

/// Fraction of differing positions; 0 for two empty vectors.
pub fn hamming_norm<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            context: "hamming",
            expected: u.len(),
            found: v.len(),
        });
    }
    if u.is_empty() {
        return Ok(T::zero());
    }
    let diff = u.iter().zip(v).filter(|(a, b)| a != b).count();
    Ok(T::from_usize_lossy(diff) / T::from_usize_lossy(u.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn cosine_cases() {
        assert_abs_diff_eq!(cosine(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 5.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine(&[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0]).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_eq!(cosine(&[0.0f32, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn binary_vectors() {
        let (u, v) = pair_binary_vectors::<f64>(&toks(&["a", "b"]), &toks(&["b", "c"]));
        assert_eq!(u, vec![1.0, 1.0, 0.0]);
        assert_eq!(v, vec![0.0, 1.0, 1.0]);
        let (u, v) = pair_binary_vectors::<f64>(&toks(&["x", "y", "x"]), &toks(&["y", "x"]));
        assert_eq!(u, v);
        let (u, _) = pair_binary_vectors::<f64>(&[], &toks(&["q"]));
        assert_eq!(u, vec![0.0]);
    }

    #[test]
    fn hamming_cases() {
        assert_eq!(hamming_norm(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            hamming_norm(&[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(hamming_norm(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(hamming_norm::<f64>(&[], &[]).unwrap(), 0.0);
        assert!(hamming_norm(&[1.0], &[]).is_err());
    }

    proptest! {
        #[test]
        fn cosine_bounds(u in proptest::collection::vec(0.0f64..10.0, 6), v in proptest::collection::vec(0.0f64..10.0, 6),
                         w in proptest::collection::vec(-10.0f64..10.0, 6)) {
            let c = cosine(&u, &v).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            let c = cosine(&u, &w).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn hamming_symmetric(u in proptest::collection::vec(0u8..2, 1..20), seed in 0u64..1000) {
            let u: Vec<f64> = u.into_iter().map(f64::from).collect();
            let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| if (seed >> (i % 10)) & 1 == 1 { 1.0 - x } else { *x }).collect();
            let a = hamming_norm(&u, &v).unwrap();
            prop_assert_eq!(a, hamming_norm(&v, &u).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
