use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::embed::EmbeddingTable;
use super::transport::{relaxed_cost, solve_transport, TransportProblem};
use crate::num::Scalar;

pub const DEFAULT_WMD_CAP: f64 = 10.0;
/// Largest cost matrix (rows x columns) solved exactly.
pub const EXACT_WMD_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmdConfig {
    /// Value returned when either document has no embedded token.
    pub cap: f64,
    pub exact_limit: usize,
}

impl Default for WmdConfig {
    fn default() -> Self {
        WmdConfig {
            cap: DEFAULT_WMD_CAP,
            exact_limit: EXACT_WMD_LIMIT,
        }
    }
}

/// Normalized bag of words over covered tokens, in sorted token order.
pub fn nbow<'a, T: Scalar>(tokens: &'a [String], table: &EmbeddingTable<T>) -> Vec<(&'a str, T)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens.iter().filter(|t| table.get(t).is_some()) {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let total = T::from_usize_lossy(total);
    counts
        .into_iter()
        .map(|(t, c)| (t, T::from_usize_lossy(c) / total))
        .collect()
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Builds the transport problem between two documents, or `None` if either has
/// no embedded token.
pub(crate) fn wmd_problem<T: Scalar>(
    a: &[String],
    b: &[String],
    table: &EmbeddingTable<T>,
) -> Option<TransportProblem<T>> {
    let left = nbow(a, table);
    let right = nbow(b, table);
    if left.is_empty() || right.is_empty() {
        return None;
    }
    let mut cost = Vec::with_capacity(left.len() * right.len());
    for (ta, _) in &left {
        let va = table.get(ta).unwrap();
        for (tb, _) in &right {
            cost.push(euclidean(va, table.get(tb).unwrap()));
        }
    }
    Some(TransportProblem {
        supply: left.into_iter().map(|(_, w)| w).collect(),
        demand: right.into_iter().map(|(_, w)| w).collect(),
        cost,
    })
}

/// Word Mover's Distance between two token sequences.
///
/// Exact when the cost matrix has at most `cfg.exact_limit` entries, otherwise
/// the relaxed lower bound.
pub fn wmd<T: Scalar>(a: &[String], b: &[String], table: &EmbeddingTable<T>, cfg: &WmdConfig) -> T {
    let Some(problem) = wmd_problem(a, b, table) else {
        return T::lit(cfg.cap);
    };
    if problem.rows() * problem.cols() > cfg.exact_limit {
        return relaxed_cost(&problem);
    }
    match solve_transport(&problem) {
        Ok(plan) => plan.cost.max(T::zero()),
        Err(e) => {
            // only reachable through rounding in the marginals
            log::warn!("exact WMD failed ({e}); using relaxed bound");
            relaxed_cost(&problem)
        }
    }
}
