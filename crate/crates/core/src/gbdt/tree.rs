use serde::{Deserialize, Serialize};

use super::split::{midpoint, split_gain};
use super::{DenseMatrix, TrainParams};
use crate::num::Scalar;

/// Regression tree node; rows with `x[feature] < threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        threshold: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        weight: T,
    },
}

impl<T: Scalar> TreeNode<T> {
    pub fn predict(&self, x: &[T]) -> T {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<(), String> {
        match self {
            TreeNode::Leaf { weight } if weight.is_finite() => Ok(()),
            TreeNode::Leaf { .. } => Err("non-finite leaf weight".into()),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= n_features {
                    return Err(format!("split on feature {feature} of {n_features}"));
                }
                if !threshold.is_finite() {
                    return Err("non-finite split threshold".into());
                }
                left.validate(n_features)?;
                right.validate(n_features)
            }
        }
    }
}

/// Per-feature row orderings by ascending value (row index breaks ties).
pub(crate) struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub(crate) fn new<T: Scalar>(x: &DenseMatrix<T>) -> Self {
        let order = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, f)
                        .partial_cmp(&x.get(b as usize, f))
                        .unwrap()
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

const UNASSIGNED: u32 = u32::MAX;

struct BuildNode<T> {
    g: T,
    h: T,
    depth: usize,
    split: Option<(usize, T, usize, usize)>,
}

#[derive(Clone, Copy)]
struct Scan<T> {
    gl: T,
    hl: T,
    last: T,
    seen: bool,
    best_gain: T,
    best: Option<(usize, T, T, T)>,
}

/// Grows one tree level by level with an exact greedy search over `features`.
///
/// `in_bag` marks the rows used for this tree. Leaf weights are the
/// learning-rate-scaled Newton step `-G / (H + lambda)`.
pub(crate) fn grow_tree<T: Scalar>(
    x: &DenseMatrix<T>,
    sorted: &SortedColumns,
    g: &[T],
    h: &[T],
    in_bag: &[bool],
    features: &[usize],
    params: &TrainParams,
) -> TreeNode<T> {
    let lambda = T::lit(params.lambda_l2);
    let gamma = T::lit(params.gamma_min_gain);
    let mcw = T::lit(params.min_child_weight);

    let mut node_of: Vec<u32> = in_bag.iter().map(|&b| if b { 0 } else { UNASSIGNED }).collect();
    let (mut g0, mut h0) = (T::zero(), T::zero());
    for i in (0..g.len()).filter(|&i| in_bag[i]) {
        g0 = g0 + g[i];
        h0 = h0 + h[i];
    }
    let mut nodes = vec![BuildNode {
        g: g0,
        h: h0,
        depth: 0,
        split: None,
    }];
    let mut open: Vec<usize> = vec![0];

    while !open.is_empty() {
        if nodes[open[0]].depth >= params.max_depth {
            break;
        }
        // slot of each open node in `scans`
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &n) in open.iter().enumerate() {
            slot[n] = s;
        }
        let fresh = Scan {
            gl: T::zero(),
            hl: T::zero(),
            last: T::zero(),
            seen: false,
            best_gain: T::zero(),
            best: None,
        };
        let mut best: Vec<Option<(usize, T, T, T)>> = vec![None; open.len()];
        let mut best_gain: Vec<T> = vec![T::zero(); open.len()];
        for &f in features {
            let mut scans = vec![fresh; open.len()];
            for (s, sc) in scans.iter_mut().enumerate() {
                sc.best_gain = best_gain[s];
                sc.best = best[s];
            }
            for &row in &sorted.order[f] {
                let row = row as usize;
                let n = node_of[row];
                if n == UNASSIGNED || slot[n as usize] == usize::MAX {
                    continue;
                }
                let node = &nodes[n as usize];
                let sc = &mut scans[slot[n as usize]];
                let v = x.get(row, f);
                if sc.seen && v > sc.last {
                    let (gr, hr) = (node.g - sc.gl, node.h - sc.hl);
                    if sc.hl >= mcw && hr >= mcw {
                        let gain = split_gain(sc.gl, sc.hl, gr, hr, lambda, gamma);
                        if gain > sc.best_gain {
                            sc.best_gain = gain;
                            sc.best = Some((f, midpoint(sc.last, v), sc.gl, sc.hl));
                        }
                    }
                }
                sc.gl = sc.gl + g[row];
                sc.hl = sc.hl + h[row];
                sc.last = v;
                sc.seen = true;
            }
            for (s, sc) in scans.iter().enumerate() {
                best_gain[s] = sc.best_gain;
                best[s] = sc.best;
            }
        }

        let mut next_open = Vec::new();
        for (s, &n) in open.iter().enumerate() {
            let Some((f, thr, gl, hl)) = best[s] else { continue };
            let depth = nodes[n].depth + 1;
            let (gn, hn) = (nodes[n].g, nodes[n].h);
            let left = nodes.len();
            nodes.push(BuildNode {
                g: gl,
                h: hl,
                depth,
                split: None,
            });
            nodes.push(BuildNode {
                g: gn - gl,
                h: hn - hl,
                depth,
                split: None,
            });
            nodes[n].split = Some((f, thr, left, left + 1));
            next_open.push(left);
            next_open.push(left + 1);
        }
        for (row, n) in node_of.iter_mut().enumerate() {
            if *n == UNASSIGNED {
                continue;
            }
            if let Some((f, thr, l, r)) = nodes[*n as usize].split {
                if slot[*n as usize] != usize::MAX {
                    *n = if x.get(row, f) < thr { l as u32 } else { r as u32 };
                }
            }
        }
        open = next_open;
    }

    let eta = T::lit(params.learning_rate);
    fn assemble<T: Scalar>(nodes: &[BuildNode<T>], i: usize, lambda: T, eta: T) -> TreeNode<T> {
        match nodes[i].split {
            Some((feature, threshold, l, r)) => TreeNode::Split {
                feature,
                threshold,
                left: Box::new(assemble(nodes, l, lambda, eta)),
                right: Box::new(assemble(nodes, r, lambda, eta)),
            },
            None => TreeNode::Leaf {
                weight: -nodes[i].g / (nodes[i].h + lambda) * eta,
            },
        }
    }
    assemble(&nodes, 0, lambda, eta)
}
