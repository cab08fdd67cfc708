//! Exact balanced transportation solver (transportation network simplex).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Balanced transportation problem with a row-major `supply.len() x demand.len()` cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem<T> {
    pub supply: Vec<T>,
    pub demand: Vec<T>,
    pub cost: Vec<T>,
}

/// Basic cells of an optimal plan.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    pub cost: T,
    /// `(row, column, flow)` for every basic cell, including degenerate zero flows.
    pub flows: Vec<(usize, usize, T)>,
    pub pivots: usize,
}

impl<T: Scalar> TransportPlan<T> {
    pub fn total_mass(&self) -> T {
        self.flows.iter().map(|f| f.2).sum()
    }
}

impl<T: Scalar> TransportProblem<T> {
    pub fn rows(&self) -> usize {
        self.supply.len()
    }

    pub fn cols(&self) -> usize {
        self.demand.len()
    }

    pub fn cost_at(&self, i: usize, j: usize) -> T {
        self.cost[i * self.demand.len() + j]
    }

    /// Mass tolerance: 1e-9, widened to the type's precision for narrow floats.
    pub fn mass_tolerance(&self) -> T {
        let n = T::from_usize_lossy(self.rows() + self.cols() + 1);
        T::lit(1e-9).max(T::epsilon() * n * T::lit(4.0))
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows(), self.cols());
        if m == 0 || n == 0 {
            return Err(Error::Empty("transport marginals"));
        }
        if self.cost.len() != m * n {
            return Err(Error::Dimension {
                context: "transport cost matrix",
                expected: m * n,
                found: self.cost.len(),
            });
        }
        let bad = |x: &T| !x.is_finite() || *x < T::zero();
        if self.supply.iter().any(bad) || self.demand.iter().any(bad) || self.cost.iter().any(bad) {
            return Err(Error::InvalidArgument(
                "transport marginals and costs must be finite and non-negative".into(),
            ));
        }
        let tol = self.mass_tolerance();
        let ss: T = self.supply.iter().copied().sum();
        let ds: T = self.demand.iter().copied().sum();
        if (ss - T::one()).abs() > tol || (ds - T::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "transport marginals must each sum to 1 (got {ss} and {ds})"
            )));
        }
        Ok(())
    }
}

/// Lower bound from letting each side move its mass to the nearest opposite point.
pub fn relaxed_cost<T: Scalar>(p: &TransportProblem<T>) -> T {
    let (m, n) = (p.rows(), p.cols());
    let mut row_bound = T::zero();
    for i in 0..m {
        let best = (0..n).map(|j| p.cost_at(i, j)).fold(T::infinity(), T::min);
        row_bound = row_bound + p.supply[i] * best;
    }
    let mut col_bound = T::zero();
    for j in 0..n {
        let best = (0..m).map(|i| p.cost_at(i, j)).fold(T::infinity(), T::min);
        col_bound = col_bound + p.demand[j] * best;
    }
    row_bound.max(col_bound)
}

const NONE: usize = usize::MAX;

/// Solves the problem exactly with the transportation simplex.
///
/// The basis is a spanning tree over the `m + n` row/column nodes, started from
/// the north-west corner rule. Entering cells use the most negative reduced cost;
/// after a run of degenerate pivots the rule switches to first-negative (Bland)
/// until a pivot moves mass again.
pub fn solve_transport<T: Scalar>(p: &TransportProblem<T>) -> Result<TransportPlan<T>> {
    p.validate()?;
    let (m, n) = (p.rows(), p.cols());
    let nodes = m + n;

    // basis cells: (row, col) and flows, plus reverse lookup by cell
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(nodes - 1);
    let mut flow: Vec<T> = Vec::with_capacity(nodes - 1);
    let mut slot = vec![NONE; m * n];

    let mut s = p.supply.clone();
    let mut d = p.demand.clone();
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]);
        slot[i * n + j] = cells.len();
        cells.push((i, j));
        flow.push(x);
        s[i] = s[i] - x;
        d[j] = d[j] - x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(cells.len(), nodes - 1);

    let max_cost = p.cost.iter().copied().fold(T::zero(), T::max);
    let tol = T::epsilon() * T::lit(64.0) * max_cost.max(T::one());
    let max_pivots = 50 * m * n + 1000;

    let mut potential = vec![T::zero(); nodes];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut parent_edge = vec![NONE; nodes];
    let mut queue = VecDeque::with_capacity(nodes);
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;

    loop {
        for a in &mut adj {
            a.clear();
        }
        for (k, &(r, c)) in cells.iter().enumerate() {
            adj[r].push(k);
            adj[m + c].push(k);
        }

        // potentials: u_r + v_c = cost(r, c) on basic cells, u_0 = 0
        let mut seen = vec![false; nodes];
        seen[0] = true;
        potential[0] = T::zero();
        queue.clear();
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &k in &adj[node] {
                let (r, c) = cells[k];
                let other = if node == r { m + c } else { r };
                if !seen[other] {
                    seen[other] = true;
                    potential[other] = p.cost_at(r, c) - potential[node];
                    queue.push_back(other);
                }
            }
        }

        let bland = degenerate_run > nodes;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'scan: for r in 0..m {
            for c in 0..n {
                if slot[r * n + c] != NONE {
                    continue;
                }
                let reduced = p.cost_at(r, c) - potential[r] - potential[m + c];
                if reduced < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = reduced;
                }
            }
        }
        let Some((er, ec)) = entering else { break };
        if pivots >= max_pivots {
            log::warn!("transport simplex stopped after {pivots} pivots ({m}x{n})");
            break;
        }
        pivots += 1;

        // tree path from the entering row to the entering column
        parent_edge.iter_mut().for_each(|e| *e = NONE);
        let mut visited = vec![false; nodes];
        visited[er] = true;
        queue.clear();
        queue.push_back(er);
        let target = m + ec;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &k in &adj[node] {
                let (r, c) = cells[k];
                let other = if node == r { m + c } else { r };
                if !visited[other] {
                    visited[other] = true;
                    parent_edge[other] = k;
                    queue.push_back(other);
                }
            }
        }
        // walk back from the column: edges alternate -, +, -, ...
        let mut path = Vec::new();
        let mut node = target;
        while node != er {
            let k = parent_edge[node];
            path.push(k);
            let (r, c) = cells[k];
            node = if node == r { m + c } else { r };
        }

        let mut theta = T::infinity();
        let mut leaving = NONE;
        for &k in path.iter().step_by(2) {
            if flow[k] < theta {
                theta = flow[k];
                leaving = k;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            flow[k] = if pos % 2 == 0 {
                (flow[k] - theta).max(T::zero())
            } else {
                flow[k] + theta
            };
        }
        if theta > T::zero() {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }

        let (lr, lc) = cells[leaving];
        slot[lr * n + lc] = NONE;
        cells[leaving] = (er, ec);
        flow[leaving] = theta;
        slot[er * n + ec] = leaving;
    }

    let cost = cells.iter().zip(&flow).map(|(&(r, c), &x)| x * p.cost_at(r, c)).sum();
    let flows = cells.iter().zip(&flow).map(|(&(r, c), &x)| (r, c, x)).collect();
    Ok(TransportPlan { cost, flows, pivots })
}
