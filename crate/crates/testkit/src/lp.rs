//! Dense two-phase simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Deliberately naive: full tableau, Bland's rule throughout, no sparsity.

const EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // constraint rows, last entry is the rhs
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` over the columns in `allowed`; `false` when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> bool {
        let width = self.rows[0].len() - 1;
        loop {
            // reduced costs d_j = c_j - c_B B^-1 A_j
            let entering = (0..width).filter(|&j| allowed(j)).find(|&j| {
                let z: f64 = self
                    .rows
                    .iter()
                    .zip(&self.basis)
                    .map(|(row, &b)| cost[b] * row[j])
                    .sum();
                cost[j] - z < -EPS
            });
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > EPS {
                    let ratio = row[width] / row[c];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    // phase 1: artificial columns n..n+m
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = a[i].iter().map(|v| v * sign).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        row.push(b[i] * sign);
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
    };
    let mut phase1 = vec![0.0; n + m];
    for v in &mut phase1[n..] {
        *v = 1.0;
    }
    t.optimize(&phase1, &|_| true);
    let infeas: f64 = t
        .basis
        .iter()
        .zip(&t.rows)
        .filter(|(&b, _)| b >= n)
        .map(|(_, r)| r[n + m])
        .sum();
    if infeas > 1e-9 {
        return LpOutcome::Infeasible;
    }
    // drive zero-level artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    if !t.optimize(&phase2, &|j| j < n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        if bcol < n {
            x[bcol] = row[n + m];
        }
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { value, x }
}

/// Optimal transport cost between `supply` and `demand` under a row-major cost matrix.
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * n);
    let mut a = Vec::with_capacity(m + n);
    for i in 0..m {
        a.push((0..m * n).map(|v| if v / n == i { 1.0 } else { 0.0 }).collect());
    }
    for j in 0..n {
        a.push((0..m * n).map(|v| if v % n == j { 1.0 } else { 0.0 }).collect());
    }
    let b: Vec<f64> = supply.iter().chain(demand).copied().collect();
    match solve(&a, &b, cost) {
        LpOutcome::Optimal { value, .. } => value,
        other => panic!("transport LP not optimal: {other:?}"),
    }
}
