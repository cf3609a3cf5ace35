//! Rectangular minimum-cost assignment with forbidden pairs.
//!
//! Shortest-augmenting-path Hungarian method with row/column potentials,
//! `O(n² m)` for an `n × m` problem with `n ≤ m`. Forbidden pairs (non-finite
//! costs) never appear in the output. Among all one-to-one matchings over the
//! allowed pairs the solver returns one of maximum cardinality, and among
//! those one of minimum total cost.

/// Dense row-major cost matrix. Non-finite entries mark forbidden pairs.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![f64::INFINITY; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// Result of [`solve`]: `row_to_col[r]` is the column assigned to row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<Option<usize>>,
    pub col_to_row: Vec<Option<usize>>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    pub fn len(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn solve(costs: &CostMatrix) -> Assignment {
    let (rows, cols) = (costs.rows, costs.cols);
    let mut out = Assignment { row_to_col: vec![None; rows], col_to_row: vec![None; cols], total_cost: 0.0 };
    if rows == 0 || cols == 0 {
        return out;
    }

    let max_finite = costs.data.iter().copied().filter(|c| c.is_finite()).fold(0.0f64, |a, c| a.max(c.abs()));
    if max_finite == 0.0 && costs.data.iter().all(|c| !c.is_finite()) {
        return out;
    }
    // A forbidden pair costs more than any complete set of allowed pairs, so
    // cardinality is maximized before cost.
    let penalty = (max_finite + 1.0) * (rows.min(cols) as f64 + 1.0);
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        let v = if transpose { costs.get(j, i) } else { costs.get(i, j) };
        if v.is_finite() {
            v
        } else {
            penalty
        }
    };

    // 1-based arrays, column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    for j in 1..=m {
        if p[j] == 0 {
            continue;
        }
        let (r, c) = if transpose { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) };
        let c_rc = costs.get(r, c);
        if c_rc.is_finite() {
            out.row_to_col[r] = Some(c);
            out.col_to_row[c] = Some(r);
            out.total_cost += c_rc;
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod brute {
    use super::CostMatrix;

    /// Exhaustive (max cardinality, min cost) optimum; returns `(count, cost)`.
    pub fn optimum(costs: &CostMatrix) -> (usize, f64) {
        fn rec(costs: &CostMatrix, r: usize, used: &mut Vec<bool>, count: usize, cost: f64, best: &mut (usize, f64)) {
            if r == costs.rows() {
                if count > best.0 || (count == best.0 && cost < best.1) {
                    *best = (count, cost);
                }
                return;
            }
            rec(costs, r + 1, used, count, cost, best);
            for c in 0..costs.cols() {
                let v = costs.get(r, c);
                if !used[c] && v.is_finite() {
                    used[c] = true;
                    rec(costs, r + 1, used, count + 1, cost + v, best);
                    used[c] = false;
                }
            }
        }
        let mut best = (0, 0.0);
        rec(costs, 0, &mut vec![false; costs.cols()], 0, 0.0, &mut best);
        best
    }
}
