//! Exact full matchings on complete weighted bipartite graphs.
//!
//! One Kuhn-Munkres kernel with row/column potentials solves the rectangular
//! minimum-cost assignment in `O(n^2 m)`; maximization runs the same kernel on
//! negated weights. Among equally good optima the lexicographically smallest
//! pair list is returned. It is found by walking candidate pairs in order and
//! forcing each one into the current optimum when an alternating path over
//! zero-reduced-cost edges allows it.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchingError {
    #[error("both sides need at least one node (got {left} x {right})")]
    EmptySide { left: usize, right: usize },
    #[error("expected {expected} weights, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("weight ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
}

/// Complete bipartite graph given by a dense `left x right` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBipartiteGraph {
    left: usize,
    right: usize,
    weights: Vec<f64>,
}

impl WeightedBipartiteGraph {
    /// `weights` is row-major: `weights[l * right + r]`.
    pub fn new(left: usize, right: usize, weights: Vec<f64>) -> Result<Self, MatchingError> {
        if left == 0 || right == 0 {
            return Err(MatchingError::EmptySide { left, right });
        }
        if weights.len() != left * right {
            return Err(MatchingError::Shape {
                expected: left * right,
                got: weights.len(),
            });
        }
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            return Err(MatchingError::NonFinite(k / right, k % right));
        }
        Ok(Self {
            left,
            right,
            weights,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatchingError> {
        let right = rows.first().map_or(0, |r| r.as_ref().len());
        let mut weights = Vec::with_capacity(rows.len() * right);
        for r in rows {
            let r = r.as_ref();
            if r.len() != right {
                return Err(MatchingError::Shape {
                    expected: right,
                    got: r.len(),
                });
            }
            weights.extend_from_slice(r);
        }
        Self::new(rows.len(), right, weights)
    }

    pub fn left_size(&self) -> usize {
        self.left
    }

    pub fn right_size(&self) -> usize {
        self.right
    }

    pub fn weight(&self, l: usize, r: usize) -> f64 {
        self.weights[l * self.right + r]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            left: self.left,
            right: self.right,
            weights: self.weights.iter().map(|w| f(*w)).collect(),
        }
    }
}

/// A set of `(left, right)` pairs sorted by left index.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Mean weight per pair, `None` for an empty matching.
    pub fn average(&self) -> Option<f64> {
        (!self.pairs.is_empty()).then(|| self.total_weight / self.pairs.len() as f64)
    }
}

/// Full matching (cardinality `min(L, R)`) of maximum total weight.
pub fn max_weight_full_matching(g: &WeightedBipartiteGraph) -> Matching {
    let pairs = solve_min_cost(&g.map(|w| -w));
    finish(g, pairs)
}

/// Full matching (cardinality `min(L, R)`) of minimum total weight.
pub fn min_weight_full_matching(g: &WeightedBipartiteGraph) -> Matching {
    let pairs = solve_min_cost(g);
    finish(g, pairs)
}

fn finish(g: &WeightedBipartiteGraph, pairs: Vec<(usize, usize)>) -> Matching {
    let total_weight = pairs.iter().map(|&(l, r)| g.weight(l, r)).sum();
    Matching {
        pairs,
        total_weight,
    }
}

/// Oriented problem: `rows <= cols`, `cost(row, col)`.
struct Oriented<'a> {
    g: &'a WeightedBipartiteGraph,
    transposed: bool,
    rows: usize,
    cols: usize,
}

impl Oriented<'_> {
    fn cost(&self, row: usize, col: usize) -> f64 {
        if self.transposed {
            self.g.weight(col, row)
        } else {
            self.g.weight(row, col)
        }
    }
}

/// Potentials and row assignment of an optimal rectangular assignment.
struct Solution {
    u: Vec<f64>,
    v: Vec<f64>,
    col_of_row: Vec<usize>,
}

/// Shortest augmenting path Hungarian method (1-based internally).
fn hungarian(p: &Oriented<'_>) -> Solution {
    let (n, m) = (p.rows, p.cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![f64::INFINITY; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = p.cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            col_of_row[row_of[j] - 1] = j - 1;
        }
    }
    Solution {
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
        col_of_row,
    }
}

/// Perfect matching on the square problem padded with zero-cost dummy rows,
/// restricted to edges with zero reduced cost. Every perfect matching of this
/// subgraph is an optimal assignment.
struct TightGraph {
    real_rows: usize,
    adj: Vec<Vec<usize>>,
    col_of_row: Vec<usize>,
    row_of_col: Vec<usize>,
    locked_row: Vec<bool>,
    locked_col: Vec<bool>,
}

impl TightGraph {
    fn new(p: &Oriented<'_>, sol: &Solution) -> Self {
        let (n, m) = (p.rows, p.cols);
        let scale = p.g.weights.iter().fold(1.0f64, |a, w| a.max(w.abs()));
        let eps = 1e-9 * scale;
        let mut adj = Vec::with_capacity(m);
        for r in 0..n {
            adj.push(
                (0..m)
                    .filter(|&c| p.cost(r, c) - sol.u[r] - sol.v[c] <= eps)
                    .collect::<Vec<_>>(),
            );
        }
        // dummy rows: u = 0, cost 0, tight wherever v == 0
        let free_cols: Vec<usize> = (0..m).filter(|&c| sol.v[c] >= -eps).collect();
        adj.extend(std::iter::repeat(free_cols).take(m - n));

        let mut col_of_row = sol.col_of_row.clone();
        let mut row_of_col = vec![usize::MAX; m];
        for (r, &c) in col_of_row.iter().enumerate() {
            row_of_col[c] = r;
        }
        let mut dummy = n;
        for c in 0..m {
            if row_of_col[c] == usize::MAX {
                row_of_col[c] = dummy;
                col_of_row.push(c);
                dummy += 1;
            }
        }
        debug_assert!(col_of_row.iter().enumerate().all(|(r, c)| adj[r].binary_search(c).is_ok()));
        Self {
            real_rows: n,
            adj,
            col_of_row,
            row_of_col,
            locked_row: vec![false; m],
            locked_col: vec![false; m],
        }
    }

    fn is_tight(&self, row: usize, col: usize) -> bool {
        self.adj[row].binary_search(&col).is_ok()
    }

    /// Tries to move the current perfect matching onto one containing
    /// `(row, col)` without disturbing locked pairs, then locks it.
    fn force(&mut self, row: usize, col: usize) -> bool {
        if self.locked_row[row] || self.locked_col[col] || !self.is_tight(row, col) {
            return false;
        }
        if self.col_of_row[row] != col && !self.reroute(row, col) {
            return false;
        }
        self.locked_row[row] = true;
        self.locked_col[col] = true;
        true
    }

    fn reroute(&mut self, row: usize, col: usize) -> bool {
        let start = self.row_of_col[col];
        let target = self.col_of_row[row];
        let m = self.col_of_row.len();
        let mut parent = vec![usize::MAX; m];
        let mut seen_row = vec![false; m];
        let mut queue = VecDeque::from([start]);
        seen_row[start] = true;
        seen_row[row] = true;
        let mut found = false;
        'bfs: while let Some(r) = queue.pop_front() {
            for &c in &self.adj[r] {
                if c == col || self.locked_col[c] || parent[c] != usize::MAX {
                    continue;
                }
                parent[c] = r;
                if c == target {
                    found = true;
                    break 'bfs;
                }
                let next = self.row_of_col[c];
                if !self.locked_row[next] && !seen_row[next] {
                    seen_row[next] = true;
                    queue.push_back(next);
                }
            }
        }
        if !found {
            return false;
        }
        let mut c = target;
        loop {
            let r = parent[c];
            let prev = self.col_of_row[r];
            self.col_of_row[r] = c;
            self.row_of_col[c] = r;
            if r == start {
                break;
            }
            c = prev;
        }
        self.col_of_row[row] = col;
        self.row_of_col[col] = row;
        true
    }
}

fn solve_min_cost(g: &WeightedBipartiteGraph) -> Vec<(usize, usize)> {
    let transposed = g.left > g.right;
    let (rows, cols) = if transposed {
        (g.right, g.left)
    } else {
        (g.left, g.right)
    };
    let p = Oriented {
        g,
        transposed,
        rows,
        cols,
    };
    let sol = hungarian(&p);
    let mut tight = TightGraph::new(&p, &sol);

    let mut pairs = Vec::with_capacity(rows);
    for l in 0..g.left {
        for r in 0..g.right {
            let (row, col) = if transposed { (r, l) } else { (l, r) };
            if tight.force(row, col) {
                pairs.push((l, r));
                break;
            }
        }
        if pairs.len() == rows {
            break;
        }
    }
    debug_assert_eq!(pairs.len(), rows);
    debug_assert!(pairs.iter().all(|&(l, r)| {
        let row = if transposed { r } else { l };
        row < tight.real_rows
    }));
    pairs
}
