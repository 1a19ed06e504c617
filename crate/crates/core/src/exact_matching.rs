//! Thresholded one-to-one matching between two vector sets.
//!
//! Unionability is the largest total similarity among *maximum-cardinality*
//! matchings that only use pairs with similarity `≥ τ`. The solver reduces this
//! lexicographic objective to a single assignment problem: every edge weight is
//! shifted by `W = 1 + Σ w`. A matching with `t` edges then scores
//! `t·W + Σ w_e`, and since `Σ w_e < W` for any matching, one extra edge always
//! outweighs any weight difference between matchings of equal size. The
//! maximum-weight matching under shifted weights is therefore a maximum
//! cardinality matching, and among those it maximizes the unshifted weight.

use crate::error::{Error, Result};
use crate::repository::{dot, Vectors};

/// Largest smaller side accepted by the enumeration oracle.
pub const BRUTE_FORCE_MAX_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub left: u32,
    pub right: u32,
    pub weight: f64,
}

/// Bipartite graph holding only pairs whose similarity reaches `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdBipartiteGraph {
    pub left_size: usize,
    pub right_size: usize,
    pub edges: Vec<Edge>,
}

impl ThresholdBipartiteGraph {
    pub fn new(left_size: usize, right_size: usize, edges: Vec<Edge>) -> Self {
        Self {
            left_size,
            right_size,
            edges,
        }
    }

    pub fn transposed(&self) -> Self {
        Self {
            left_size: self.right_size,
            right_size: self.left_size,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    left: e.right,
                    right: e.left,
                    weight: e.weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    pub cardinality: usize,
    pub weight: f64,
    /// Matched `(left, right)` pairs.
    pub pairs: Vec<(u32, u32)>,
}

impl MatchingResult {
    pub fn empty() -> Self {
        Self {
            cardinality: 0,
            weight: 0.0,
            pairs: Vec::new(),
        }
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "tau must be finite and > 0, got {tau}"
        )))
    }
}

/// All pairs with `⟨q, v⟩ ≥ τ`, weighted by the exact inner product.
pub fn build_threshold_graph(q: &Vectors, v: &Vectors, tau: f64) -> Result<ThresholdBipartiteGraph> {
    check_tau(tau)?;
    if q.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: v.dim(),
        });
    }
    let mut edges = Vec::new();
    for (i, a) in q.rows().enumerate() {
        for (j, b) in v.rows().enumerate() {
            let w = dot(a, b);
            if w >= tau {
                edges.push(Edge {
                    left: i as u32,
                    right: j as u32,
                    weight: w,
                });
            }
        }
    }
    Ok(ThresholdBipartiteGraph::new(q.len(), v.len(), edges))
}

/// Dense min-cost assignment of every row to a distinct column (`rows ≤ cols`),
/// shortest augmenting paths with row/column potentials. Returns `col_of_row`.
fn assignment_min_cost(rows: usize, cols: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert!(rows <= cols);
    const NONE: usize = usize::MAX;
    // Index 0 of `u`, `v`, `row_of` and `way` is a virtual sentinel column/row.
    let mut u = vec![0f64; rows + 1];
    let mut v = vec![0f64; cols + 1];
    let mut row_of = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0f64; cols + 1];
    let mut used = vec![false; cols + 1];
    for i in 1..=rows {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            let crow = &cost[(i0 - 1) * cols..i0 * cols];
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = crow[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(j1 != NONE);
            for j in 0..=cols {
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
    let mut col_of_row = vec![NONE; rows];
    for j in 1..=cols {
        if row_of[j] != 0 {
            col_of_row[row_of[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Maximum-cardinality matching of maximum weight.
pub fn max_cardinality_max_weight(g: &ThresholdBipartiteGraph) -> MatchingResult {
    if g.edges.is_empty() {
        return MatchingResult::empty();
    }
    let swap = g.left_size > g.right_size;
    let (rows, cols) = if swap {
        (g.right_size, g.left_size)
    } else {
        (g.left_size, g.right_size)
    };
    let shift = 1.0 + g.edges.iter().map(|e| e.weight).sum::<f64>();
    let mut cost = vec![0f64; rows * cols];
    let mut weight = vec![f64::NAN; rows * cols];
    for e in &g.edges {
        let (r, c) = if swap {
            (e.right as usize, e.left as usize)
        } else {
            (e.left as usize, e.right as usize)
        };
        cost[r * cols + c] = -(shift + e.weight);
        weight[r * cols + c] = e.weight;
    }
    let col_of_row = assignment_min_cost(rows, cols, &cost);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (r, &c) in col_of_row.iter().enumerate() {
        let w = weight[r * cols + c];
        if w.is_nan() {
            continue;
        }
        total += w;
        let (l, rt) = if swap { (c, r) } else { (r, c) };
        pairs.push((l as u32, rt as u32));
    }
    pairs.sort_unstable();
    MatchingResult {
        cardinality: pairs.len(),
        weight: total,
        pairs,
    }
}

/// Table unionability `U(Q, V, τ)`.
pub fn unionability(q: &Vectors, v: &Vectors, tau: f64) -> Result<MatchingResult> {
    let g = build_threshold_graph(q, v, tau)?;
    Ok(max_cardinality_max_weight(&g))
}

/// Exhaustive search over all injective partial mappings of the smaller side.
pub fn brute_force_matching(g: &ThresholdBipartiteGraph) -> Result<MatchingResult> {
    let small = g.left_size.min(g.right_size);
    if small > BRUTE_FORCE_MAX_SIDE {
        return Err(Error::InvalidParameter(format!(
            "brute force needs min side <= {BRUTE_FORCE_MAX_SIDE}, got {small}"
        )));
    }
    let swap = g.left_size > g.right_size;
    let g = if swap { g.transposed() } else { g.clone() };
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.left_size];
    for e in &g.edges {
        adj[e.left as usize].push((e.right as usize, e.weight));
    }

    struct Search<'a> {
        adj: &'a [Vec<(usize, f64)>],
        used: Vec<bool>,
        current: Vec<(u32, u32)>,
        best: (usize, f64, Vec<(u32, u32)>),
    }
    impl Search<'_> {
        fn go(&mut self, row: usize, weight: f64) {
            if row == self.adj.len() {
                let card = self.current.len();
                if card > self.best.0 || (card == self.best.0 && weight > self.best.1) {
                    self.best = (card, weight, self.current.clone());
                }
                return;
            }
            self.go(row + 1, weight);
            for &(c, w) in &self.adj[row] {
                if !self.used[c] {
                    self.used[c] = true;
                    self.current.push((row as u32, c as u32));
                    self.go(row + 1, weight + w);
                    self.current.pop();
                    self.used[c] = false;
                }
            }
        }
    }
    let mut s = Search {
        adj: &adj,
        used: vec![false; g.right_size],
        current: Vec::new(),
        best: (0, 0.0, Vec::new()),
    };
    s.go(0, 0.0);
    let (cardinality, weight, mut pairs) = s.best;
    if swap {
        pairs = pairs.into_iter().map(|(a, b)| (b, a)).collect();
    }
    pairs.sort_unstable();
    Ok(MatchingResult {
        cardinality,
        weight,
        pairs,
    })
}

pub fn brute_force_unionability(q: &Vectors, v: &Vectors, tau: f64) -> Result<MatchingResult> {
    let g = build_threshold_graph(q, v, tau)?;
    brute_force_matching(&g)
}

/// Maximum matching size (Hopcroft–Karp), ignoring weights.
pub fn maximum_cardinality(g: &ThresholdBipartiteGraph) -> usize {
    const FREE: usize = usize::MAX;
    let n = g.left_size;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.left as usize].push(e.right as usize);
    }
    let mut match_l = vec![FREE; n];
    let mut match_r = vec![FREE; g.right_size];
    let mut dist = vec![0usize; n];
    let mut size = 0;

    fn dfs(u: usize, adj: &[Vec<usize>], match_l: &mut [usize], match_r: &mut [usize], dist: &mut [usize]) -> bool {
        for i in 0..adj[u].len() {
            let v = adj[u][i];
            let w = match_r[v];
            if w == FREE || (dist[w] == dist[u] + 1 && dfs(w, adj, match_l, match_r, dist)) {
                match_l[u] = v;
                match_r[v] = u;
                return true;
            }
        }
        dist[u] = usize::MAX;
        false
    }

    loop {
        let mut queue = std::collections::VecDeque::new();
        for u in 0..n {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        for u in 0..n {
            if match_l[u] == FREE && dfs(u, &adj, &mut match_l, &mut match_r, &mut dist) {
                size += 1;
            }
        }
    }
    size
}

fn edges_descending(g: &ThresholdBipartiteGraph) -> Vec<Edge> {
    let mut edges = g.edges.clone();
    edges.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.left.cmp(&b.left))
            .then(a.right.cmp(&b.right))
    });
    edges
}

/// Greedy maximal matching in descending edge weight. Feasible, so its weight
/// never exceeds the optimum.
pub fn greedy_matching(g: &ThresholdBipartiteGraph) -> MatchingResult {
    let mut used_l = vec![false; g.left_size];
    let mut used_r = vec![false; g.right_size];
    let mut pairs = Vec::new();
    let mut weight = 0.0;
    for e in edges_descending(g) {
        let (l, r) = (e.left as usize, e.right as usize);
        if !used_l[l] && !used_r[r] {
            used_l[l] = true;
            used_r[r] = true;
            pairs.push((e.left, e.right));
            weight += e.weight;
        }
    }
    pairs.sort_unstable();
    MatchingResult {
        cardinality: pairs.len(),
        weight,
        pairs,
    }
}

/// Grows a feasible capacitated assignment to maximum cardinality with
/// augmenting paths. `adj[l]` lists `(right, weight)` pairs; `assign[l]` is the
/// right node currently serving `l`. Existing pairs are only re-routed, never
/// dropped, so the result is a maximum-cardinality assignment.
pub(crate) fn augment_to_maximum(adj: &[Vec<(u32, f64)>], caps: &[usize], assign: &mut [Option<u32>]) {
    let mut served: Vec<Vec<usize>> = vec![Vec::new(); caps.len()];
    for (l, a) in assign.iter().enumerate() {
        if let Some(r) = a {
            served[*r as usize].push(l);
        }
    }

    fn try_route(
        l: usize,
        adj: &[Vec<(u32, f64)>],
        caps: &[usize],
        assign: &mut [Option<u32>],
        served: &mut [Vec<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &(r, _) in &adj[l] {
            let r = r as usize;
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if served[r].len() < caps[r] {
                served[r].push(l);
                assign[l] = Some(r as u32);
                return true;
            }
            for k in 0..served[r].len() {
                let other = served[r][k];
                if try_route(other, adj, caps, assign, served, seen) {
                    // `other` moved elsewhere; take its slot at r.
                    served[r][k] = l;
                    assign[l] = Some(r as u32);
                    return true;
                }
            }
        }
        false
    }

    let mut seen = vec![false; caps.len()];
    for l in 0..adj.len() {
        if assign[l].is_none() && !adj[l].is_empty() {
            seen.iter_mut().for_each(|s| *s = false);
            try_route(l, adj, caps, assign, &mut served, &mut seen);
        }
    }
}

/// Greedy matching completed to maximum cardinality. Its weight is a valid
/// lower bound on unionability: it is a maximum-cardinality matching, and
/// unionability maximizes weight over exactly those.
pub fn lower_bound_matching(g: &ThresholdBipartiteGraph) -> MatchingResult {
    let greedy = greedy_matching(g);
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); g.left_size];
    for e in &g.edges {
        adj[e.left as usize].push((e.right, e.weight));
    }
    let mut assign = vec![None; g.left_size];
    for &(l, r) in &greedy.pairs {
        assign[l as usize] = Some(r);
    }
    augment_to_maximum(&adj, &vec![1; g.right_size], &mut assign);
    let mut pairs = Vec::new();
    let mut weight = 0.0;
    for (l, a) in assign.iter().enumerate() {
        if let Some(r) = *a {
            let w = adj[l].iter().find(|e| e.0 == r).expect("assigned along an edge").1;
            weight += w;
            pairs.push((l as u32, r));
        }
    }
    MatchingResult {
        cardinality: pairs.len(),
        weight,
        pairs,
    }
}

/// Sum of the `min(|L|, |R|)` heaviest edges, ignoring the one-to-one
/// constraint. Dominates the weight of every matching.
pub fn greedy_edge_upper_bound(g: &ThresholdBipartiteGraph) -> f64 {
    let cap = g.left_size.min(g.right_size);
    let mut w: Vec<f64> = g.edges.iter().map(|e| e.weight).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w.into_iter().take(cap).sum()
}
