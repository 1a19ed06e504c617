//! Nearest-centroid retrieval by inner product: an exact scan and a layered
//! navigable small-world graph over the codebook.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{CentroidId, Codebook};
use crate::repository::{dot, Vectors};

pub const DEFAULT_M: usize = 16;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
/// Codebooks up to this size default to the exact scan.
pub const EXACT_SCAN_LIMIT: usize = 4096;

pub fn default_ef_search(phi_c: usize) -> usize {
    64.max(2 * phi_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnMode {
    Exact,
    Graph,
}

impl AnnMode {
    pub fn default_for(n_c: usize) -> Self {
        if n_c <= EXACT_SCAN_LIMIT {
            AnnMode::Exact
        } else {
            AnnMode::Graph
        }
    }
}

/// `⟨v_q, c⟩` for every query vector and every global centroid.
#[derive(Debug, Clone)]
pub struct CentroidSims {
    n_c: usize,
    sims: Vec<f64>,
}

impl CentroidSims {
    pub fn compute(q: &Vectors, cb: &Codebook) -> Self {
        let n_c = cb.len();
        let mut sims = Vec::with_capacity(q.len() * n_c);
        for v in q.rows() {
            sims.extend(cb.centroids.rows().map(|c| dot(v, c)));
        }
        Self { n_c, sims }
    }

    #[inline]
    pub fn row(&self, q: usize) -> &[f64] {
        &self.sims[q * self.n_c..(q + 1) * self.n_c]
    }

    #[inline]
    pub fn get(&self, q: usize, c: CentroidId) -> f64 {
        self.sims[q * self.n_c + c as usize]
    }
}

/// Exact top-`k` centroids from a precomputed similarity row, descending,
/// ties to the lower id.
pub fn top_centroids_exact(sims: &[f64], k: usize) -> Vec<(CentroidId, f64)> {
    let mut all: Vec<(CentroidId, f64)> = sims.iter().enumerate().map(|(c, &s)| (c as CentroidId, s)).collect();
    let by_rank = |a: &(CentroidId, f64), b: &(CentroidId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let k = k.min(all.len());
    if k < all.len() && k > 0 {
        all.select_nth_unstable_by(k - 1, by_rank);
        all.truncate(k);
    }
    all.sort_by(by_rank);
    all.truncate(k);
    all
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    sim: f64,
    id: u32,
}

impl Eq for Scored {}

impl Ord for Scored {
    /// Greater = more similar; equal similarity prefers the lower id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim.total_cmp(&other.sim).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Layered proximity graph over centroids; `G` in the refinement stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidGraphIndex {
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
    pub entry_point: u32,
    /// `links[node][level]`, levels `0..=level(node)`.
    pub links: Vec<Vec<Vec<u32>>>,
}

impl CentroidGraphIndex {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn max_level(&self) -> usize {
        self.links[self.entry_point as usize].len() - 1
    }

    fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    /// Nodes reachable from the entry point along layer-0 links.
    pub fn reachable_from_entry(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        self.mark_reachable(self.entry_point, &mut seen);
        seen
    }

    fn mark_reachable(&self, from: u32, seen: &mut [bool]) {
        let mut stack = vec![from];
        seen[from as usize] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.links[u as usize][0] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn search_layer(
        &self,
        data: &Vectors,
        q: &[f32],
        entry: &[Scored],
        ef: usize,
        level: usize,
        visited: &mut [u32],
        stamp: u32,
    ) -> Vec<Scored> {
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<std::cmp::Reverse<Scored>> = BinaryHeap::new();
        for &e in entry {
            if visited[e.id as usize] != stamp {
                visited[e.id as usize] = stamp;
                candidates.push(e);
                results.push(std::cmp::Reverse(e));
            }
        }
        while results.len() > ef {
            results.pop();
        }
        while let Some(c) = candidates.pop() {
            let worst = results.peek().map(|r| r.0).expect("non-empty results");
            if results.len() >= ef && c < worst {
                break;
            }
            for &n in &self.links[c.id as usize][level] {
                if visited[n as usize] == stamp {
                    continue;
                }
                visited[n as usize] = stamp;
                let s = Scored {
                    sim: dot(q, data.row(n as usize)),
                    id: n,
                };
                let worst = results.peek().map(|r| r.0).expect("non-empty results");
                if results.len() < ef || s > worst {
                    candidates.push(s);
                    results.push(std::cmp::Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    fn descend(&self, data: &Vectors, q: &[f32], down_to: usize, visited: &mut [u32], stamp: &mut u32) -> Scored {
        let ep = self.entry_point;
        let mut best = Scored {
            sim: dot(q, data.row(ep as usize)),
            id: ep,
        };
        for level in (down_to..=self.max_level()).rev() {
            *stamp += 1;
            best = self.search_layer(data, q, &[best], 1, level, visited, *stamp)[0];
        }
        best
    }

    /// Beam search returning up to `k` centroids sorted by descending similarity.
    pub fn search(&self, cb: &Codebook, q: &[f32], k: usize, ef: usize) -> Vec<(CentroidId, f64)> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut visited = vec![0u32; self.len()];
        let mut stamp = 0;
        let ep = if self.max_level() >= 1 {
            self.descend(&cb.centroids, q, 1, &mut visited, &mut stamp)
        } else {
            Scored {
                sim: dot(q, cb.centroid(self.entry_point)),
                id: self.entry_point,
            }
        };
        stamp += 1;
        let found = self.search_layer(&cb.centroids, q, &[ep], ef.max(k), 0, &mut visited, stamp);
        found.into_iter().take(k).map(|s| (s.id, s.sim)).collect()
    }
}

/// Heuristic neighbor selection: keep a candidate only if it is more similar to
/// the base than to every neighbor already kept, then back-fill with pruned
/// candidates up to `m`.
fn select_neighbors(data: &Vectors, candidates: &[Scored], m: usize) -> Vec<u32> {
    let mut kept: Vec<Scored> = Vec::with_capacity(m);
    let mut pruned = Vec::new();
    for &c in candidates {
        if kept.len() >= m {
            break;
        }
        let cv = data.row(c.id as usize);
        let diverse = kept.iter().all(|k| c.sim > dot(cv, data.row(k.id as usize)));
        if diverse {
            kept.push(c);
        } else {
            pruned.push(c);
        }
    }
    for p in pruned {
        if kept.len() >= m {
            break;
        }
        kept.push(p);
    }
    kept.into_iter().map(|s| s.id).collect()
}

/// Builds the centroid graph with geometric level sampling.
pub fn build_centroid_index(cb: &Codebook, m: usize, ef_construction: usize, seed: u64) -> Result<CentroidGraphIndex> {
    if cb.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if m < 2 {
        return Err(Error::InvalidParameter("M must be >= 2".into()));
    }
    let data = &cb.centroids;
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level_mult = 1.0 / (m as f64).ln();
    let mut g = CentroidGraphIndex {
        m,
        ef_construction: ef_construction.max(1),
        seed,
        entry_point: 0,
        links: Vec::with_capacity(n),
    };
    let mut visited = vec![0u32; n];
    let mut stamp = 0u32;
    for i in 0..n {
        let u: f64 = rng.random::<f64>();
        let level = (-(1.0 - u).ln() * level_mult).floor() as usize;
        g.links.push(vec![Vec::new(); level + 1]);
        if i == 0 {
            g.entry_point = 0;
            continue;
        }
        let q = data.row(i);
        let top = g.max_level();
        let mut ep = if top > level {
            g.descend(data, q, level + 1, &mut visited, &mut stamp)
        } else {
            Scored {
                sim: dot(q, data.row(g.entry_point as usize)),
                id: g.entry_point,
            }
        };
        for l in (0..=level.min(top)).rev() {
            stamp += 1;
            let found = g.search_layer(data, q, &[ep], g.ef_construction, l, &mut visited, stamp);
            let chosen = select_neighbors(data, &found, m);
            let cap = g.max_links(l);
            for &nb in &chosen {
                let list = &mut g.links[nb as usize][l];
                list.push(i as u32);
                if list.len() > cap {
                    let base = data.row(nb as usize);
                    let mut cands: Vec<Scored> = list
                        .iter()
                        .map(|&x| Scored {
                            sim: dot(base, data.row(x as usize)),
                            id: x,
                        })
                        .collect();
                    cands.sort_by(|a, b| b.cmp(a));
                    g.links[nb as usize][l] = select_neighbors(data, &cands, cap);
                }
            }
            g.links[i][l] = chosen;
            ep = found[0];
        }
        if level > top {
            g.entry_point = i as u32;
        }
    }
    repair_connectivity(&mut g, data);
    Ok(g)
}

/// Links every node unreachable from the entry point to its most similar
/// reachable node that still has a free layer-0 slot.
fn repair_connectivity(g: &mut CentroidGraphIndex, data: &Vectors) {
    let cap = g.max_links(0);
    let mut seen = g.reachable_from_entry();
    while let Some(u) = seen.iter().position(|s| !s) {
        let uv = data.row(u);
        let host = (0..g.len())
            .filter(|&v| seen[v] && g.links[v][0].len() < cap)
            .max_by(|&a, &b| dot(uv, data.row(a)).total_cmp(&dot(uv, data.row(b))).then(b.cmp(&a)))
            .or_else(|| {
                (0..g.len())
                    .filter(|&v| seen[v])
                    .max_by(|&a, &b| dot(uv, data.row(a)).total_cmp(&dot(uv, data.row(b))).then(b.cmp(&a)))
            })
            .expect("entry point is reachable");
        let list = &mut g.links[host][0];
        if list.len() >= cap {
            // Every reachable node is full: replace the host's least similar link.
            let hv = data.row(host);
            let worst = (0..list.len())
                .min_by(|&a, &b| dot(hv, data.row(list[a] as usize)).total_cmp(&dot(hv, data.row(list[b] as usize))))
                .expect("full list");
            list[worst] = u as u32;
            seen = g.reachable_from_entry();
            continue;
        }
        list.push(u as u32);
        if g.links[u][0].len() < cap && !g.links[u][0].contains(&(host as u32)) {
            g.links[u][0].push(host as u32);
        }
        g.mark_reachable(u as u32, &mut seen);
    }
}

/// Top-`phi_c` centroids for one query vector.
pub fn top_centroids(
    cb: &Codebook,
    graph: Option<&CentroidGraphIndex>,
    v_q: &[f32],
    sims: &[f64],
    phi_c: usize,
    ef_search: usize,
    mode: AnnMode,
) -> Result<Vec<(CentroidId, f64)>> {
    if phi_c == 0 {
        return Err(Error::InvalidParameter("phi_c must be >= 1".into()));
    }
    match mode {
        AnnMode::Exact => Ok(top_centroids_exact(sims, phi_c)),
        AnnMode::Graph => {
            let g = graph.ok_or_else(|| {
                Error::InvalidParameter("graph mode requested but the bundle has no centroid graph".into())
            })?;
            Ok(g.search(cb, v_q, phi_c.min(cb.len()), ef_search.max(phi_c)))
        }
    }
}
