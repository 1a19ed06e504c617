//! Coarse quantizer: k-means codebook over all column vectors plus the two flat
//! inverted indexes (centroid → member vectors, set → per-centroid counts).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::repository::{squared_l2, SetId, VectorSetRepository, Vectors};

pub type CentroidId = u32;

/// Training sample cap per centroid.
pub const SAMPLES_PER_CENTROID: usize = 256;
pub const DEFAULT_KMEANS_ITERS: usize = 20;

/// Default codebook size: `⌈√total_vectors⌉`.
pub fn default_n_centroids(total_vectors: usize) -> usize {
    ((total_vectors as f64).sqrt().ceil() as usize).max(1)
}

/// k-means centroids. Centroids are the raw cluster means and are not
/// re-normalized, so their norms are at most 1 for unit inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vectors,
    pub train_seed: u64,
}

impl Codebook {
    #[inline]
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.centroids.dim()
    }

    #[inline]
    pub fn centroid(&self, c: CentroidId) -> &[f32] {
        self.centroids.row(c as usize)
    }

    /// Nearest centroid by Euclidean distance, ties to the lowest id.
    pub fn nearest(&self, v: &[f32]) -> CentroidId {
        nearest_in(self.centroids.as_slice(), self.dim(), v)
    }
}

fn nearest_in(centroids: &[f32], dim: usize, v: &[f32]) -> CentroidId {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_l2(v, row);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best as CentroidId
}

fn nearest_f64(centroids: &[f64], dim: usize, v: &[f32]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.chunks_exact(dim).enumerate() {
        let d: f64 = v
            .iter()
            .zip(row)
            .map(|(&a, &b)| {
                let t = f64::from(a) - b;
                t * t
            })
            .sum();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Per-iteration inertia history produced by [`train_kmeans_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    /// Inertia after the initial assignment and after every Lloyd step.
    pub inertia: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn train_kmeans(points: &Vectors, k: usize, max_iters: usize, seed: u64) -> Result<Codebook> {
    train_kmeans_traced(points, k, max_iters, seed).map(|(cb, _)| cb)
}

pub fn train_kmeans_traced(points: &Vectors, k: usize, max_iters: usize, seed: u64) -> Result<(Codebook, KMeansTrace)> {
    let n = points.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("k-means needs at least one point".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of points ({n})"
        )));
    }
    let dim = points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);

    let mut labels = vec![0usize; n];
    let mut dists = vec![0f64; n];
    let assign = |centroids: &[f64], labels: &mut [usize], dists: &mut [f64]| -> bool {
        let fresh: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest_f64(centroids, dim, points.row(i)))
            .collect();
        let mut changed = false;
        for (i, (c, d)) in fresh.into_iter().enumerate() {
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = d;
        }
        changed
    };

    assign(&centroids, &mut labels, &mut dists);
    let mut trace = KMeansTrace {
        inertia: vec![dists.iter().sum()],
    };
    for _ in 0..max_iters {
        update_centroids(points, k, &labels, &mut dists, &mut centroids);
        let changed = assign(&centroids, &mut labels, &mut dists);
        trace.inertia.push(dists.iter().sum());
        if !changed {
            break;
        }
    }
    let data = centroids.iter().map(|&x| x as f32).collect();
    Ok((
        Codebook {
            centroids: Vectors::new(dim, data)?,
            train_seed: seed,
        },
        trace,
    ))
}

fn kmeans_plus_plus(points: &Vectors, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len();
    let dim = points.dim();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| squared_l2(points.row(i), points.row(first))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // All remaining points coincide with chosen centers.
            (0..n).find(|&i| !taken[i]).expect("k <= n")
        };
        taken[next] = true;
        chosen.push(next);
        let p = points.row(next);
        for (i, w) in d2.iter_mut().enumerate() {
            let d = squared_l2(points.row(i), p);
            if d < *w {
                *w = d;
            }
        }
    }
    let mut centroids = Vec::with_capacity(k * dim);
    for &i in &chosen {
        centroids.extend(points.row(i).iter().map(|&x| f64::from(x)));
    }
    centroids
}

fn update_centroids(points: &Vectors, k: usize, labels: &[usize], dists: &mut [f64], centroids: &mut [f64]) {
    let dim = points.dim();
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(points.row(i)) {
            *s += f64::from(x);
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            // Re-seed an empty cluster at the point farthest from its centroid.
            let mut far = 0;
            for i in 1..dists.len() {
                if dists[i] > dists[far] {
                    far = i;
                }
            }
            dists[far] = 0.0;
            for (dst, &x) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(points.row(far)) {
                *dst = f64::from(x);
            }
        } else {
            let inv = 1.0 / counts[c] as f64;
            for (dst, &s) in centroids[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&sums[c * dim..(c + 1) * dim])
            {
                *dst = s * inv;
            }
        }
    }
}

/// Trains the global codebook on the aggregate vector set, subsampling to at
/// most `SAMPLES_PER_CENTROID · n_c` points.
pub fn train_codebook(repo: &VectorSetRepository, n_c: usize, max_iters: usize, seed: u64) -> Result<Codebook> {
    let all = repo.all_vectors();
    let total = repo.total_vectors();
    let cap = SAMPLES_PER_CENTROID.saturating_mul(n_c);
    let points = if total > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a3b_1e00_0000);
        let mut idx = sample(&mut rng, total, cap).into_vec();
        idx.sort_unstable();
        let dim = repo.dim();
        let mut data = Vec::with_capacity(cap * dim);
        for i in idx {
            data.extend_from_slice(&all[i * dim..(i + 1) * dim]);
        }
        Vectors::new(dim, data)?
    } else {
        Vectors::new(repo.dim(), all)?
    };
    train_kmeans(&points, n_c, max_iters, seed)
}

/// Position of a column vector inside the repository.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VectorHandle {
    pub set_id: SetId,
    pub index: u32,
}

/// Owning centroid `μ(v)` of every vector, stored per set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    owners: Vec<Vec<CentroidId>>,
}

impl ClusterAssignment {
    pub fn from_owners(owners: Vec<Vec<CentroidId>>) -> Self {
        Self { owners }
    }

    pub fn set_owners(&self, set: SetId) -> &[CentroidId] {
        &self.owners[set as usize]
    }

    pub fn owner(&self, h: VectorHandle) -> CentroidId {
        self.owners[h.set_id as usize][h.index as usize]
    }

    pub fn n_sets(&self) -> usize {
        self.owners.len()
    }

    pub fn total(&self) -> usize {
        self.owners.iter().map(Vec::len).sum()
    }

    /// Reconstructs the assignment from `I_v`.
    pub fn from_inverted(ivi: &VectorInvertedIndex, set_sizes: &[usize]) -> Result<Self> {
        let mut owners: Vec<Vec<Option<CentroidId>>> = set_sizes.iter().map(|&n| vec![None; n]).collect();
        for c in 0..ivi.n_centroids() {
            for h in ivi.list(c as CentroidId) {
                let slot = owners
                    .get_mut(h.set_id as usize)
                    .and_then(|s| s.get_mut(h.index as usize))
                    .ok_or_else(|| Error::Format(format!("handle {h:?} out of range")))?;
                if slot.replace(c as CentroidId).is_some() {
                    return Err(Error::Format(format!("handle {h:?} listed twice")));
                }
            }
        }
        let owners = owners
            .into_iter()
            .map(|s| s.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Format("inverted index does not cover every vector".into()))?;
        Ok(Self { owners })
    }
}

/// Assigns every repository vector to its nearest centroid.
pub fn assign_all(repo: &VectorSetRepository, cb: &Codebook) -> Result<ClusterAssignment> {
    if repo.dim() != cb.dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            found: repo.dim(),
        });
    }
    let owners = repo
        .sets()
        .par_iter()
        .map(|s| s.vectors.rows().map(|v| cb.nearest(v)).collect())
        .collect();
    Ok(ClusterAssignment { owners })
}

/// A distinct set appearing in a centroid's posting list, with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetPosting {
    pub set_id: SetId,
    pub count: u32,
}

/// `I_v`: centroid → member handles, grouped by centroid and sorted by handle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorInvertedIndex {
    offsets: Vec<usize>,
    handles: Vec<VectorHandle>,
    posting_offsets: Vec<usize>,
    postings: Vec<SetPosting>,
}

impl VectorInvertedIndex {
    pub fn from_lists(lists: Vec<Vec<VectorHandle>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut posting_offsets = Vec::with_capacity(lists.len() + 1);
        let mut handles = Vec::new();
        let mut postings: Vec<SetPosting> = Vec::new();
        offsets.push(0);
        posting_offsets.push(0);
        for mut list in lists {
            list.sort_unstable();
            let start = postings.len();
            for h in &list {
                let fresh = postings.len() == start;
                match postings.last_mut() {
                    Some(p) if !fresh && p.set_id == h.set_id => p.count += 1,
                    _ => postings.push(SetPosting {
                        set_id: h.set_id,
                        count: 1,
                    }),
                }
            }
            handles.extend(list);
            offsets.push(handles.len());
            posting_offsets.push(postings.len());
        }
        Self {
            offsets,
            handles,
            posting_offsets,
            postings,
        }
    }

    pub fn n_centroids(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `F(c)`: handles owned by centroid `c`.
    pub fn list(&self, c: CentroidId) -> &[VectorHandle] {
        let c = c as usize;
        &self.handles[self.offsets[c]..self.offsets[c + 1]]
    }

    /// Distinct sets with members in `c`, ascending by set id.
    pub fn set_postings(&self, c: CentroidId) -> &[SetPosting] {
        let c = c as usize;
        &self.postings[self.posting_offsets[c]..self.posting_offsets[c + 1]]
    }

    pub fn total_handles(&self) -> usize {
        self.handles.len()
    }

    pub(crate) fn raw_parts(&self) -> (&[usize], &[VectorHandle]) {
        (&self.offsets, &self.handles)
    }
}

/// `I_w`: set → (centroid, count) pairs in CSR layout, centroids ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetWeightIndex {
    offsets: Vec<usize>,
    centroids: Vec<CentroidId>,
    counts: Vec<u32>,
}

impl SetWeightIndex {
    pub fn from_csr(offsets: Vec<usize>, centroids: Vec<CentroidId>, counts: Vec<u32>) -> Result<Self> {
        let ok = !offsets.is_empty()
            && offsets[0] == 0
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && *offsets.last().unwrap() == centroids.len()
            && centroids.len() == counts.len()
            && counts.iter().all(|&c| c >= 1);
        if !ok {
            return Err(Error::Format("malformed set weight index".into()));
        }
        Ok(Self {
            offsets,
            centroids,
            counts,
        })
    }

    pub fn n_sets(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(centroid, count)` pairs of set `i`.
    pub fn weights(&self, set: SetId) -> impl Iterator<Item = (CentroidId, u32)> + '_ {
        let s = set as usize;
        let r = self.offsets[s]..self.offsets[s + 1];
        self.centroids[r.clone()]
            .iter()
            .copied()
            .zip(self.counts[r].iter().copied())
    }

    /// `I_w[i][c]`, zero when absent.
    pub fn weight(&self, set: SetId, c: CentroidId) -> u32 {
        let s = set as usize;
        let r = self.offsets[s]..self.offsets[s + 1];
        match self.centroids[r.clone()].binary_search(&c) {
            Ok(pos) => self.counts[r.start + pos],
            Err(_) => 0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.centroids.len()
    }

    pub(crate) fn raw_parts(&self) -> (&[usize], &[CentroidId], &[u32]) {
        (&self.offsets, &self.centroids, &self.counts)
    }
}

/// Builds `I_v` and `I_w` from an assignment over `n_c` centroids.
pub fn build_indexes(assignment: &ClusterAssignment, n_c: usize) -> Result<(VectorInvertedIndex, SetWeightIndex)> {
    let mut lists: Vec<Vec<VectorHandle>> = vec![Vec::new(); n_c];
    let mut offsets = Vec::with_capacity(assignment.n_sets() + 1);
    let mut centroids = Vec::new();
    let mut counts = Vec::new();
    offsets.push(0);
    let mut scratch: Vec<CentroidId> = Vec::new();
    for (s, owners) in assignment.owners.iter().enumerate() {
        for (j, &c) in owners.iter().enumerate() {
            let list = lists
                .get_mut(c as usize)
                .ok_or_else(|| Error::InvalidParameter(format!("centroid id {c} out of range (n_c = {n_c})")))?;
            list.push(VectorHandle {
                set_id: s as SetId,
                index: j as u32,
            });
        }
        scratch.clear();
        scratch.extend_from_slice(owners);
        scratch.sort_unstable();
        for &c in &scratch {
            if centroids.len() > *offsets.last().unwrap() && *centroids.last().unwrap() == c {
                *counts.last_mut().unwrap() += 1;
            } else {
                centroids.push(c);
                counts.push(1u32);
            }
        }
        offsets.push(centroids.len());
    }
    Ok((
        VectorInvertedIndex::from_lists(lists),
        SetWeightIndex {
            offsets,
            centroids,
            counts,
        },
    ))
}
