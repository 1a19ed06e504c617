//! Per-set partitioning of column vectors into centroid groups.
//!
//! Each set starts as one singleton group per owning centroid. Highly dispersed
//! sets (many distinct centroids relative to their size) are coarsened by
//! repeatedly merging the most similar pair of groups; concentrated sets are
//! split with a local k-means whose "cascade" centroids replace the global
//! grouping. Sets in between keep their singleton groups.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{train_kmeans, CentroidId, ClusterAssignment, Codebook, DEFAULT_KMEANS_ITERS};
use crate::repository::{dot, squared_l2, SetId, VectorSet, VectorSetRepository, Vectors};

pub const DEFAULT_RHO_LOW: f64 = 0.2;
pub const DEFAULT_RHO_HIGH: f64 = 0.8;

/// A centroid referenced by a partition group: either a global codebook entry
/// or one of the set-local cascade centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CentroidRef {
    Global(CentroidId),
    Cascade(u32),
}

/// `(G_k, S_k)`: a non-empty centroid group and the set members it governs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionGroup {
    pub group_id: u32,
    pub centroids: Vec<CentroidRef>,
    /// Column indices within the owning set, ascending.
    pub members: Vec<u32>,
}

impl PartitionGroup {
    #[inline]
    pub fn capacity(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionBranch {
    /// `ρ ≤ ρ_l`: split with cascade centroids.
    Low,
    /// `ρ_l < ρ < ρ_h`: singleton groups kept.
    Middle,
    /// `ρ ≥ ρ_h`: groups merged.
    High,
    /// Partitioning disabled: one group holding the whole set.
    Single,
}

/// `P_i`: the partitions of one set.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSet {
    pub set_id: SetId,
    pub groups: Vec<PartitionGroup>,
    /// Set-local centroids referenced through [`CentroidRef::Cascade`].
    pub cascade_centroids: Vectors,
    pub branch: DispersionBranch,
}

impl PartitionSet {
    /// Vector for a centroid reference of this set.
    #[inline]
    pub fn centroid<'a>(&'a self, cb: &'a Codebook, r: CentroidRef) -> &'a [f32] {
        match r {
            CentroidRef::Global(c) => cb.centroid(c),
            CentroidRef::Cascade(c) => self.cascade_centroids.row(c as usize),
        }
    }

    pub fn capacities(&self) -> Vec<usize> {
        self.groups.iter().map(PartitionGroup::capacity).collect()
    }

    /// Checks the partition post-conditions against a set of `set_len` columns.
    pub fn validate(&self, set_len: usize, n_global: usize) -> Result<(), String> {
        let mut seen = vec![false; set_len];
        let mut total = 0;
        for (k, g) in self.groups.iter().enumerate() {
            if g.group_id as usize != k {
                return Err(format!("group {k} carries id {}", g.group_id));
            }
            if g.centroids.is_empty() {
                return Err(format!("group {k} has no centroids"));
            }
            if g.members.is_empty() {
                return Err(format!("group {k} has no members"));
            }
            for r in &g.centroids {
                let ok = match *r {
                    CentroidRef::Global(c) => (c as usize) < n_global,
                    CentroidRef::Cascade(c) => (c as usize) < self.cascade_centroids.len(),
                };
                if !ok {
                    return Err(format!("group {k} references invalid centroid {r:?}"));
                }
            }
            for &m in &g.members {
                let slot = seen
                    .get_mut(m as usize)
                    .ok_or_else(|| format!("member {m} out of range"))?;
                if *slot {
                    return Err(format!("member {m} appears in two groups"));
                }
                *slot = true;
            }
            total += g.capacity();
        }
        if total != set_len || seen.iter().any(|s| !s) {
            return Err(format!("groups cover {total} of {set_len} members"));
        }
        Ok(())
    }
}

/// `I_p`: one [`PartitionSet`] per repository set.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionInvertedIndex {
    pub sets: Vec<PartitionSet>,
}

impl PartitionInvertedIndex {
    pub fn get(&self, set: SetId) -> Result<&PartitionSet> {
        self.sets.get(set as usize).ok_or(Error::UnknownSet(set))
    }

    pub fn total_groups(&self) -> usize {
        self.sets.iter().map(|p| p.groups.len()).sum()
    }

    pub fn total_cascade_centroids(&self) -> usize {
        self.sets.iter().map(|p| p.cascade_centroids.len()).sum()
    }
}

/// Number of local centroids used for a concentrated set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CascadePolicy {
    /// `min(|V_i|, max(2, ⌈ρ_target·|V_i|⌉))` with `ρ_target = (ρ_l + ρ_h) / 2`.
    Auto,
    /// A fixed count, capped at `|V_i|`.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    Adaptive,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub rho_low: f64,
    pub rho_high: f64,
    pub cascade: CascadePolicy,
    pub mode: PartitionMode,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            rho_low: DEFAULT_RHO_LOW,
            rho_high: DEFAULT_RHO_HIGH,
            cascade: CascadePolicy::Auto,
            mode: PartitionMode::Adaptive,
            kmeans_iters: DEFAULT_KMEANS_ITERS,
            seed: 0,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho_low > 0.0 && self.rho_low < self.rho_high && self.rho_high <= 1.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "dispersion thresholds must satisfy 0 < rho_low < rho_high <= 1 (got {}, {})",
                self.rho_low, self.rho_high
            )));
        }
        if let CascadePolicy::Fixed(0) = self.cascade {
            return Err(Error::InvalidParameter("cascade k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cascade_k(&self, set_len: usize) -> usize {
        match self.cascade {
            CascadePolicy::Auto => {
                let target = 0.5 * (self.rho_low + self.rho_high);
                let k = (target * set_len as f64).ceil() as usize;
                set_len.min(k.max(2))
            }
            CascadePolicy::Fixed(k) => set_len.min(k),
        }
    }
}

/// `ρ(V_i) = |L(V_i)| / |V_i|` over the owning centroids of one set.
pub fn dispersion(owners: &[CentroidId]) -> f64 {
    let mut distinct = owners.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct.len() as f64 / owners.len() as f64
}

/// `gsim`: maximum inner product over cross pairs of group centroids.
pub fn group_similarity(a: &PartitionGroup, b: &PartitionGroup, pset: &PartitionSet, cb: &Codebook) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for &x in &a.centroids {
        for &y in &b.centroids {
            best = best.max(dot(pset.centroid(cb, x), pset.centroid(cb, y)));
        }
    }
    best
}

fn mix_seed(seed: u64, set: SetId) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (u64::from(set).wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn singleton_groups(owners: &[CentroidId]) -> Vec<(Vec<CentroidId>, Vec<u32>)> {
    let mut distinct = owners.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct
        .into_iter()
        .map(|c| {
            let members = owners
                .iter()
                .enumerate()
                .filter(|&(_, &o)| o == c)
                .map(|(j, _)| j as u32)
                .collect();
            (vec![c], members)
        })
        .collect()
}

/// Merges the gsim-maximal pair until `|P_i| / |V_i| < ρ_h` or one group is left.
/// Ties go to the lexicographically lowest `(group, group)` pair.
fn merge_dispersed(
    mut groups: Vec<(Vec<CentroidId>, Vec<u32>)>,
    set_len: usize,
    rho_high: f64,
    cb: &Codebook,
) -> Vec<(Vec<CentroidId>, Vec<u32>)> {
    let m = groups.len();
    let mut sim = vec![f64::NEG_INFINITY; m * m];
    for p in 0..m {
        for q in p + 1..m {
            let s = dot(cb.centroid(groups[p].0[0]), cb.centroid(groups[q].0[0]));
            sim[p * m + q] = s;
            sim[q * m + p] = s;
        }
    }
    let mut alive = vec![true; m];
    let mut count = m;
    while count > 1 && count as f64 / set_len as f64 >= rho_high {
        let mut best: Option<(usize, usize)> = None;
        let mut best_s = f64::NEG_INFINITY;
        for p in (0..m).filter(|&p| alive[p]) {
            for q in (p + 1..m).filter(|&q| alive[q]) {
                let s = sim[p * m + q];
                if best.is_none() || s > best_s {
                    best = Some((p, q));
                    best_s = s;
                }
            }
        }
        let (p, q) = best.expect("at least two live groups");
        let (cq, mq) = std::mem::take(&mut groups[q]);
        let g = &mut groups[p];
        g.0.extend(cq);
        g.0.sort_unstable();
        g.1.extend(mq);
        g.1.sort_unstable();
        alive[q] = false;
        for r in (0..m).filter(|&r| alive[r] && r != p) {
            let s = sim[p * m + r].max(sim[q * m + r]);
            sim[p * m + r] = s;
            sim[r * m + p] = s;
        }
        count -= 1;
    }
    groups
        .into_iter()
        .zip(alive)
        .filter_map(|(g, a)| a.then_some(g))
        .collect()
}

fn cascade_split(set: &VectorSet, k: usize, iters: usize, seed: u64) -> Result<(Vectors, Vec<PartitionGroup>)> {
    let local = train_kmeans(&set.vectors, k, iters, seed)?;
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); local.len()];
    for (j, v) in set.vectors.rows().enumerate() {
        members[local.nearest(v) as usize].push(j as u32);
    }
    let dim = set.vectors.dim();
    let mut data = Vec::new();
    let mut groups = Vec::new();
    for (c, m) in members.into_iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let id = groups.len() as u32;
        data.extend_from_slice(local.centroid(c as CentroidId));
        groups.push(PartitionGroup {
            group_id: id,
            centroids: vec![CentroidRef::Cascade(id)],
            members: m,
        });
    }
    Ok((Vectors::new(dim, data)?, groups))
}

fn to_groups(raw: Vec<(Vec<CentroidId>, Vec<u32>)>) -> Vec<PartitionGroup> {
    raw.into_iter()
        .enumerate()
        .map(|(k, (cs, members))| PartitionGroup {
            group_id: k as u32,
            centroids: cs.into_iter().map(CentroidRef::Global).collect(),
            members,
        })
        .collect()
}

/// Partitions one set.
pub fn partition_set(
    set: &VectorSet,
    owners: &[CentroidId],
    cb: &Codebook,
    config: &PartitionConfig,
) -> Result<PartitionSet> {
    let n = set.len();
    let empty = Vectors::new(cb.dim(), Vec::new())?;
    if config.mode == PartitionMode::Single {
        let mut cs = owners.to_vec();
        cs.sort_unstable();
        cs.dedup();
        return Ok(PartitionSet {
            set_id: set.set_id,
            groups: to_groups(vec![(cs, (0..n as u32).collect())]),
            cascade_centroids: empty,
            branch: DispersionBranch::Single,
        });
    }
    let rho = dispersion(owners);
    if rho <= config.rho_low {
        let k = config.cascade_k(n);
        let (cascade, groups) = cascade_split(set, k, config.kmeans_iters, mix_seed(config.seed, set.set_id))?;
        return Ok(PartitionSet {
            set_id: set.set_id,
            groups,
            cascade_centroids: cascade,
            branch: DispersionBranch::Low,
        });
    }
    let singles = singleton_groups(owners);
    let (raw, branch) = if rho >= config.rho_high {
        (merge_dispersed(singles, n, config.rho_high, cb), DispersionBranch::High)
    } else {
        (singles, DispersionBranch::Middle)
    };
    Ok(PartitionSet {
        set_id: set.set_id,
        groups: to_groups(raw),
        cascade_centroids: empty,
        branch,
    })
}

/// Builds `I_p` for every set of the repository, in parallel over sets.
pub fn build_partition_index(
    repo: &VectorSetRepository,
    cb: &Codebook,
    assignment: &ClusterAssignment,
    config: &PartitionConfig,
) -> Result<PartitionInvertedIndex> {
    config.validate()?;
    if assignment.n_sets() != repo.len() {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} sets, repository has {}",
            assignment.n_sets(),
            repo.len()
        )));
    }
    let sets = repo
        .sets()
        .par_iter()
        .map(|s| partition_set(s, assignment.set_owners(s.set_id), cb, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionInvertedIndex { sets })
}

/// Nearest cascade centroid of `v` within a set, for diagnostics.
pub fn nearest_cascade(pset: &PartitionSet, v: &[f32]) -> Option<u32> {
    pset.cascade_centroids
        .rows()
        .enumerate()
        .min_by(|a, b| squared_l2(v, a.1).total_cmp(&squared_l2(v, b.1)))
        .map(|(i, _)| i as u32)
}
