//! Index construction and the three-stage top-k search: centroid refinement,
//! many-to-one filtering, then partition-restricted exact scoring.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centroid_ann::{
    build_centroid_index, default_ef_search, AnnMode, CentroidGraphIndex, CentroidSims, DEFAULT_EF_CONSTRUCTION,
    DEFAULT_M,
};
use crate::error::{Error, Result};
use crate::exact_matching::{
    build_threshold_graph, check_tau, greedy_edge_upper_bound, lower_bound_matching, max_cardinality_max_weight,
};
use crate::mwmto::{bounds_from_table, mwmto_from_table, partition_sims, BoundPair};
use crate::partition_index::{
    build_partition_index, CascadePolicy, PartitionConfig, PartitionInvertedIndex, PartitionMode, PartitionSet,
    DEFAULT_RHO_HIGH, DEFAULT_RHO_LOW,
};
use crate::pruning::{prune, BoundedCandidate, PruneStats, Pruner, Resolved};
use crate::quantizer::{
    assign_all, build_indexes, default_n_centroids, train_codebook, Codebook, SetWeightIndex, VectorInvertedIndex,
    DEFAULT_KMEANS_ITERS,
};
use crate::refinement::{RefineParams, Refiner};
use crate::repository::{QueryTable, SetId, VectorSetRepository, Vectors};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_TAU: f64 = 0.7;
pub const DEFAULT_PHI_C: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Codebook size; `⌈√total_vectors⌉` when unset.
    pub n_centroids: Option<usize>,
    pub kmeans_iters: usize,
    pub rho_low: f64,
    pub rho_high: f64,
    pub cascade: CascadePolicy,
    pub partition_mode: PartitionMode,
    /// Build the centroid graph; automatic (only for large codebooks) when unset.
    pub centroid_graph: Option<bool>,
    pub graph_m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            n_centroids: None,
            kmeans_iters: DEFAULT_KMEANS_ITERS,
            rho_low: DEFAULT_RHO_LOW,
            rho_high: DEFAULT_RHO_HIGH,
            cascade: CascadePolicy::Auto,
            partition_mode: PartitionMode::Adaptive,
            centroid_graph: None,
            graph_m: DEFAULT_M,
            ef_construction: DEFAULT_EF_CONSTRUCTION,
            seed: 0,
        }
    }
}

impl BuildConfig {
    pub fn partition_config(&self) -> PartitionConfig {
        PartitionConfig {
            rho_low: self.rho_low,
            rho_high: self.rho_high,
            cascade: self.cascade,
            mode: self.partition_mode,
            kmeans_iters: self.kmeans_iters,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.partition_config().validate()?;
        if self.n_centroids == Some(0) {
            return Err(Error::InvalidParameter("n_c must be >= 1".into()));
        }
        if self.graph_m < 2 {
            return Err(Error::InvalidParameter("M must be >= 2".into()));
        }
        if self.kmeans_iters == 0 {
            return Err(Error::InvalidParameter("k-means iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Every structure a search needs, built from one repository.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    /// The build configuration with `n_centroids` and `centroid_graph` resolved.
    pub config: BuildConfig,
    pub repo: VectorSetRepository,
    pub codebook: Codebook,
    pub inverted: VectorInvertedIndex,
    pub weights: SetWeightIndex,
    pub partitions: PartitionInvertedIndex,
    pub graph: Option<CentroidGraphIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k: usize,
    pub tau: f64,
    pub phi_c: usize,
    pub phi_ref: usize,
    pub phi_r: usize,
    pub pruner: Pruner,
    /// Exact scan or graph search; follows the codebook size when unset.
    pub ann_mode: Option<AnnMode>,
    pub ef_search: Option<usize>,
    pub mark_visited_on_block: bool,
}

impl SearchParams {
    /// Defaults for a given `k`: `φ_ref = 5k`, `φ_r = 3k`.
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            tau: DEFAULT_TAU,
            phi_c: DEFAULT_PHI_C,
            phi_ref: 5 * k,
            phi_r: 3 * k,
            pruner: Pruner::Enhanced,
            ann_mode: None,
            ef_search: None,
            mark_visited_on_block: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if self.k == 0 || self.phi_c == 0 {
            return Err(Error::InvalidParameter("k and phi_c must be >= 1".into()));
        }
        if !(self.k <= self.phi_r && self.phi_r <= self.phi_ref) {
            return Err(Error::InvalidParameter(format!(
                "need k <= phi_r <= phi_ref, got k={} phi_r={} phi_ref={}",
                self.k, self.phi_r, self.phi_ref
            )));
        }
        Ok(())
    }
}

impl Default for SearchParams {
    fn default() -> Self {
        Self::with_k(DEFAULT_K)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub set_id: SetId,
    pub score: f64,
    pub cardinality: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub refine_ms: f64,
    pub filter_ms: f64,
    pub rank_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub touched: usize,
    pub refine_events: usize,
    pub refined: usize,
    pub filtered: usize,
    pub returned: usize,
    pub filter: PruneStats,
    pub rank: PruneStats,
    /// Partition-level exact matchings solved while ranking.
    pub exact_match_calls: usize,
    pub timings: StageTimings,
}

impl SearchDiagnostics {
    /// Score-function calls across both pruned stages.
    pub fn score_calls(&self) -> usize {
        self.filter.score_calls + self.rank.score_calls
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Best first; at most `k`.
    pub hits: Vec<Hit>,
    /// Set ids leaving refinement, in refinement order.
    pub refined_ids: Vec<SetId>,
    /// Set ids kept by the filtering stage, best first.
    pub filtered_ids: Vec<SetId>,
    pub diagnostics: SearchDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteredScore {
    pub score: f64,
    pub cardinality: usize,
    pub matchings: usize,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn gather(v: &Vectors, rows: impl IntoIterator<Item = usize>) -> Vectors {
    let mut data = Vec::new();
    for r in rows {
        data.extend_from_slice(v.row(r));
    }
    Vectors::new(v.dim(), data).expect("rows share the source dimension")
}

/// Query rows routed to each partition. A set with a single partition
/// receives the whole query; otherwise rows follow the many-to-one assignment
/// and unassigned rows are dropped.
fn split_query(pset: &PartitionSet, assignment: &[Option<u32>]) -> Vec<Vec<usize>> {
    if pset.groups.len() == 1 {
        return vec![(0..assignment.len()).collect()];
    }
    let mut split = vec![Vec::new(); pset.groups.len()];
    for (qi, a) in assignment.iter().enumerate() {
        if let Some(g) = *a {
            split[g as usize].push(qi);
        }
    }
    split
}

impl Index {
    pub fn build(repo: VectorSetRepository, config: &BuildConfig) -> Result<Self> {
        config.validate()?;
        if repo.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let total = repo.total_vectors();
        let n_c = config
            .n_centroids
            .unwrap_or_else(|| default_n_centroids(total))
            .min(total);
        let codebook = train_codebook(&repo, n_c, config.kmeans_iters, config.seed)?;
        let assignment = assign_all(&repo, &codebook)?;
        let (inverted, weights) = build_indexes(&assignment, n_c)?;
        let partitions = build_partition_index(&repo, &codebook, &assignment, &config.partition_config())?;
        let with_graph = config
            .centroid_graph
            .unwrap_or(AnnMode::default_for(n_c) == AnnMode::Graph);
        let graph = if with_graph {
            Some(build_centroid_index(
                &codebook,
                config.graph_m,
                config.ef_construction,
                config.seed,
            )?)
        } else {
            None
        };
        let mut resolved = config.clone();
        resolved.n_centroids = Some(n_c);
        resolved.centroid_graph = Some(with_graph);
        Ok(Self {
            config: resolved,
            repo,
            codebook,
            inverted,
            weights,
            partitions,
            graph,
        })
    }

    pub fn n_centroids(&self) -> usize {
        self.codebook.len()
    }

    fn check_query(&self, q: &Vectors) -> Result<()> {
        if q.dim() != self.repo.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.repo.dim(),
                found: q.dim(),
            });
        }
        if q.is_empty() {
            return Err(Error::EmptySet(0));
        }
        Ok(())
    }

    /// Many-to-one assignment of the query onto a set's partitions.
    pub fn mwmto_assignment(&self, q: &Vectors, set_id: SetId, tau: f64) -> Result<Vec<Option<u32>>> {
        let pset = self.partitions.get(set_id)?;
        let table = partition_sims(q, pset, &self.codebook, tau, None)?;
        Ok(mwmto_from_table(&table, &pset.capacities()).assignment)
    }

    /// Sum over partitions of the unionability between the query rows routed
    /// to a partition and that partition's member vectors. Computes the
    /// assignment when none is supplied.
    pub fn clustered_score(
        &self,
        q: &Vectors,
        set_id: SetId,
        tau: f64,
        assignment: Option<&[Option<u32>]>,
    ) -> Result<ClusteredScore> {
        self.check_query(q)?;
        let set = self.repo.set(set_id)?;
        let pset = self.partitions.get(set_id)?;
        let owned;
        let assignment = match assignment {
            Some(a) => a,
            None => {
                owned = self.mwmto_assignment(q, set_id, tau)?;
                &owned
            }
        };
        let mut out = ClusteredScore {
            score: 0.0,
            cardinality: 0,
            matchings: 0,
        };
        for (g, rows) in pset.groups.iter().zip(split_query(pset, assignment)) {
            if rows.is_empty() {
                continue;
            }
            let graph = build_threshold_graph(
                &gather(q, rows),
                &gather(&set.vectors, g.members.iter().map(|&m| m as usize)),
                tau,
            )?;
            let m = max_cardinality_max_weight(&graph);
            out.score += m.weight;
            out.cardinality += m.cardinality;
            out.matchings += 1;
        }
        Ok(out)
    }

    /// Per-partition greedy lower bound (completed to maximum cardinality)
    /// and edge-sum upper bound, summed.
    pub fn clustered_bounds(
        &self,
        q: &Vectors,
        set_id: SetId,
        tau: f64,
        assignment: Option<&[Option<u32>]>,
    ) -> Result<BoundPair> {
        self.check_query(q)?;
        let set = self.repo.set(set_id)?;
        let pset = self.partitions.get(set_id)?;
        let owned;
        let assignment = match assignment {
            Some(a) => a,
            None => {
                owned = self.mwmto_assignment(q, set_id, tau)?;
                &owned
            }
        };
        let mut b = BoundPair::new(0.0, 0.0);
        for (g, rows) in pset.groups.iter().zip(split_query(pset, assignment)) {
            if rows.is_empty() {
                continue;
            }
            let graph = build_threshold_graph(
                &gather(q, rows),
                &gather(&set.vectors, g.members.iter().map(|&m| m as usize)),
                tau,
            )?;
            b.lb += lower_bound_matching(&graph).weight;
            b.ub += greedy_edge_upper_bound(&graph);
        }
        Ok(b)
    }

    pub fn search(&self, query: &QueryTable, params: &SearchParams) -> Result<SearchResult> {
        params.validate()?;
        let q = &query.vectors;
        self.check_query(q)?;
        let start = Instant::now();
        let mode = params.ann_mode.unwrap_or(AnnMode::default_for(self.n_centroids()));
        let sims = CentroidSims::compute(q, &self.codebook);
        let refiner = Refiner {
            codebook: &self.codebook,
            graph: self.graph.as_ref(),
            inverted: &self.inverted,
        };
        let refined = refiner.refine(
            q,
            &sims,
            &RefineParams {
                phi_c: params.phi_c,
                phi_ref: params.phi_ref,
                ann_mode: mode,
                ef_search: params.ef_search.unwrap_or(default_ef_search(params.phi_c)),
                mark_visited_on_block: params.mark_visited_on_block,
            },
        )?;
        let refine_ms = ms(start);

        let t = Instant::now();
        let prepared = refined
            .ranked
            .par_iter()
            .map(|&(id, _)| {
                let pset = self.partitions.get(id)?;
                let table = partition_sims(q, pset, &self.codebook, params.tau, Some(&sims))?;
                let caps = pset.capacities();
                let b = bounds_from_table(&table, &caps, self.repo.set(id)?.len());
                Ok((table, caps, b.bounds))
            })
            .collect::<Result<Vec<_>>>()?;
        let slot: HashMap<SetId, usize> = refined.ranked.iter().enumerate().map(|(i, &(id, _))| (id, i)).collect();
        let cands: Vec<BoundedCandidate> = refined
            .ranked
            .iter()
            .zip(&prepared)
            .map(|(&(set_id, _), p)| BoundedCandidate { set_id, bounds: p.2 })
            .collect();
        let filtered = prune(params.pruner, &cands, params.phi_r, |c| {
            let (table, caps, _) = &prepared[slot[&c.set_id]];
            let r = mwmto_from_table(table, caps);
            Ok(Resolved {
                set_id: c.set_id,
                score: r.score,
                cardinality: r.cardinality,
                payload: r.assignment,
            })
        })?;
        let filter_ms = ms(t);

        let t = Instant::now();
        let assignments: HashMap<SetId, &[Option<u32>]> =
            filtered.top.iter().map(|r| (r.set_id, r.payload.as_slice())).collect();
        let rank_cands = filtered
            .top
            .par_iter()
            .map(|r| {
                Ok(BoundedCandidate {
                    set_id: r.set_id,
                    bounds: self.clustered_bounds(q, r.set_id, params.tau, Some(&r.payload))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut matchings = 0;
        let ranked = prune(params.pruner, &rank_cands, params.k, |c| {
            let s = self.clustered_score(q, c.set_id, params.tau, assignments.get(&c.set_id).copied())?;
            matchings += s.matchings;
            Ok(Resolved {
                set_id: c.set_id,
                score: s.score,
                cardinality: s.cardinality,
                payload: (),
            })
        })?;
        let rank_ms = ms(t);

        let hits: Vec<Hit> = ranked
            .top
            .iter()
            .map(|r| Hit {
                set_id: r.set_id,
                score: r.score,
                cardinality: r.cardinality,
            })
            .collect();
        let diagnostics = SearchDiagnostics {
            touched: refined.touched,
            refine_events: refined.events,
            refined: refined.ranked.len(),
            filtered: filtered.top.len(),
            returned: hits.len(),
            filter: filtered.stats,
            rank: ranked.stats,
            exact_match_calls: matchings,
            timings: StageTimings {
                refine_ms,
                filter_ms,
                rank_ms,
                total_ms: ms(start),
            },
        };
        Ok(SearchResult {
            hits,
            refined_ids: refined.ranked.iter().map(|r| r.0).collect(),
            filtered_ids: filtered.top.iter().map(|r| r.set_id).collect(),
            diagnostics,
        })
    }

    /// Searches many queries in parallel.
    pub fn search_batch(&self, queries: &[QueryTable], params: &SearchParams) -> Result<Vec<SearchResult>> {
        queries.par_iter().map(|q| self.search(q, params)).collect()
    }
}
