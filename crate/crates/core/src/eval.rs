//! Ground truth by exhaustive exact matching, recall, and the parameter-sweep
//! benchmark.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{storage_report, StorageReport};
use crate::error::{Error, Result};
use crate::exact_matching::{check_tau, unionability};
use crate::pipeline::{BuildConfig, Index, SearchParams, DEFAULT_TAU};
use crate::pruning::Pruner;
use crate::repository::{
    generate_synthetic, ingest_queries, ingest_repository, QueryTable, SetId, SyntheticConfig, VectorSetRepository,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedSet {
    pub set_id: SetId,
    pub score: f64,
    pub cardinality: usize,
}

/// Exact unionability of the query against every set, best first, ordered
/// by (score, cardinality, lower id).
pub fn oracle_ranking(q: &QueryTable, repo: &VectorSetRepository, tau: f64) -> Result<Vec<RankedSet>> {
    check_tau(tau)?;
    q.check_dim(repo.dim())?;
    let mut all = repo
        .sets()
        .par_iter()
        .map(|s| {
            let m = unionability(&q.vectors, &s.vectors, tau)?;
            Ok(RankedSet {
                set_id: s.set_id,
                score: m.weight,
                cardinality: m.cardinality,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    all.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.cardinality.cmp(&a.cardinality))
            .then(a.set_id.cmp(&b.set_id))
    });
    Ok(all)
}

pub fn oracle_topk(q: &QueryTable, repo: &VectorSetRepository, tau: f64, k: usize) -> Result<Vec<RankedSet>> {
    let mut all = oracle_ranking(q, repo, tau)?;
    all.truncate(k);
    Ok(all)
}

/// `|retrieved ∩ truth| / |truth|`.
pub fn recall(retrieved: &[SetId], truth: &[SetId]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidParameter("recall needs a non-empty ground truth".into()));
    }
    let hit = truth.iter().filter(|t| retrieved.contains(t)).count();
    Ok(hit as f64 / truth.len() as f64)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over the dimension, set sizes and vector bytes.
pub fn repo_hash(repo: &VectorSetRepository) -> String {
    let mut h = Sha256::new();
    h.update((repo.dim() as u64).to_le_bytes());
    for s in repo.sets() {
        h.update((s.len() as u64).to_le_bytes());
        for x in s.vectors.as_slice() {
            h.update(x.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn queries_hash(queries: &[QueryTable]) -> String {
    let mut h = Sha256::new();
    for q in queries {
        h.update((q.len() as u64).to_le_bytes());
        for x in q.vectors.as_slice() {
            h.update(x.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

/// Full exact rankings for a batch of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub repo_hash: String,
    pub queries_hash: String,
    pub tau: f64,
    pub rankings: Vec<Vec<RankedSet>>,
}

impl GroundTruth {
    pub fn compute(repo: &VectorSetRepository, queries: &[QueryTable], tau: f64) -> Result<Self> {
        let rankings = queries
            .iter()
            .map(|q| oracle_ranking(q, repo, tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            repo_hash: repo_hash(repo),
            queries_hash: queries_hash(queries),
            tau,
            rankings,
        })
    }

    pub fn top_ids(&self, query: usize, k: usize) -> Vec<SetId> {
        self.rankings[query].iter().take(k).map(|r| r.set_id).collect()
    }

    pub fn file_name(repo_hash: &str, queries_hash: &str, tau: f64) -> String {
        format!("truth-{}-{}-tau{tau}.json", &repo_hash[..16], &queries_hash[..16])
    }

    /// Loads cached truth from `dir` when its keys match, otherwise computes
    /// and stores it.
    pub fn load_or_compute(dir: &Path, repo: &VectorSetRepository, queries: &[QueryTable], tau: f64) -> Result<Self> {
        let (rh, qh) = (repo_hash(repo), queries_hash(queries));
        let path = dir.join(Self::file_name(&rh, &qh, tau));
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(t) = serde_json::from_str::<GroundTruth>(&text) {
                if t.repo_hash == rh && t.queries_hash == qh && t.tau == tau && t.rankings.len() == queries.len() {
                    return Ok(t);
                }
            }
        }
        let t = Self::compute(repo, queries, tau)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let text = serde_json::to_string(&t).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query: usize,
    pub recall: f64,
    pub score_calls: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_query: Vec<QueryEval>,
    pub mean_recall: f64,
    pub mean_score_calls: f64,
}

/// Recall@k of the pipeline against the truth, queries run in parallel.
pub fn evaluate(
    index: &Index,
    queries: &[QueryTable],
    truth: &GroundTruth,
    params: &SearchParams,
) -> Result<EvalReport> {
    if truth.rankings.len() != queries.len() {
        return Err(Error::InvalidParameter(format!(
            "ground truth covers {} queries, got {}",
            truth.rankings.len(),
            queries.len()
        )));
    }
    if truth.tau != params.tau {
        return Err(Error::InvalidParameter(format!(
            "ground truth was computed at tau={}, search uses tau={}",
            truth.tau, params.tau
        )));
    }
    let per_query = queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let r = index.search(q, params)?;
            let got: Vec<SetId> = r.hits.iter().map(|h| h.set_id).collect();
            Ok(QueryEval {
                query: i,
                recall: recall(&got, &truth.top_ids(i, params.k))?,
                score_calls: r.diagnostics.score_calls(),
                latency_ms: r.diagnostics.timings.total_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_query.len().max(1) as f64;
    Ok(EvalReport {
        mean_recall: per_query.iter().map(|q| q.recall).sum::<f64>() / n,
        mean_score_calls: per_query.iter().map(|q| q.score_calls as f64).sum::<f64>() / n,
        per_query,
    })
}

/// Synthetic repository plus sampled queries used when no files are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub synthetic: SyntheticConfig,
    pub n_queries: usize,
    pub query_cols_min: usize,
    pub query_cols_max: usize,
    pub query_seed: u64,
}

impl Default for Workload {
    /// 2000 tables of 5–15 columns over 64 topics in 64 dimensions, 50 queries.
    fn default() -> Self {
        Self {
            synthetic: SyntheticConfig {
                n_sets: 2000,
                cols_min: 5,
                cols_max: 15,
                dim: 64,
                n_topics: 64,
                noise: 0.3,
                seed: 42,
            },
            n_queries: 50,
            query_cols_min: 3,
            query_cols_max: 10,
            query_seed: 4242,
        }
    }
}

impl Workload {
    pub fn materialize(&self) -> Result<(VectorSetRepository, Vec<QueryTable>)> {
        let syn = generate_synthetic(&self.synthetic)?;
        let queries = syn.sample_queries(
            self.n_queries,
            self.query_cols_min,
            self.query_cols_max,
            self.query_seed,
        )?;
        Ok((syn.repo, queries))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Repository manifest; the synthetic workload is used when unset.
    pub repository: Option<PathBuf>,
    /// Query manifest, one record per query; required with `repository`.
    pub queries: Option<PathBuf>,
    pub workload: Workload,
    pub build: BuildConfig,
    pub k: usize,
    pub tau: f64,
    pub phi_c: Vec<usize>,
    /// `φ_ref` values as multiples of `k`.
    pub phi_ref_multiples: Vec<usize>,
    /// `φ_r = min(phi_r_multiple · k, φ_ref)`.
    pub phi_r_multiple: usize,
    pub methods: Vec<Pruner>,
    pub warmup: usize,
    pub reps: usize,
    /// Where ground truth is cached; not cached when unset.
    pub truth_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repository: None,
            queries: None,
            workload: Workload::default(),
            build: BuildConfig::default(),
            k: 10,
            tau: DEFAULT_TAU,
            phi_c: vec![1, 2, 4, 8, 16, 32, 64],
            phi_ref_multiples: vec![1, 2, 3, 5, 10],
            phi_r_multiple: 3,
            methods: Pruner::all().to_vec(),
            warmup: 1,
            reps: 3,
            truth_dir: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.k == 0 {
            return bad("k must be >= 1");
        }
        if self.phi_c.is_empty() || self.phi_c.contains(&0) {
            return bad("phi_c grid must be non-empty with entries >= 1");
        }
        if self.phi_ref_multiples.is_empty() || self.phi_ref_multiples.contains(&0) {
            return bad("phi_ref grid must be non-empty with entries >= 1");
        }
        if self.phi_r_multiple == 0 {
            return bad("phi_r multiple must be >= 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.reps < 3 {
            return bad("reps must be >= 3");
        }
        if self.repository.is_some() != self.queries.is_some() {
            return bad("repository and queries must be given together");
        }
        self.build.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("bench config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Search parameters of one grid point.
    pub fn params(&self, method: Pruner, phi_c: usize, phi_ref_multiple: usize) -> SearchParams {
        let phi_ref = phi_ref_multiple * self.k;
        SearchParams {
            k: self.k,
            tau: self.tau,
            phi_c,
            phi_ref,
            phi_r: (self.phi_r_multiple * self.k).min(phi_ref),
            pruner: method,
            ..SearchParams::with_k(self.k)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Pruner,
    pub phi_c: usize,
    pub phi_ref: usize,
    pub phi_r: usize,
    pub recall: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub score_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub storage: StorageReport,
    pub build_ms: f64,
}

impl BenchReport {
    pub const COLUMNS: [&'static str; 8] = [
        "method",
        "phi_c",
        "phi_ref",
        "phi_r",
        "recall",
        "p50_ms",
        "p95_ms",
        "score_calls",
    ];

    /// Tab-separated table with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = Self::COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.4}\t{:.3}\t{:.3}\t{:.1}\n",
                r.method.name(),
                r.phi_c,
                r.phi_ref,
                r.phi_r,
                r.recall,
                r.p50_ms,
                r.p95_ms,
                r.score_calls
            ));
        }
        out
    }

    /// One JSON record per row.
    pub fn to_json_lines(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn load_workload(config: &BenchConfig) -> Result<(VectorSetRepository, Vec<QueryTable>)> {
    match (&config.repository, &config.queries) {
        (Some(r), Some(q)) => Ok((ingest_repository(r)?, ingest_queries(q)?)),
        _ => config.workload.materialize(),
    }
}

/// Sweeps the grid. Recall and score-call counts come from one pass over
/// the queries; latencies are the per-query median of `reps` timed runs after
/// `warmup` untimed ones, on a single worker thread.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let (repo, queries) = load_workload(config)?;
    let truth = match &config.truth_dir {
        Some(dir) => GroundTruth::load_or_compute(dir, &repo, &queries, config.tau)?,
        None => GroundTruth::compute(&repo, &queries, config.tau)?,
    };
    let t = Instant::now();
    let index = Index::build(repo, &config.build)?;
    let build_ms = t.elapsed().as_secs_f64() * 1e3;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for &phi_c in &config.phi_c {
        for &mult in &config.phi_ref_multiples {
            for &method in &config.methods {
                let params = config.params(method, phi_c, mult);
                let eval = evaluate(&index, &queries, &truth, &params)?;
                let latencies = single.install(|| -> Result<Vec<f64>> {
                    let mut per_query = Vec::with_capacity(queries.len());
                    for q in &queries {
                        for _ in 0..config.warmup {
                            index.search(q, &params)?;
                        }
                        let mut reps = Vec::with_capacity(config.reps);
                        for _ in 0..config.reps {
                            let t = Instant::now();
                            index.search(q, &params)?;
                            reps.push(t.elapsed().as_secs_f64() * 1e3);
                        }
                        per_query.push(median(&mut reps));
                    }
                    Ok(per_query)
                })?;
                rows.push(BenchRow {
                    method,
                    phi_c,
                    phi_ref: params.phi_ref,
                    phi_r: params.phi_r,
                    recall: eval.mean_recall,
                    p50_ms: quantile(&latencies, 0.5),
                    p95_ms: quantile(&latencies, 0.95),
                    score_calls: eval.mean_score_calls,
                });
            }
        }
    }
    Ok(BenchReport {
        rows,
        storage: storage_report(&index),
        build_ms,
    })
}
