//! Acceptance gate: runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsetsearch::bundle::{save_bundle, storage_report};
use vsetsearch::centroid_ann::{AnnMode, CentroidSims};
use vsetsearch::eval::{evaluate, oracle_topk, GroundTruth, Workload};
use vsetsearch::exact_matching::{brute_force_matching, max_cardinality_max_weight, Edge, ThresholdBipartiteGraph};
use vsetsearch::mwmto::{bounds_from_table, brute_force_mwmto, mwmto_from_table, BoundPair, PartitionSimTable};
use vsetsearch::partition_index::{partition_set, CentroidRef, DispersionBranch, PartitionConfig, PartitionMode};
use vsetsearch::pipeline::{BuildConfig, Index, SearchParams};
use vsetsearch::pruning::{
    base_prune, brute_force_top_m, enhanced_prune_with, BoundedCandidate, Depq, EnhancedOptions, Pruner, Resolved,
};
use vsetsearch::quantizer::{CentroidId, Codebook};
use vsetsearch::refinement::{RefineParams, Refiner, VisitOutcome};
use vsetsearch::repository::{generate_synthetic, QueryTable, SetId, SyntheticConfig, VectorSet, Vectors};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_graph(rng: &mut ChaCha8Rng, max_side: usize, tau: f64) -> ThresholdBipartiteGraph {
    let l = rng.random_range(1..=max_side);
    let r = rng.random_range(1..=max_side);
    let density: f64 = rng.random_range(0.1..1.0);
    let mut edges = Vec::new();
    for i in 0..l {
        for j in 0..r {
            if rng.random_bool(density) {
                edges.push(Edge {
                    left: i as u32,
                    right: j as u32,
                    weight: rng.random_range(tau..=1.0),
                });
            }
        }
    }
    ThresholdBipartiteGraph::new(l, r, edges)
}

fn c1_exact_matching() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut n = 0;
    for &tau in &[0.3, 0.5, 0.7] {
        for _ in 0..334 {
            let g = random_graph(&mut rng, 7, tau);
            let fast = max_cardinality_max_weight(&g);
            let slow = brute_force_matching(&g).map_err(|e| e.to_string())?;
            if fast.cardinality != slow.cardinality || (fast.weight - slow.weight).abs() > 1e-9 {
                mismatches += 1;
            }
            n += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(mismatches == 0, || format!("{mismatches} of {n} instances disagree"))?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{n} instances, 0 mismatches, {secs:.2}s"))
}

fn c2_mwmto_sandwich() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = Vec::new();
    for i in 0..1000 {
        let nq = rng.random_range(1..=6);
        let ng = rng.random_range(1..=4);
        let caps: Vec<usize> = (0..ng).map(|_| rng.random_range(1..=3)).collect();
        let tau = 0.5;
        let rows = (0..nq)
            .map(|_| {
                let mut row = Vec::new();
                for g in 0..ng as u32 {
                    if rng.random_bool(0.6) {
                        row.push((g, rng.random_range(tau..=1.0)));
                    }
                }
                row
            })
            .collect();
        let table = PartitionSimTable { rows };
        let exact = mwmto_from_table(&table, &caps);
        let oracle = brute_force_mwmto(&table, &caps).map_err(|e| e.to_string())?;
        let b = bounds_from_table(&table, &caps, caps.iter().sum()).bounds;
        if exact.cardinality != oracle.cardinality || (exact.score - oracle.score).abs() > 1e-9 {
            violations.push(format!(
                "instance {i}: exact {} vs enumeration {}",
                exact.score, oracle.score
            ));
        }
        if !(b.lb <= exact.score + 1e-9 && exact.score <= b.ub + 1e-9) {
            violations.push(format!("instance {i}: {b:?} does not bracket {}", exact.score));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(violations.is_empty(), || {
        violations[..violations.len().min(3)].join("; ")
    })?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "1000 instances, LB <= exact <= UB, exact = enumeration, {secs:.2}s"
    ))
}

fn scored(scores: &[f64]) -> impl FnMut(&BoundedCandidate) -> vsetsearch::Result<Resolved<()>> + '_ {
    move |c| {
        Ok(Resolved {
            set_id: c.set_id,
            score: scores[c.set_id as usize],
            cardinality: 0,
            payload: (),
        })
    }
}

fn ids<T>(v: &[Resolved<T>]) -> Vec<SetId> {
    v.iter().map(|r| r.set_id).collect()
}

fn c3_pruning_lossless() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut weak_discards = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=500);
        let m = rng.random_range(1..=50);
        let spread: f64 = rng.random_range(0.0..0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(0.0..5.0);
                if rng.random_bool(0.2) {
                    s.round()
                } else {
                    s
                }
            })
            .collect();
        let cands: Vec<BoundedCandidate> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| BoundedCandidate {
                set_id: i as SetId,
                bounds: BoundPair::new(s - rng.random_range(0.0..=spread), s + rng.random_range(0.0..=spread)),
            })
            .collect();
        let bf = brute_force_top_m(&cands, m, scored(&scores)).map_err(|e| e.to_string())?;
        let base = base_prune(&cands, m, scored(&scores)).map_err(|e| e.to_string())?;
        let enh = enhanced_prune_with(&cands, m, EnhancedOptions { audit: true }, scored(&scores))
            .map_err(|e| e.to_string())?;
        if ids(&bf.top) != ids(&base.top) || ids(&bf.top) != ids(&enh.top) {
            mismatches += 1;
        }
        if enh.stats.min_discard_witnesses.is_some_and(|w| w < m) {
            weak_discards += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} of 500 instances disagree"))?;
    ensure(weak_discards == 0, || {
        format!("{weak_discards} discards lacked m witnesses")
    })?;
    Ok("500 instances, bf = base = enhanced, every pool discard had >= m witnesses".into())
}

struct DefaultRun {
    index: Index,
    queries: Vec<QueryTable>,
    truth: GroundTruth,
}

fn default_workload() -> DefaultRun {
    let (repo, queries) = Workload::default().materialize().expect("workload");
    let truth = GroundTruth::compute(&repo, &queries, 0.7).expect("truth");
    let index = Index::build(repo, &BuildConfig::default()).expect("index");
    DefaultRun { index, queries, truth }
}

fn c4_pruning_work(d: &DefaultRun) -> Outcome {
    let k = 10;
    let mut calls = HashMap::new();
    let mut lists = HashMap::new();
    for pruner in [Pruner::Base, Pruner::Enhanced] {
        let params = SearchParams {
            pruner,
            ..SearchParams::with_k(k)
        };
        let rs = d.index.search_batch(&d.queries, &params).map_err(|e| e.to_string())?;
        let mean = rs.iter().map(|r| r.diagnostics.score_calls() as f64).sum::<f64>() / rs.len() as f64;
        calls.insert(pruner, mean);
        lists.insert(pruner, rs.into_iter().map(|r| r.hits).collect::<Vec<_>>());
    }
    let (b, e) = (calls[&Pruner::Base], calls[&Pruner::Enhanced]);
    ensure(lists[&Pruner::Base] == lists[&Pruner::Enhanced], || {
        "base and enhanced results differ".into()
    })?;
    ensure(e <= 0.9 * b, || format!("enhanced {e:.1} vs base {b:.1} score calls"))?;
    Ok(format!(
        "mean score calls enhanced {e:.1} vs base {b:.1} (ratio {:.3})",
        e / b
    ))
}

fn c5_pipeline_exactness() -> Outcome {
    let w = Workload {
        synthetic: SyntheticConfig {
            n_sets: 500,
            ..Workload::default().synthetic
        },
        ..Workload::default()
    };
    let (repo, queries) = w.materialize().map_err(|e| e.to_string())?;
    let n = repo.len();
    let cfg = BuildConfig {
        partition_mode: PartitionMode::Single,
        ..BuildConfig::default()
    };
    let index = Index::build(repo, &cfg).map_err(|e| e.to_string())?;
    let k = 10;
    let params = SearchParams {
        phi_c: index.n_centroids(),
        phi_ref: n,
        phi_r: n,
        ..SearchParams::with_k(k)
    };
    let mut mismatches = 0;
    for q in &queries {
        let got: Vec<SetId> = index
            .search(q, &params)
            .map_err(|e| e.to_string())?
            .hits
            .iter()
            .map(|h| h.set_id)
            .collect();
        let want: Vec<SetId> = oracle_topk(q, &index.repo, params.tau, k)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|r| r.set_id)
            .collect();
        if got != want {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || {
        format!("{mismatches} of {} queries differ", queries.len())
    })?;
    Ok(format!(
        "{} queries on {n} sets, top-{k} identical to the oracle",
        queries.len()
    ))
}

fn c6_recall_monotone(d: &DefaultRun) -> Outcome {
    let k = 10;
    let mut curve = Vec::new();
    for mult in [1, 2, 3, 5, 10] {
        let params = SearchParams {
            phi_ref: mult * k,
            phi_r: (3 * k).min(mult * k),
            ..SearchParams::with_k(k)
        };
        let e = evaluate(&d.index, &d.queries, &d.truth, &params).map_err(|e| e.to_string())?;
        curve.push((mult, e.mean_recall));
    }
    let text = curve
        .iter()
        .map(|(m, r)| format!("{m}k:{r:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure(curve.windows(2).all(|w| w[1].1 >= w[0].1), || {
        format!("not monotone: {text}")
    })?;
    ensure(curve.last().unwrap().1 >= 0.9, || {
        format!("recall at 10k below 0.9: {text}")
    })?;
    Ok(format!("{} queries, recall@10 {text}", d.queries.len()))
}

fn c7_depq_model() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut q = Depq::new();
    let mut model: Vec<BoundedCandidate> = Vec::new();
    let mut next_id: SetId = 0;
    let ops = 100_000;
    let mut peak = 1usize;
    let key_max = |v: &[BoundedCandidate]| {
        v.iter()
            .copied()
            .max_by(|a, b| a.bounds.ub.total_cmp(&b.bounds.ub).then(b.set_id.cmp(&a.set_id)))
    };
    let key_min = |v: &[BoundedCandidate], ub: bool| {
        v.iter().copied().min_by(|a, b| {
            let (x, y) = if ub {
                (a.bounds.ub, b.bounds.ub)
            } else {
                (a.bounds.lb, b.bounds.lb)
            };
            x.total_cmp(&y).then(a.set_id.cmp(&b.set_id))
        })
    };
    for step in 0..ops {
        let op = rng.random_range(0..100);
        let fail = |what: &str| format!("step {step}: {what} diverged from the model");
        if op < 40 || model.is_empty() {
            let lb = (rng.random_range(0..50) as f64) / 10.0;
            let ub = lb + (rng.random_range(0..30) as f64) / 10.0;
            let c = BoundedCandidate {
                set_id: next_id,
                bounds: BoundPair::new(lb, ub),
            };
            next_id += 1;
            q.insert(c).map_err(|e| e.to_string())?;
            model.push(c);
        } else if op < 55 {
            let want = key_max(&model);
            model.retain(|c| Some(c.set_id) != want.map(|w| w.set_id));
            ensure(q.extract_max_ub() == want, || fail("extract_max_ub"))?;
        } else if op < 65 {
            ensure(q.min_lb() == key_min(&model, false), || fail("min_lb"))?;
        } else if op < 75 {
            ensure(q.min_ub() == key_min(&model, true), || fail("min_ub"))?;
        } else if op < 85 {
            let want = key_min(&model, true);
            model.retain(|c| Some(c.set_id) != want.map(|w| w.set_id));
            ensure(q.pop_min_ub() == want, || fail("pop_min_ub"))?;
        } else if op < 97 {
            let victim = model.swap_remove(rng.random_range(0..model.len()));
            ensure(q.remove(victim.set_id).ok() == Some(victim), || fail("remove"))?;
        } else {
            ensure(q.remove(next_id + 1).is_err(), || fail("remove of unknown id"))?;
        }
        ensure(q.len() == model.len(), || fail("live count"))?;
        peak = peak.max(model.len());
    }
    while let Some(c) = q.extract_max_ub() {
        let want = key_max(&model).expect("model not empty");
        model.retain(|m| m.set_id != want.set_id);
        ensure(c == want, || "final drain diverged".into())?;
    }
    ensure(model.is_empty(), || "model retains elements".into())?;
    let sifts = q.counters().sifts as f64;
    let budget = 8.0 * ops as f64 * (peak as f64).log2().max(1.0);
    ensure(sifts <= budget, || format!("{sifts} sift steps exceed {budget:.0}"))?;
    Ok(format!(
        "{ops} ops match the model; {sifts} sift steps = {:.2} per op per log2(n={peak})",
        sifts / ops as f64 / (peak as f64).log2()
    ))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c8_determinism_compression(d: &DefaultRun) -> Outcome {
    let (repo, _) = Workload::default().materialize().map_err(|e| e.to_string())?;
    let cfg = BuildConfig {
        centroid_graph: Some(true),
        ..BuildConfig::default()
    };
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    for dir in [a.path(), b.path()] {
        let idx = Index::build(repo.clone(), &cfg).map_err(|e| e.to_string())?;
        save_bundle(&idx, dir).map_err(|e| e.to_string())?;
    }
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    ensure(fa == fb, || "bundles differ".into())?;
    let s = storage_report(&d.index);
    ensure(s.ratio() < 0.6, || format!("quantized/raw = {:.3}", s.ratio()))?;
    Ok(format!(
        "{} bundle files byte-identical; quantized {} B vs raw {} B (ratio {:.3})",
        fa.len(),
        s.quantized_bytes(),
        s.raw_vector_bytes,
        s.ratio()
    ))
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn c9_partition_postconditions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = 16;
    let n_c = 32;
    let rows: Vec<Vec<f32>> = (0..n_c).map(|_| unit(&mut rng, dim)).collect();
    let cb = Codebook {
        centroids: Vectors::from_rows(dim, &rows).unwrap(),
        train_seed: 0,
    };
    let config = PartitionConfig::default();
    let mut branches: HashMap<DispersionBranch, usize> = HashMap::new();
    let mut violations = Vec::new();
    for s in 0..1000u32 {
        let n = rng.random_range(2..=24);
        let distinct = rng.random_range(1..=n.min(n_c));
        let mut pool: Vec<usize> = (0..n_c).collect();
        for i in 0..distinct {
            let j = rng.random_range(i..n_c);
            pool.swap(i, j);
        }
        let chosen = &pool[..distinct];
        let mut data = Vec::new();
        for i in 0..n {
            let c = if i < distinct {
                chosen[i]
            } else {
                chosen[rng.random_range(0..distinct)]
            };
            let noise = unit(&mut rng, dim);
            let v: Vec<f32> = rows[c].iter().zip(&noise).map(|(a, b)| a + 0.05 * b).collect();
            let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            data.extend(v.into_iter().map(|x| x / norm));
        }
        let set = VectorSet {
            set_id: s,
            vectors: Vectors::new(dim, data).unwrap(),
        };
        let owners: Vec<CentroidId> = set.vectors.rows().map(|v| cb.nearest(v)).collect();
        let p = partition_set(&set, &owners, &cb, &config).map_err(|e| e.to_string())?;
        *branches.entry(p.branch).or_default() += 1;
        let mut bad = |m: String| violations.push(format!("set {s} ({:?}): {m}", p.branch));
        if let Err(m) = p.validate(n, n_c) {
            bad(m);
            continue;
        }
        if p.capacities().iter().sum::<usize>() != n {
            bad("capacities do not sum to the set size".into());
        }
        if p.branch != DispersionBranch::Low {
            for g in &p.groups {
                let mut owned: Vec<CentroidRef> = g
                    .members
                    .iter()
                    .map(|&m| CentroidRef::Global(owners[m as usize]))
                    .collect();
                owned.sort();
                owned.dedup();
                let mut listed = g.centroids.clone();
                listed.sort();
                if owned != listed {
                    bad(format!("group {} capacity disagrees with its centroids", g.group_id));
                }
            }
        }
        match p.branch {
            DispersionBranch::Middle => {
                let mut distinct_owners = owners.clone();
                distinct_owners.sort_unstable();
                distinct_owners.dedup();
                let unchanged =
                    p.groups.len() == distinct_owners.len() && p.groups.iter().all(|g| g.centroids.len() == 1);
                if !unchanged {
                    bad("middle-branch grouping changed".into());
                }
            }
            DispersionBranch::High => {
                let rho = p.groups.len() as f64 / n as f64;
                if !(rho < config.rho_high || p.groups.len() == 1) {
                    bad(format!("merging stopped at dispersion {rho:.3}"));
                }
            }
            DispersionBranch::Low => {
                if p.groups
                    .iter()
                    .any(|g| !matches!(g.centroids[..], [CentroidRef::Cascade(_)]))
                {
                    bad("low-branch group without a single cascade centroid".into());
                }
            }
            DispersionBranch::Single => bad("single branch in adaptive mode".into()),
        }
    }
    let count = |b| branches.get(&b).copied().unwrap_or(0);
    let (lo, mid, hi) = (
        count(DispersionBranch::Low),
        count(DispersionBranch::Middle),
        count(DispersionBranch::High),
    );
    ensure(violations.is_empty(), || {
        format!("{} violations, e.g. {}", violations.len(), violations[0])
    })?;
    ensure(lo >= 50 && mid >= 50 && hi >= 50, || {
        format!("branch coverage low={lo} middle={mid} high={hi}")
    })?;
    Ok(format!("1000 sets (low {lo}, middle {mid}, high {hi}), 0 violations"))
}

fn c10_refinement_bookkeeping() -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    for seed in 0..20u64 {
        let syn = generate_synthetic(&SyntheticConfig {
            n_sets: 30,
            cols_min: 1,
            cols_max: 8,
            dim: 8,
            n_topics: 5,
            noise: 0.4,
            seed,
        })
        .map_err(|e| e.to_string())?;
        let queries = syn.sample_queries(5, 1, 6, seed + 100).map_err(|e| e.to_string())?;
        let cfg = BuildConfig {
            n_centroids: Some(6),
            seed,
            ..BuildConfig::default()
        };
        let index = Index::build(syn.repo, &cfg).map_err(|e| e.to_string())?;
        let refiner = Refiner {
            codebook: &index.codebook,
            graph: None,
            inverted: &index.inverted,
        };
        for q in &queries {
            let sims = CentroidSims::compute(&q.vectors, &index.codebook);
            for (phi_c, mark) in [(1, true), (3, true), (6, true), (6, false)] {
                let params = RefineParams {
                    phi_c,
                    phi_ref: 30,
                    ann_mode: AnnMode::Exact,
                    ef_search: 64,
                    mark_visited_on_block: mark,
                };
                let (_, trace, state) = refiner
                    .refine_traced(&q.vectors, &sims, &params)
                    .map_err(|e| e.to_string())?;
                checked += 1;
                if trace.drained.windows(2).any(|w| w[1].sim > w[0].sim) {
                    violations.push(format!("seed {seed}: drain order increased"));
                }
                let mut increments: HashMap<(SetId, u32), usize> = HashMap::new();
                let mut accepted_sum: HashMap<SetId, f64> = HashMap::new();
                for v in &trace.visits {
                    if v.outcome == VisitOutcome::Accepted {
                        let ev = trace.drained[v.event];
                        *increments.entry((v.set_id, ev.query)).or_default() += 1;
                        *accepted_sum.entry(v.set_id).or_default() += ev.sim;
                    }
                }
                if increments.values().any(|&c| c > 1) {
                    violations.push(format!("seed {seed}: a (set, query vector) pair scored twice"));
                }
                for (&set, st) in &state.sets {
                    let len = index.repo.set(set).unwrap().len();
                    if st.used.iter().any(|&(c, u)| u > index.weights.weight(set, c)) {
                        violations.push(format!("seed {seed}: set {set} used beyond its centroid weight"));
                    }
                    let total: u32 = st.used.iter().map(|e| e.1).sum();
                    if total as usize > q.len().min(len) {
                        violations.push(format!("seed {seed}: set {set} consumed {total} slots"));
                    }
                    let want = accepted_sum.get(&set).copied().unwrap_or(0.0);
                    if (st.score - want).abs() > 1e-9 {
                        violations.push(format!("seed {seed}: set {set} score drifted"));
                    }
                }
            }
        }
    }
    ensure(violations.is_empty(), || {
        format!("{} violations, e.g. {}", violations.len(), violations[0])
    })?;
    Ok(format!("{checked} traced runs, 0 violations"))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("acceptance {id:>2} {name}: PASS ({detail}) [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("acceptance {id:>2} {name}: FAIL ({detail}) [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let d = default_workload();
    let results = [
        run(1, "exact matching vs enumeration", c1_exact_matching),
        run(2, "many-to-one bounds sandwich", c2_mwmto_sandwich),
        run(3, "pruning losslessness", c3_pruning_lossless),
        run(4, "pruning work reduction", || c4_pruning_work(&d)),
        run(5, "pipeline exactness limit", c5_pipeline_exactness),
        run(6, "recall monotone in phi_ref", || c6_recall_monotone(&d)),
        run(7, "DEPQ model equivalence", c7_depq_model),
        run(8, "bundle determinism and compression", || {
            c8_determinism_compression(&d)
        }),
        run(9, "partition post-conditions", c9_partition_postconditions),
        run(10, "refinement bookkeeping", c10_refinement_bookkeeping),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
