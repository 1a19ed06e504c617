//! Many-to-one thresholded matching of query vectors onto a set's partition
//! groups, where group `k` accepts at most `|S_k|` query vectors.

use serde::{Deserialize, Serialize};

use crate::centroid_ann::CentroidSims;
use crate::error::{Error, Result};
use crate::exact_matching::{augment_to_maximum, check_tau, max_cardinality_max_weight, Edge, ThresholdBipartiteGraph};
use crate::partition_index::{CentroidRef, PartitionSet};
use crate::quantizer::Codebook;
use crate::repository::{dot, Vectors};

/// Tolerance used when comparing bounds with resolved scores.
pub const BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lb: f64,
    pub ub: f64,
}

impl BoundPair {
    pub fn new(lb: f64, ub: f64) -> Self {
        Self { lb, ub }
    }

    pub fn exact(score: f64) -> Self {
        Self { lb: score, ub: score }
    }

    pub fn is_valid(&self) -> bool {
        self.lb <= self.ub + BOUND_EPS
    }

    pub fn contains(&self, score: f64) -> bool {
        self.lb - BOUND_EPS <= score && score <= self.ub + BOUND_EPS
    }
}

/// Per query vector, the groups it can reach at threshold `τ` with the best
/// centroid similarity inside each group. Rows are sorted by group id.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSimTable {
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl PartitionSimTable {
    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn n_queries(&self) -> usize {
        self.rows.len()
    }
}

/// Thresholded group similarities. `global` supplies precomputed inner
/// products against the codebook; cascade centroids are scored directly.
pub fn partition_sims(
    q: &Vectors,
    pset: &PartitionSet,
    cb: &Codebook,
    tau: f64,
    global: Option<&CentroidSims>,
) -> Result<PartitionSimTable> {
    check_tau(tau)?;
    if q.dim() != cb.dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            found: q.dim(),
        });
    }
    let rows = q
        .rows()
        .enumerate()
        .map(|(qi, v)| {
            pset.groups
                .iter()
                .filter_map(|g| {
                    let best = g
                        .centroids
                        .iter()
                        .map(|&r| match (r, global) {
                            (CentroidRef::Global(c), Some(s)) => s.get(qi, c),
                            _ => dot(v, pset.centroid(cb, r)),
                        })
                        .fold(f64::NEG_INFINITY, f64::max);
                    (best >= tau).then_some((g.group_id, best))
                })
                .collect()
        })
        .collect();
    Ok(PartitionSimTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwmtoResult {
    pub score: f64,
    pub cardinality: usize,
    /// Group serving each query vector, if any.
    pub assignment: Vec<Option<u32>>,
}

impl MwmtoResult {
    /// Checks capacities and that every assigned pair is a table entry.
    pub fn check_feasible(&self, table: &PartitionSimTable, caps: &[usize]) -> Result<(), String> {
        let mut load = vec![0usize; caps.len()];
        let mut weight = 0.0;
        for (qi, a) in self.assignment.iter().enumerate() {
            if let Some(g) = *a {
                let w = table.rows[qi]
                    .iter()
                    .find(|e| e.0 == g)
                    .ok_or_else(|| format!("query {qi} assigned to unreachable group {g}"))?
                    .1;
                weight += w;
                load[g as usize] += 1;
            }
        }
        if let Some(g) = (0..caps.len()).find(|&g| load[g] > caps[g]) {
            return Err(format!("group {g} over capacity: {} > {}", load[g], caps[g]));
        }
        if (weight - self.score).abs() > 1e-9 {
            return Err(format!("reported score {} but pairs sum to {weight}", self.score));
        }
        Ok(())
    }
}

/// Exact maximum-cardinality, maximum-weight many-to-one matching. Each group
/// is expanded into `min(cap, |Q|)` identical right nodes.
pub fn mwmto_from_table(table: &PartitionSimTable, caps: &[usize]) -> MwmtoResult {
    let nq = table.n_queries();
    let mut first_copy = Vec::with_capacity(caps.len() + 1);
    let mut owner = Vec::new();
    first_copy.push(0);
    for (g, &cap) in caps.iter().enumerate() {
        for _ in 0..cap.min(nq) {
            owner.push(g as u32);
        }
        first_copy.push(owner.len());
    }
    let mut edges = Vec::new();
    for (qi, row) in table.rows.iter().enumerate() {
        for &(g, w) in row {
            for copy in first_copy[g as usize]..first_copy[g as usize + 1] {
                edges.push(Edge {
                    left: qi as u32,
                    right: copy as u32,
                    weight: w,
                });
            }
        }
    }
    let m = max_cardinality_max_weight(&ThresholdBipartiteGraph::new(nq, owner.len(), edges));
    let mut assignment = vec![None; nq];
    for &(l, r) in &m.pairs {
        assignment[l as usize] = Some(owner[r as usize]);
    }
    MwmtoResult {
        score: m.weight,
        cardinality: m.cardinality,
        assignment,
    }
}

pub fn mwmto_exact(q: &Vectors, pset: &PartitionSet, cb: &Codebook, tau: f64) -> Result<MwmtoResult> {
    let table = partition_sims(q, pset, cb, tau, None)?;
    Ok(mwmto_from_table(&table, &pset.capacities()))
}

/// Bounds on the exact score plus the feasible assignment realizing the lower
/// bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MwmtoBounds {
    pub bounds: BoundPair,
    pub lb_assignment: Vec<Option<u32>>,
}

/// Lower bound: query vectors in order each take their best group with spare
/// capacity (ties to the lower group id), then the assignment is grown to
/// maximum cardinality so it competes with the exact objective on equal terms.
/// Upper bound: the `min(|Q|, set_len)` largest entries of the whole table.
pub fn bounds_from_table(table: &PartitionSimTable, caps: &[usize], set_len: usize) -> MwmtoBounds {
    let nq = table.n_queries();
    let mut remaining = caps.to_vec();
    let mut assign = vec![None; nq];
    let mut pool = Vec::new();
    for (qi, row) in table.rows.iter().enumerate() {
        let mut sorted = row.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if let Some(&(g, _)) = sorted.iter().find(|e| remaining[e.0 as usize] > 0) {
            remaining[g as usize] -= 1;
            assign[qi] = Some(g);
        }
        pool.extend(row.iter().map(|e| e.1));
    }
    augment_to_maximum(&table.rows, caps, &mut assign);
    let lb = assign
        .iter()
        .enumerate()
        .filter_map(|(qi, a)| a.map(|g| table.rows[qi].iter().find(|e| e.0 == g).expect("table entry").1))
        .sum();
    pool.sort_by(|a, b| b.total_cmp(a));
    let ub = pool.into_iter().take(nq.min(set_len)).sum();
    MwmtoBounds {
        bounds: BoundPair { lb, ub },
        lb_assignment: assign,
    }
}

pub fn bounds_for_mwmto(
    q: &Vectors,
    pset: &PartitionSet,
    set_len: usize,
    cb: &Codebook,
    tau: f64,
) -> Result<MwmtoBounds> {
    let table = partition_sims(q, pset, cb, tau, None)?;
    Ok(bounds_from_table(&table, &pset.capacities(), set_len))
}

/// Largest query count accepted by [`brute_force_mwmto`].
pub const BRUTE_FORCE_MAX_QUERIES: usize = 8;

/// Enumerates every capacity-respecting assignment; keeps the lexicographic
/// maximum of (cardinality, weight).
pub fn brute_force_mwmto(table: &PartitionSimTable, caps: &[usize]) -> Result<MwmtoResult> {
    let nq = table.n_queries();
    if nq > BRUTE_FORCE_MAX_QUERIES {
        return Err(Error::InvalidParameter(format!(
            "brute force needs <= {BRUTE_FORCE_MAX_QUERIES} query vectors, got {nq}"
        )));
    }
    fn go(
        qi: usize,
        table: &PartitionSimTable,
        left: &mut [usize],
        cur: &mut Vec<Option<u32>>,
        card: usize,
        weight: f64,
        best: &mut MwmtoResult,
    ) {
        if qi == table.rows.len() {
            if card > best.cardinality || (card == best.cardinality && weight > best.score) {
                *best = MwmtoResult {
                    score: weight,
                    cardinality: card,
                    assignment: cur.clone(),
                };
            }
            return;
        }
        cur.push(None);
        go(qi + 1, table, left, cur, card, weight, best);
        cur.pop();
        for &(g, w) in &table.rows[qi] {
            if left[g as usize] > 0 {
                left[g as usize] -= 1;
                cur.push(Some(g));
                go(qi + 1, table, left, cur, card + 1, weight + w, best);
                cur.pop();
                left[g as usize] += 1;
            }
        }
    }
    let mut best = MwmtoResult {
        score: 0.0,
        cardinality: 0,
        assignment: vec![None; nq],
    };
    go(
        0,
        table,
        &mut caps.to_vec(),
        &mut Vec::with_capacity(nq),
        0,
        0.0,
        &mut best,
    );
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_matching::unionability;
    use crate::partition_index::{DispersionBranch, PartitionGroup};
    use proptest::prelude::*;

    fn table(rows: &[&[(u32, f64)]]) -> PartitionSimTable {
        PartitionSimTable {
            rows: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    fn codebook(rows: &[Vec<f32>]) -> Codebook {
        Codebook {
            centroids: Vectors::from_rows(rows[0].len(), rows).unwrap(),
            train_seed: 0,
        }
    }

    #[test]
    fn group_sim_is_max_over_its_centroids() {
        // c2 = (0.4, ..) and c3 = (0.75, ..) against v_q = e0.
        let cb = codebook(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.4, 0.9], vec![0.75, 0.6]]);
        let pset = PartitionSet {
            set_id: 0,
            groups: vec![PartitionGroup {
                group_id: 0,
                centroids: vec![CentroidRef::Global(2), CentroidRef::Global(3)],
                members: vec![0, 1],
            }],
            cascade_centroids: Vectors::new(2, vec![]).unwrap(),
            branch: DispersionBranch::High,
        };
        let q = Vectors::from_rows(2, &[[1.0f32, 0.0], [0.0, 1.0]]).unwrap();
        let t = partition_sims(&q, &pset, &cb, 0.5, None).unwrap();
        assert_eq!(t.rows[0], vec![(0, 0.75f32 as f64)]);
        // Second row: max(0.9, 0.6) = 0.9.
        assert_eq!(t.rows[1], vec![(0, 0.9f32 as f64)]);
        let strict = partition_sims(&q, &pset, &cb, 0.95, None).unwrap();
        assert!(strict.is_empty());
        let cached = CentroidSims::compute(&q, &cb);
        assert_eq!(partition_sims(&q, &pset, &cb, 0.5, Some(&cached)).unwrap(), t);
    }

    #[test]
    fn capacity_one_keeps_the_better_vector() {
        let t = table(&[&[(0, 0.9)], &[(0, 0.8)]]);
        let r = mwmto_from_table(&t, &[1]);
        assert_eq!(r.cardinality, 1);
        assert!((r.score - 0.9).abs() < 1e-12);
        assert_eq!(r.assignment, vec![Some(0), None]);
        let b = bounds_from_table(&t, &[1], 1);
        assert!((b.bounds.lb - 0.9).abs() < 1e-12);
        // UB pools 0.9 and 0.8 when the set is larger than the capacity hit.
        let b2 = bounds_from_table(&t, &[1], 2);
        assert!((b2.bounds.ub - 1.7).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_capacities_take_row_maxima() {
        let t = table(&[&[(0, 0.9), (1, 0.7)], &[(0, 0.95), (1, 0.6)], &[(1, 0.8)]]);
        let r = mwmto_from_table(&t, &[3, 3]);
        assert!((r.score - (0.9 + 0.95 + 0.8)).abs() < 1e-12);
        let b = bounds_from_table(&t, &[3, 3], 6);
        assert!((b.bounds.lb - r.score).abs() < 1e-12);
        assert!(b.bounds.ub >= r.score);
    }

    #[test]
    fn cardinality_beats_weight() {
        // Greedy takes (q0, g0) = 0.95 and leaves q1 stranded; the optimum
        // matches both.
        let t = table(&[&[(0, 0.95), (1, 0.5)], &[(0, 0.9)]]);
        let r = mwmto_from_table(&t, &[1, 1]);
        assert_eq!(r.cardinality, 2);
        assert!((r.score - 1.4).abs() < 1e-12);
        let b = bounds_from_table(&t, &[1, 1], 2);
        assert!(b.bounds.lb <= r.score + 1e-12);
        assert!((b.bounds.lb - 1.4).abs() < 1e-12);
    }

    #[test]
    fn empty_table_bounds() {
        let t = table(&[&[], &[]]);
        let b = bounds_from_table(&t, &[2], 2);
        assert_eq!(b.bounds, BoundPair::new(0.0, 0.0));
        assert_eq!(mwmto_from_table(&t, &[2]).cardinality, 0);
    }

    fn arb_instance() -> impl Strategy<Value = (PartitionSimTable, Vec<usize>)> {
        (1usize..=6, 1usize..=4).prop_flat_map(|(nq, ng)| {
            let caps = prop::collection::vec(1usize..=3, ng);
            let rows = prop::collection::vec(prop::collection::vec(prop::option::of(0.3f64..1.0), ng), nq);
            (rows, caps).prop_map(|(rows, caps)| {
                let rows = rows
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .enumerate()
                            .filter_map(|(g, w)| w.map(|w| (g as u32, w)))
                            .collect()
                    })
                    .collect();
                (PartitionSimTable { rows }, caps)
            })
        })
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration_and_is_bracketed((t, caps) in arb_instance()) {
            let exact = mwmto_from_table(&t, &caps);
            let oracle = brute_force_mwmto(&t, &caps).unwrap();
            prop_assert_eq!(exact.cardinality, oracle.cardinality);
            prop_assert!((exact.score - oracle.score).abs() < 1e-9);
            prop_assert!(exact.check_feasible(&t, &caps).is_ok());
            let set_len: usize = caps.iter().sum();
            let b = bounds_from_table(&t, &caps, set_len);
            prop_assert!(b.bounds.lb <= exact.score + 1e-9);
            prop_assert!(exact.score <= b.bounds.ub + 1e-9);
            let lb = MwmtoResult { score: b.bounds.lb, cardinality: 0, assignment: b.lb_assignment.clone() };
            prop_assert!(lb.check_feasible(&t, &caps).is_ok());
        }

        #[test]
        fn upper_bound_shrinks_with_tau((t, caps) in arb_instance(), lo in 0.3f64..0.6, hi in 0.6f64..1.0) {
            let filter = |tau: f64| PartitionSimTable {
                rows: t.rows.iter().map(|r| r.iter().copied().filter(|e| e.1 >= tau).collect()).collect(),
            };
            let n: usize = caps.iter().sum();
            let a = bounds_from_table(&filter(lo), &caps, n).bounds.ub;
            let b = bounds_from_table(&filter(hi), &caps, n).bounds.ub;
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn singleton_unit_groups_reduce_to_unionability(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dim = 3;
            let mut unit = |n: usize| {
                let rows: Vec<Vec<f32>> = (0..n)
                    .map(|_| {
                        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(0.0f32..1.0)).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt().max(1e-3);
                        v.into_iter().map(|x| x / norm).collect()
                    })
                    .collect();
                Vectors::from_rows(dim, &rows).unwrap()
            };
            let q = unit(4);
            let cents = unit(5);
            let cb = Codebook { centroids: cents.clone(), train_seed: 0 };
            let pset = PartitionSet {
                set_id: 0,
                groups: (0..5)
                    .map(|g| PartitionGroup { group_id: g, centroids: vec![CentroidRef::Global(g)], members: vec![g] })
                    .collect(),
                cascade_centroids: Vectors::new(dim, vec![]).unwrap(),
                branch: DispersionBranch::Middle,
            };
            let tau = 0.8;
            let m = mwmto_exact(&q, &pset, &cb, tau).unwrap();
            let u = unionability(&q, &cents, tau).unwrap();
            prop_assert_eq!(m.cardinality, u.cardinality);
            prop_assert!((m.score - u.weight).abs() < 1e-9);
        }
    }
}
