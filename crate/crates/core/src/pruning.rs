//! Bound-driven top-m selection.
//!
//! Candidates carry `lb ≤ score ≤ ub`. Resolving a score is expensive, so the
//! selectors skip candidates that provably cannot enter the top-m. Ranking is
//! by score, then cardinality, then lower set id; all selectors share it, so
//! they return identical lists.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mwmto::{BoundPair, BOUND_EPS};
use crate::repository::SetId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedCandidate {
    pub set_id: SetId,
    pub bounds: BoundPair,
}

/// A candidate whose exact score has been computed.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved<T> {
    pub set_id: SetId,
    pub score: f64,
    pub cardinality: usize,
    pub payload: T,
}

impl<T> Resolved<T> {
    /// Total ranking order; `Greater` ranks first.
    pub fn rank_cmp(&self, other: &Resolved<T>) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.cardinality.cmp(&other.cardinality))
            .then(other.set_id.cmp(&self.set_id))
    }
}

/// Sorts best first.
pub fn sort_ranked<T>(v: &mut [Resolved<T>]) {
    v.sort_by(|a, b| b.rank_cmp(a));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pruner {
    #[serde(rename = "bf")]
    BruteForce,
    Base,
    Enhanced,
}

impl Pruner {
    pub fn name(self) -> &'static str {
        match self {
            Pruner::BruteForce => "bf",
            Pruner::Base => "base",
            Pruner::Enhanced => "enhanced",
        }
    }

    pub fn all() -> [Pruner; 3] {
        [Pruner::BruteForce, Pruner::Base, Pruner::Enhanced]
    }
}

impl std::str::FromStr for Pruner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bf" | "brute-force" => Ok(Pruner::BruteForce),
            "base" => Ok(Pruner::Base),
            "enhanced" => Ok(Pruner::Enhanced),
            other => Err(Error::InvalidParameter(format!("unknown pruner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepqCounters {
    pub inserts: u64,
    pub extracts: u64,
    pub removes: u64,
    /// Parent/child steps taken while restoring heap order, over all views.
    pub sifts: u64,
    /// Stale entries popped from the lazy views.
    pub purged: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneStats {
    pub candidates: usize,
    pub score_calls: usize,
    pub bound_checks: usize,
    pub discarded: usize,
    pub evicted: usize,
    pub drained: usize,
    pub depq: DepqCounters,
    /// Smallest number of pool members whose lower bound reached a
    /// discarded candidate's upper bound, over all pool discards.
    pub min_discard_witnesses: Option<usize>,
}

pub struct PruneOutcome<T> {
    /// Best first.
    pub top: Vec<Resolved<T>>,
    pub stats: PruneStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Binary min-heap over `(key, set_id, seq)` with a step counter.
#[derive(Debug, Clone, Default)]
struct LazyMinHeap {
    data: Vec<(Key, SetId, u64)>,
}

impl LazyMinHeap {
    fn push(&mut self, e: (Key, SetId, u64), sifts: &mut u64) {
        self.data.push(e);
        let mut i = self.data.len() - 1;
        while i > 0 {
            let p = (i - 1) / 2;
            *sifts += 1;
            if self.data[i] < self.data[p] {
                self.data.swap(i, p);
                i = p;
            } else {
                break;
            }
        }
    }

    fn pop(&mut self, sifts: &mut u64) -> Option<(Key, SetId, u64)> {
        if self.data.is_empty() {
            return None;
        }
        let top = self.data.swap_remove(0);
        let n = self.data.len();
        let mut i = 0;
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut m = i;
            if l < n && self.data[l] < self.data[m] {
                m = l;
            }
            if r < n && self.data[r] < self.data[m] {
                m = r;
            }
            if m == i {
                break;
            }
            *sifts += 1;
            self.data.swap(i, m);
            i = m;
        }
        Some(top)
    }
}

/// Double-ended priority queue over bounded candidates.
///
/// The max-ub view is an indexed heap supporting removal at any position. The
/// min-lb and min-ub views are lazy: removed elements stay as stale entries
/// (their sequence number no longer matches the live one) and are dropped when
/// they surface at the root.
#[derive(Debug, Clone, Default)]
pub struct Depq {
    max_ub: Vec<(BoundedCandidate, u64)>,
    pos: HashMap<SetId, usize>,
    min_lb: LazyMinHeap,
    min_ub: LazyMinHeap,
    live_seq: HashMap<SetId, u64>,
    next_seq: u64,
    counters: DepqCounters,
}

fn max_ub_before(a: &BoundedCandidate, b: &BoundedCandidate) -> bool {
    match a.bounds.ub.total_cmp(&b.bounds.ub) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.set_id < b.set_id,
    }
}

impl Depq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.max_ub.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max_ub.is_empty()
    }

    pub fn counters(&self) -> DepqCounters {
        self.counters
    }

    pub fn contains(&self, id: SetId) -> bool {
        self.pos.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BoundedCandidate> {
        self.max_ub.iter().map(|e| &e.0)
    }

    pub fn insert(&mut self, c: BoundedCandidate) -> Result<()> {
        if self.pos.contains_key(&c.set_id) {
            return Err(Error::InvalidParameter(format!("set {} already queued", c.set_id)));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.counters.inserts += 1;
        self.live_seq.insert(c.set_id, seq);
        self.max_ub.push((c, seq));
        let i = self.max_ub.len() - 1;
        self.pos.insert(c.set_id, i);
        self.sift_up(i);
        let sifts = &mut self.counters.sifts;
        self.min_lb.push((Key(c.bounds.lb), c.set_id, seq), sifts);
        self.min_ub.push((Key(c.bounds.ub), c.set_id, seq), sifts);
        Ok(())
    }

    pub fn peek_max_ub(&self) -> Option<BoundedCandidate> {
        self.max_ub.first().map(|e| e.0)
    }

    pub fn extract_max_ub(&mut self) -> Option<BoundedCandidate> {
        let id = self.max_ub.first()?.0.set_id;
        self.counters.extracts += 1;
        self.remove_live(id)
    }

    pub fn min_lb(&mut self) -> Option<BoundedCandidate> {
        let id = Self::purge(&mut self.min_lb, &self.live_seq, &mut self.counters)?;
        Some(self.max_ub[self.pos[&id]].0)
    }

    pub fn min_ub(&mut self) -> Option<BoundedCandidate> {
        let id = Self::purge(&mut self.min_ub, &self.live_seq, &mut self.counters)?;
        Some(self.max_ub[self.pos[&id]].0)
    }

    pub fn pop_min_ub(&mut self) -> Option<BoundedCandidate> {
        let id = self.min_ub()?.set_id;
        self.counters.removes += 1;
        self.remove_live(id)
    }

    pub fn remove(&mut self, id: SetId) -> Result<BoundedCandidate> {
        if !self.pos.contains_key(&id) {
            return Err(Error::InvalidParameter(format!("set {id} is not queued")));
        }
        self.counters.removes += 1;
        Ok(self.remove_live(id).expect("live element"))
    }

    /// Drops stale roots; returns the live root id.
    fn purge(heap: &mut LazyMinHeap, live: &HashMap<SetId, u64>, counters: &mut DepqCounters) -> Option<SetId> {
        loop {
            let &(_, id, seq) = heap.data.first()?;
            if live.get(&id) == Some(&seq) {
                return Some(id);
            }
            heap.pop(&mut counters.sifts);
            counters.purged += 1;
        }
    }

    fn remove_live(&mut self, id: SetId) -> Option<BoundedCandidate> {
        let i = self.pos.remove(&id)?;
        self.live_seq.remove(&id);
        let (c, _) = self.max_ub.swap_remove(i);
        if i < self.max_ub.len() {
            let moved = self.max_ub[i].0.set_id;
            self.pos.insert(moved, i);
            let j = self.sift_up(i);
            if j == i {
                self.sift_down(i);
            }
        }
        Some(c)
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.max_ub.swap(a, b);
        self.pos.insert(self.max_ub[a].0.set_id, a);
        self.pos.insert(self.max_ub[b].0.set_id, b);
    }

    fn sift_up(&mut self, mut i: usize) -> usize {
        while i > 0 {
            let p = (i - 1) / 2;
            self.counters.sifts += 1;
            if max_ub_before(&self.max_ub[i].0, &self.max_ub[p].0) {
                self.swap(i, p);
                i = p;
            } else {
                break;
            }
        }
        i
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.max_ub.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut m = i;
            if l < n && max_ub_before(&self.max_ub[l].0, &self.max_ub[m].0) {
                m = l;
            }
            if r < n && max_ub_before(&self.max_ub[r].0, &self.max_ub[m].0) {
                m = r;
            }
            if m == i {
                return;
            }
            self.counters.sifts += 1;
            self.swap(i, m);
            i = m;
        }
    }
}

struct Worst<T>(Resolved<T>);

impl<T> PartialEq for Worst<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Worst<T> {}

impl<T> Ord for Worst<T> {
    /// Reversed rank: the max-heap root is the weakest member.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.rank_cmp(&self.0)
    }
}

impl<T> PartialOrd for Worst<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `H`: the best `m` resolved candidates, weakest on top.
struct TopM<T> {
    m: usize,
    heap: BinaryHeap<Worst<T>>,
}

impl<T> TopM<T> {
    fn new(m: usize) -> Self {
        Self {
            m,
            heap: BinaryHeap::with_capacity(m + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.heap.len() >= self.m
    }

    fn min_score(&self) -> Option<f64> {
        self.heap.peek().map(|w| w.0.score)
    }

    /// True when a candidate with this upper bound cannot enter.
    fn dominates(&self, ub: f64) -> bool {
        self.is_full() && self.min_score().is_some_and(|s| ub + BOUND_EPS < s)
    }

    fn offer(&mut self, r: Resolved<T>) {
        if !self.is_full() {
            self.heap.push(Worst(r));
        } else if let Some(mut top) = self.heap.peek_mut() {
            if r.rank_cmp(&top.0) == Ordering::Greater {
                *top = Worst(r);
            }
        }
    }

    fn into_sorted(self) -> Vec<Resolved<T>> {
        let mut v: Vec<_> = self.heap.into_iter().map(|w| w.0).collect();
        sort_ranked(&mut v);
        v
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    Ok(())
}

/// Resolves every candidate and keeps the best `m`.
pub fn brute_force_top_m<T, F>(cands: &[BoundedCandidate], m: usize, mut score_fn: F) -> Result<PruneOutcome<T>>
where
    F: FnMut(&BoundedCandidate) -> Result<Resolved<T>>,
{
    check_m(m)?;
    let mut h = TopM::new(m);
    for c in cands {
        h.offer(score_fn(c)?);
    }
    Ok(PruneOutcome {
        top: h.into_sorted(),
        stats: PruneStats {
            candidates: cands.len(),
            score_calls: cands.len(),
            ..PruneStats::default()
        },
    })
}

/// The base resolution rule shared by both pruners: fill `H`; afterwards
/// resolve a candidate only when its lower bound clears the weakest member
/// (it must enter) or its upper bound reaches it (it might).
fn base_step<T, F>(c: &BoundedCandidate, h: &mut TopM<T>, stats: &mut PruneStats, score_fn: &mut F) -> Result<()>
where
    F: FnMut(&BoundedCandidate) -> Result<Resolved<T>>,
{
    let resolve = match h.min_score() {
        Some(min) if h.is_full() => {
            stats.bound_checks += 1;
            c.bounds.lb - BOUND_EPS > min || c.bounds.ub + BOUND_EPS >= min
        }
        _ => true,
    };
    if resolve {
        stats.score_calls += 1;
        let r = score_fn(c)?;
        debug_assert!(c.bounds.contains(r.score), "score {} outside {:?}", r.score, c.bounds);
        h.offer(r);
    }
    Ok(())
}

/// Single pass in arrival order with a min-heap of resolved scores.
pub fn base_prune<T, F>(cands: &[BoundedCandidate], m: usize, mut score_fn: F) -> Result<PruneOutcome<T>>
where
    F: FnMut(&BoundedCandidate) -> Result<Resolved<T>>,
{
    check_m(m)?;
    let mut h = TopM::new(m);
    let mut stats = PruneStats {
        candidates: cands.len(),
        ..PruneStats::default()
    };
    for c in cands {
        base_step(c, &mut h, &mut stats, &mut score_fn)?;
    }
    stats.discarded = cands.len() - stats.score_calls;
    Ok(PruneOutcome {
        top: h.into_sorted(),
        stats,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnhancedOptions {
    /// Count witnesses for every pool discard (costs a pool scan each time).
    pub audit: bool,
}

pub fn enhanced_prune<T, F>(cands: &[BoundedCandidate], m: usize, score_fn: F) -> Result<PruneOutcome<T>>
where
    F: FnMut(&BoundedCandidate) -> Result<Resolved<T>>,
{
    enhanced_prune_with(cands, m, EnhancedOptions::default(), score_fn)
}

/// Keeps up to `m` unresolved candidates in a DEPQ pool and decides each
/// newcomer against it:
///
/// * upper bound below the pool's weakest upper bound: dropped when every
///   pool member's lower bound exceeds it, deferred otherwise;
/// * lower bound above the pool's weakest lower bound: the pool member with
///   the weakest upper bound is deferred and the newcomer admitted;
/// * otherwise pool members are resolved strongest upper bound first until
///   the newcomer cannot beat the resolved top-m, then it is admitted.
///
/// Deferred and pooled candidates are resolved at the end in descending
/// upper-bound order, stopping once the rest are dominated.
pub fn enhanced_prune_with<T, F>(
    cands: &[BoundedCandidate],
    m: usize,
    opts: EnhancedOptions,
    mut score_fn: F,
) -> Result<PruneOutcome<T>>
where
    F: FnMut(&BoundedCandidate) -> Result<Resolved<T>>,
{
    check_m(m)?;
    let mut h = TopM::new(m);
    let mut pool = Depq::new();
    let mut deferred: Vec<BoundedCandidate> = Vec::new();
    let mut stats = PruneStats {
        candidates: cands.len(),
        ..PruneStats::default()
    };
    for c in cands {
        stats.bound_checks += 1;
        if h.dominates(c.bounds.ub) {
            stats.discarded += 1;
            continue;
        }
        if pool.len() < m {
            pool.insert(*c)?;
            continue;
        }
        let min_ub = pool.min_ub().expect("full pool").bounds.ub;
        let min_lb = pool.min_lb().expect("full pool").bounds.lb;
        if c.bounds.ub < min_ub {
            if c.bounds.ub + BOUND_EPS < min_lb {
                if opts.audit {
                    let w = pool.iter().filter(|p| p.bounds.lb >= c.bounds.ub).count();
                    stats.min_discard_witnesses = Some(stats.min_discard_witnesses.map_or(w, |x| x.min(w)));
                }
                stats.discarded += 1;
            } else {
                deferred.push(*c);
            }
        } else if c.bounds.lb > min_lb {
            let weak = pool.pop_min_ub().expect("full pool");
            deferred.push(weak);
            stats.evicted += 1;
            pool.insert(*c)?;
        } else {
            while let Some(v) = pool.extract_max_ub() {
                stats.drained += 1;
                base_step(&v, &mut h, &mut stats, &mut score_fn)?;
                if h.is_full() && h.min_score().is_some_and(|s| c.bounds.ub <= s) {
                    break;
                }
            }
            if h.dominates(c.bounds.ub) {
                stats.discarded += 1;
            } else {
                pool.insert(*c)?;
            }
        }
    }
    let mut rest = deferred;
    while let Some(v) = pool.extract_max_ub() {
        rest.push(v);
    }
    rest.sort_by(|a, b| b.bounds.ub.total_cmp(&a.bounds.ub).then(a.set_id.cmp(&b.set_id)));
    for (i, v) in rest.iter().enumerate() {
        if h.dominates(v.bounds.ub) {
            stats.discarded += rest.len() - i;
            break;
        }
        base_step(v, &mut h, &mut stats, &mut score_fn)?;
    }
    stats.depq = pool.counters();
    Ok(PruneOutcome {
        top: h.into_sorted(),
        stats,
    })
}

pub fn prune<T, F>(pruner: Pruner, cands: &[BoundedCandidate], m: usize, score_fn: F) -> Result<PruneOutcome<T>>
where
    F: FnMut(&BoundedCandidate) -> Result<Resolved<T>>,
{
    match pruner {
        Pruner::BruteForce => brute_force_top_m(cands, m, score_fn),
        Pruner::Base => base_prune(cands, m, score_fn),
        Pruner::Enhanced => enhanced_prune(cands, m, score_fn),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cand(id: SetId, lb: f64, ub: f64) -> BoundedCandidate {
        BoundedCandidate {
            set_id: id,
            bounds: BoundPair::new(lb, ub),
        }
    }

    fn ids<T>(v: &[Resolved<T>]) -> Vec<SetId> {
        v.iter().map(|r| r.set_id).collect()
    }

    #[test]
    fn depq_basic_views() {
        let mut q = Depq::new();
        q.insert(cand(1, 0.2, 0.9)).unwrap();
        q.insert(cand(2, 0.1, 0.5)).unwrap();
        q.insert(cand(3, 0.4, 0.6)).unwrap();
        assert!(q.insert(cand(3, 0.0, 0.0)).is_err());
        assert_eq!(q.min_lb().unwrap().set_id, 2);
        assert_eq!(q.min_ub().unwrap().set_id, 2);
        assert_eq!(q.peek_max_ub().unwrap().set_id, 1);
        q.remove(2).unwrap();
        assert!(q.remove(2).is_err());
        assert_eq!(q.min_lb().unwrap().set_id, 1);
        assert_eq!(q.min_ub().unwrap().set_id, 3);
        assert_eq!(q.extract_max_ub().unwrap().set_id, 1);
        assert_eq!(q.extract_max_ub().unwrap().set_id, 3);
        assert!(q.min_lb().is_none());
        assert!(q.extract_max_ub().is_none());
    }

    #[test]
    fn removed_elements_never_surface() {
        let mut q = Depq::new();
        for i in 0..20 {
            q.insert(cand(i, i as f64, i as f64 + 1.0)).unwrap();
        }
        q.remove(19).unwrap();
        q.remove(7).unwrap();
        let mut out = Vec::new();
        while let Some(c) = q.extract_max_ub() {
            out.push(c.set_id);
        }
        assert!(!out.contains(&19) && !out.contains(&7));
        assert_eq!(out.len(), 18);
    }

    #[test]
    fn reinserted_id_ignores_stale_entries() {
        let mut q = Depq::new();
        q.insert(cand(5, 0.0, 0.1)).unwrap();
        q.remove(5).unwrap();
        q.insert(cand(5, 0.7, 0.8)).unwrap();
        q.insert(cand(6, 0.5, 0.9)).unwrap();
        assert_eq!(q.min_ub().unwrap(), cand(5, 0.7, 0.8));
        assert_eq!(q.min_lb().unwrap().set_id, 6);
    }

    fn by_score(scores: &[f64]) -> impl FnMut(&BoundedCandidate) -> Result<Resolved<()>> + '_ {
        move |c| {
            Ok(Resolved {
                set_id: c.set_id,
                score: scores[c.set_id as usize],
                cardinality: 0,
                payload: (),
            })
        }
    }

    #[test]
    fn base_full_pruning_after_warm_up() {
        let scores = [0.9, 0.8, 0.1, 0.2, 0.15];
        let cands: Vec<_> = (0..5)
            .map(|i| cand(i, scores[i as usize], if i < 2 { scores[i as usize] } else { 0.3 }))
            .collect();
        let out = base_prune(&cands, 2, by_score(&scores)).unwrap();
        assert_eq!(out.stats.score_calls, 2);
        assert_eq!(ids(&out.top), vec![0, 1]);
    }

    #[test]
    fn enhanced_disjoint_intervals_need_exactly_m_resolutions() {
        // Intervals [i, i + 0.5] never overlap.
        let n = 30;
        let scores: Vec<f64> = (0..n).map(|i| i as f64 + 0.25).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut order: Vec<u32> = (0..n as u32).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let cands: Vec<_> = order.iter().map(|&i| cand(i, i as f64, i as f64 + 0.5)).collect();
            let out = enhanced_prune(&cands, 5, by_score(&scores)).unwrap();
            assert_eq!(out.stats.score_calls, 5);
            assert_eq!(ids(&out.top), vec![29, 28, 27, 26, 25]);
        }
    }

    #[test]
    fn m_at_least_len_resolves_everything() {
        let scores = [0.3, 0.9, 0.5];
        let cands: Vec<_> = (0..3).map(|i| cand(i, 0.0, 1.0)).collect();
        for p in Pruner::all() {
            let out = prune(p, &cands, 5, by_score(&scores)).unwrap();
            assert_eq!(ids(&out.top), vec![1, 2, 0]);
            assert_eq!(out.stats.score_calls, 3);
        }
    }

    #[test]
    fn ties_prefer_lower_id() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let cands: Vec<_> = (0..4).rev().map(|i| cand(i, 0.5, 0.5)).collect();
        for p in Pruner::all() {
            assert_eq!(ids(&prune(p, &cands, 2, by_score(&scores)).unwrap().top), vec![0, 1]);
        }
    }

    #[test]
    fn zero_m_rejected() {
        assert!(base_prune(&[], 0, by_score(&[])).is_err());
        assert!(enhanced_prune(&[], 0, by_score(&[])).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<f64>, Vec<BoundedCandidate>, usize)> {
        (1usize..80, 1usize..12).prop_flat_map(|(n, m)| {
            let per = (0.0f64..1.0, 0.0f64..0.3, 0.0f64..0.3, 0u8..4);
            (prop::collection::vec(per, n), Just(m)).prop_map(|(raw, m)| {
                let mut scores = Vec::new();
                let mut cands = Vec::new();
                for (i, (s, dl, du, q)) in raw.into_iter().enumerate() {
                    // Quantized scores force ties.
                    let s = if q == 0 { (s * 4.0).round() / 4.0 } else { s };
                    scores.push(s);
                    cands.push(cand(i as u32, s - dl, s + du));
                }
                (scores, cands, m)
            })
        })
    }

    proptest! {
        #[test]
        fn all_pruners_agree((scores, cands, m) in arb_instance()) {
            let bf = brute_force_top_m(&cands, m, by_score(&scores)).unwrap();
            let base = base_prune(&cands, m, by_score(&scores)).unwrap();
            let enh = enhanced_prune_with(&cands, m, EnhancedOptions { audit: true }, by_score(&scores)).unwrap();
            prop_assert_eq!(ids(&bf.top), ids(&base.top));
            prop_assert_eq!(ids(&bf.top), ids(&enh.top));
            prop_assert!(enh.stats.score_calls <= cands.len());
            if let Some(w) = enh.stats.min_discard_witnesses {
                prop_assert!(w >= m);
            }
        }
    }
}
