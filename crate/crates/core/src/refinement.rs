//! First-stage candidate generation: drain `(centroid, query vector)` pairs in
//! descending inner product and credit every set living in that centroid,
//! at most once per query vector and at most `I_w[i][c]` times per centroid.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::centroid_ann::{top_centroids, AnnMode, CentroidGraphIndex, CentroidSims};
use crate::error::{Error, Result};
use crate::quantizer::{CentroidId, Codebook, VectorInvertedIndex};
use crate::repository::{SetId, Vectors};

#[derive(Debug, Clone, Copy)]
pub struct RefineParams {
    pub phi_c: usize,
    pub phi_ref: usize,
    pub ann_mode: AnnMode,
    pub ef_search: usize,
    /// Mark a query vector as spent for a set even when the centroid's
    /// capacity for that set is exhausted.
    pub mark_visited_on_block: bool,
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if self.phi_c == 0 || self.phi_ref == 0 {
            return Err(Error::InvalidParameter("phi_c and phi_ref must be >= 1".into()));
        }
        Ok(())
    }
}

/// Accumulators for one touched set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetState {
    /// `Φ_v`: query vectors that already had their chance on this set.
    pub visited: Vec<bool>,
    /// `Φ_u`: consumed count per centroid, ascending by centroid.
    pub used: Vec<(CentroidId, u32)>,
    /// `Φ_s`.
    pub score: f64,
}

impl SetState {
    fn new(nq: usize) -> Self {
        Self {
            visited: vec![false; nq],
            used: Vec::new(),
            score: 0.0,
        }
    }

    pub fn used(&self, c: CentroidId) -> u32 {
        match self.used.binary_search_by_key(&c, |e| e.0) {
            Ok(p) => self.used[p].1,
            Err(_) => 0,
        }
    }

    fn bump(&mut self, c: CentroidId) {
        match self.used.binary_search_by_key(&c, |e| e.0) {
            Ok(p) => self.used[p].1 += 1,
            Err(p) => self.used.insert(p, (c, 1)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefinementState {
    pub sets: HashMap<SetId, SetState>,
}

/// Heap entry; ordered by similarity, then lower query index, then lower
/// centroid id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub sim: f64,
    pub query: u32,
    pub centroid: CentroidId,
}

impl Eq for PairEvent {}

impl Ord for PairEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then(other.query.cmp(&self.query))
            .then(other.centroid.cmp(&self.centroid))
    }
}

impl PartialOrd for PairEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisitOutcome {
    Accepted,
    /// The query vector was already spent on this set.
    AlreadyVisited,
    /// `Φ_u[i][c]` reached `I_w[i][c]`.
    CapacityBlocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitRecord {
    pub event: usize,
    pub set_id: SetId,
    pub outcome: VisitOutcome,
}

/// Everything the drain loop did, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefinementTrace {
    pub drained: Vec<PairEvent>,
    pub visits: Vec<VisitRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementOutput {
    /// Top-`φ_ref` sets by accumulated score, ties to the lower id.
    pub ranked: Vec<(SetId, f64)>,
    pub touched: usize,
    pub events: usize,
}

pub struct Refiner<'a> {
    pub codebook: &'a Codebook,
    pub graph: Option<&'a CentroidGraphIndex>,
    pub inverted: &'a VectorInvertedIndex,
}

impl Refiner<'_> {
    pub fn refine(&self, q: &Vectors, sims: &CentroidSims, params: &RefineParams) -> Result<RefinementOutput> {
        self.run(q, sims, params, None).map(|(out, _)| out)
    }

    /// Like [`Refiner::refine`] but also records the drain order, each
    /// visit, and the final per-set state.
    pub fn refine_traced(
        &self,
        q: &Vectors,
        sims: &CentroidSims,
        params: &RefineParams,
    ) -> Result<(RefinementOutput, RefinementTrace, RefinementState)> {
        let mut trace = RefinementTrace::default();
        let (out, state) = self.run(q, sims, params, Some(&mut trace))?;
        Ok((out, trace, state))
    }

    fn run(
        &self,
        q: &Vectors,
        sims: &CentroidSims,
        params: &RefineParams,
        mut trace: Option<&mut RefinementTrace>,
    ) -> Result<(RefinementOutput, RefinementState)> {
        params.validate()?;
        let nq = q.len();
        let mut heap = BinaryHeap::with_capacity(nq * params.phi_c);
        for (qi, v) in q.rows().enumerate() {
            let top = top_centroids(
                self.codebook,
                self.graph,
                v,
                sims.row(qi),
                params.phi_c,
                params.ef_search,
                params.ann_mode,
            )?;
            heap.extend(top.into_iter().map(|(c, sim)| PairEvent {
                sim,
                query: qi as u32,
                centroid: c,
            }));
        }
        let mut state = RefinementState::default();
        let mut events = 0;
        let mut last = f64::INFINITY;
        while let Some(ev) = heap.pop() {
            debug_assert!(ev.sim <= last, "drain order must be non-increasing");
            last = ev.sim;
            let qi = ev.query as usize;
            for posting in self.inverted.set_postings(ev.centroid) {
                let s = state.sets.entry(posting.set_id).or_insert_with(|| SetState::new(nq));
                let outcome = if s.visited[qi] {
                    VisitOutcome::AlreadyVisited
                } else if s.used(ev.centroid) < posting.count {
                    s.bump(ev.centroid);
                    s.score += ev.sim;
                    s.visited[qi] = true;
                    VisitOutcome::Accepted
                } else {
                    if params.mark_visited_on_block {
                        s.visited[qi] = true;
                    }
                    VisitOutcome::CapacityBlocked
                };
                if let Some(t) = trace.as_deref_mut() {
                    t.visits.push(VisitRecord {
                        event: events,
                        set_id: posting.set_id,
                        outcome,
                    });
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.drained.push(ev);
            }
            events += 1;
        }
        let mut ranked: Vec<(SetId, f64)> = state.sets.iter().map(|(&id, s)| (id, s.score)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let touched = ranked.len();
        ranked.truncate(params.phi_ref);
        Ok((
            RefinementOutput {
                ranked,
                touched,
                events,
            },
            state,
        ))
    }
}
