use std::collections::HashSet;
use std::sync::OnceLock;

use proptest::prelude::*;

use vsetsearch::exact_matching::unionability;
use vsetsearch::pipeline::{BuildConfig, Index, SearchParams};
use vsetsearch::pruning::Pruner;
use vsetsearch::repository::{generate_synthetic, QueryTable, SyntheticConfig};

struct Fixture {
    index: Index,
    queries: Vec<QueryTable>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let syn = generate_synthetic(&SyntheticConfig {
            n_sets: 250,
            cols_min: 2,
            cols_max: 12,
            dim: 24,
            n_topics: 20,
            noise: 0.3,
            seed: 3,
        })
        .unwrap();
        let queries = syn.sample_queries(24, 1, 8, 33).unwrap();
        let index = Index::build(syn.repo, &BuildConfig::default()).unwrap();
        Fixture { index, queries }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hits_are_sorted_unique_and_feasible(
        qi in 0usize..24,
        k in 1usize..15,
        tau in prop::sample::select(vec![0.5, 0.6, 0.7, 0.8]),
        phi_c in 1usize..40,
        pruner in prop::sample::select(Pruner::all().to_vec()),
    ) {
        let f = fixture();
        let q = &f.queries[qi];
        let params = SearchParams { tau, phi_c, pruner, ..SearchParams::with_k(k) };
        let res = f.index.search(q, &params).unwrap();
        prop_assert!(res.hits.len() <= k);
        let mut seen = HashSet::new();
        for h in &res.hits {
            prop_assert!(seen.insert(h.set_id));
        }
        for w in res.hits.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        for h in &res.hits {
            let set = f.index.repo.set(h.set_id).unwrap();
            let exact = unionability(&q.vectors, &set.vectors, tau).unwrap();
            prop_assert!(h.score <= exact.weight + 1e-6, "hit {} above exact {}", h.score, exact.weight);
            prop_assert!(h.cardinality <= exact.cardinality);
        }
        let d = &res.diagnostics;
        prop_assert!(d.filtered <= d.refined);
        prop_assert!(d.returned == res.hits.len());
    }

    #[test]
    fn pruners_return_identical_hits(qi in 0usize..24, k in 1usize..12) {
        let f = fixture();
        let q = &f.queries[qi];
        let runs: Vec<_> = Pruner::all()
            .iter()
            .map(|&pruner| f.index.search(q, &SearchParams { pruner, ..SearchParams::with_k(k) }).unwrap().hits)
            .collect();
        prop_assert_eq!(&runs[0], &runs[1]);
        prop_assert_eq!(&runs[0], &runs[2]);
    }
}

#[test]
fn search_is_deterministic_across_batch_and_single() {
    let f = fixture();
    let params = SearchParams::with_k(7);
    let batch = f.index.search_batch(&f.queries, &params).unwrap();
    for (q, b) in f.queries.iter().zip(&batch) {
        assert_eq!(f.index.search(q, &params).unwrap().hits, b.hits);
    }
}

#[test]
fn invalid_parameters_are_usage_errors() {
    let f = fixture();
    let q = &f.queries[0];
    let bad = [
        SearchParams {
            k: 0,
            ..SearchParams::with_k(5)
        },
        SearchParams {
            tau: -0.1,
            ..SearchParams::with_k(5)
        },
        SearchParams {
            phi_c: 0,
            ..SearchParams::with_k(5)
        },
        SearchParams {
            phi_r: 2,
            ..SearchParams::with_k(5)
        },
    ];
    for p in bad {
        let err = f.index.search(q, &p).unwrap_err();
        assert_eq!(err.kind(), vsetsearch::ErrorKind::Usage, "{err}");
    }
}
