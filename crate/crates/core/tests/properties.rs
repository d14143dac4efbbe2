use std::collections::BTreeSet;

use mvprf_core::embedding::dot;
use mvprf_core::expansion::{top_scoring, Centroid};
use mvprf_core::kmeans::kmeans;
use mvprf_core::{
    maxsim, prf_score, DocRecord, EmbeddingMatrix, ExpansionSet, IdfWeight, IndexBuildConfig, IndexedCorpus,
    QueryEmbeddings,
};
use proptest::prelude::*;

fn matrix(dim: usize, max_rows: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    (1..=max_rows).prop_flat_map(move |rows| {
        prop::collection::vec(-1.0f32..1.0, rows * dim).prop_map(move |data| EmbeddingMatrix::new(dim, data).unwrap())
    })
}

fn naive_maxsim(q: &EmbeddingMatrix, d: &EmbeddingMatrix) -> f64 {
    let mut total = 0.0;
    for qi in q.iter() {
        let mut best = f64::NEG_INFINITY;
        for dj in d.iter() {
            let s: f64 = qi.iter().zip(dj).map(|(a, b)| *a as f64 * *b as f64).sum();
            best = best.max(s);
        }
        total += best;
    }
    total
}

fn corpus(dim: usize, docs: &[(Vec<u32>, Vec<f32>)]) -> IndexedCorpus {
    let records = docs.iter().enumerate().map(|(i, (toks, data))| {
        DocRecord::new(i as u64, toks.clone(), EmbeddingMatrix::new(dim, data.clone()).unwrap()).unwrap()
    });
    IndexedCorpus::build(records, None, &IndexBuildConfig::default()).unwrap()
}

fn docs_strategy(dim: usize) -> impl Strategy<Value = Vec<(Vec<u32>, Vec<f32>)>> {
    prop::collection::vec(
        (1usize..6).prop_flat_map(move |n| {
            (
                prop::collection::vec(0u32..12, n),
                prop::collection::vec(-1.0f32..1.0, n * dim),
            )
        }),
        1..25,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maxsim_matches_double_loop(q in matrix(8, 6), d in matrix(8, 9)) {
        let got = maxsim(&QueryEmbeddings::new("q", q.clone()).unwrap(), &d).unwrap();
        prop_assert!((got - naive_maxsim(&q, &d)).abs() < 1e-4);
    }

    #[test]
    fn maxsim_ignores_document_row_order(q in matrix(6, 5), d in matrix(6, 8), seed in any::<u64>()) {
        let mut rows: Vec<Vec<f32>> = d.iter().map(<[f32]>::to_vec).collect();
        // deterministic shuffle from the seed
        let n = rows.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 1) >> 7) as usize % (i + 1);
            rows.swap(i, j);
        }
        let shuffled = EmbeddingMatrix::from_rows(6, &rows).unwrap();
        let q = QueryEmbeddings::new("q", q).unwrap();
        prop_assert_eq!(maxsim(&q, &d).unwrap(), maxsim(&q, &shuffled).unwrap());
    }

    #[test]
    fn zero_importance_expansion_changes_nothing(q in matrix(4, 4), d in matrix(4, 6), e in matrix(4, 5), beta in 0.0f64..3.0) {
        let centroids = e.iter().map(|v| Centroid { embedding: v.to_vec(), token: 0, importance: IdfWeight::new(0.0).unwrap() }).collect();
        let fe = ExpansionSet::new(centroids).unwrap();
        let q = QueryEmbeddings::new("q", q).unwrap();
        prop_assert_eq!(prf_score(&q, &fe, beta, &d).unwrap(), maxsim(&q, &d).unwrap());
    }

    #[test]
    fn idf_is_non_negative_and_bounded(docs in docs_strategy(3)) {
        let index = corpus(3, &docs);
        let n = index.doc_count() as f64;
        for t in 0..12u32 {
            let v = index.idf(t).value();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= ((n + 1.0) / 1.0).ln() + 1e-12);
        }
    }

    #[test]
    fn ann_docs_probing_everything_is_brute_force(docs in docs_strategy(4), q in prop::collection::vec(-1.0f32..1.0, 4), k in 1usize..30) {
        let index = corpus(4, &docs);
        let all = index.quantizer().cell_count();
        let got = index.ann_docs_scored(&q, k, all).unwrap();
        let mut oracle: Vec<(u32, f32)> = (0..index.doc_count() as u32)
            .map(|d| {
                let m = index.doc_embeddings(d).unwrap();
                (d, m.iter().map(|e| dot(&q, e)).fold(f32::NEG_INFINITY, f32::max))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        oracle.truncate(k);
        prop_assert_eq!(got, oracle);
    }

    #[test]
    fn ann_tokens_is_brute_force(docs in docs_strategy(4), v in prop::collection::vec(-1.0f32..1.0, 4), r in 1usize..10) {
        let index = corpus(4, &docs);
        let mut all: Vec<(usize, f32, u32)> = Vec::new();
        let mut pos = 0;
        for d in 0..index.doc_count() as u32 {
            let m = index.doc_embeddings(d).unwrap();
            let toks = index.doc_token_ids(d).unwrap();
            for (e, &t) in m.iter().zip(toks) {
                all.push((pos, dot(&v, e), t));
                pos += 1;
            }
        }
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let oracle: Vec<u32> = all.iter().take(r).map(|x| x.2).collect();
        prop_assert_eq!(index.ann_tokens(&v, r).unwrap(), oracle);
    }

    #[test]
    fn kmeans_inertia_never_increases(points in matrix(3, 60), k in 1usize..8, seed in any::<u64>()) {
        let res = kmeans(&points, k, seed).unwrap();
        prop_assert_eq!(res.centroids.rows(), k);
        for w in res.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", res.inertia_history);
        }
    }

    #[test]
    fn kmeans_is_deterministic(points in matrix(3, 40), k in 1usize..6, seed in any::<u64>()) {
        let a = kmeans(&points, k, seed).unwrap();
        let b = kmeans(&points, k, seed).unwrap();
        prop_assert_eq!(a.centroids, b.centroids);
        prop_assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn top_scoring_keeps_the_highest(sigmas in prop::collection::vec(0.0f64..5.0, 1..20), take in 0usize..20) {
        let take = take.min(sigmas.len());
        let centroids: Vec<Centroid> = sigmas
            .iter()
            .enumerate()
            .map(|(i, &s)| Centroid { embedding: vec![i as f32], token: i as u32, importance: IdfWeight::new(s).unwrap() })
            .collect();
        let set = top_scoring(centroids, take).unwrap();
        prop_assert_eq!(set.len(), take);
        let chosen: BTreeSet<u32> = set.iter().map(|c| c.token).collect();
        let min_chosen = set.iter().map(|c| c.importance.value()).fold(f64::INFINITY, f64::min);
        for (i, &s) in sigmas.iter().enumerate() {
            if !chosen.contains(&(i as u32)) {
                prop_assert!(s <= min_chosen);
            }
        }
    }
}
