//! Prints e2e / prf-rerank / prf-rank effectiveness on synthetic corpora
//! across noise levels, to pick a noise setting for experiments.
//!
//! ```bash
//! cargo run --release -p mvprf-core --example calibrate_synth -- \
//!     noise=1.0,1.5,2.0 seeds=3 kprime=100 nprobe=8
//! ```

use std::collections::HashMap;

use mvprf_core::batch::search_batch;
use mvprf_core::eval::{map_at, recall_at, RelevanceThreshold};
use mvprf_core::synth::{generate, SynthSpec};
use mvprf_core::{IndexBuildConfig, IndexedCorpus, PrfConfig, SearchMode};

fn main() -> mvprf_core::Result<()> {
    let args: HashMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| a.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let get = |k: &str, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let noises: Vec<f64> = get("noise", "1.0").split(',').map(|s| s.parse().unwrap()).collect();
    let seeds: u64 = get("seeds", "3").parse().unwrap();
    let mut spec = SynthSpec {
        docs_per_topic: get("docs", "200").parse().unwrap(),
        n_topics: get("topics", "20").parse().unwrap(),
        dim: get("dim", "128").parse().unwrap(),
        tokens_per_doc: get("tokens", "30").parse().unwrap(),
        token_spread: get("spread", "2.0").parse().unwrap(),
        query_terms: get("terms", "4").parse().unwrap(),
        vocab_per_topic: get("vocab", "50").parse().unwrap(),
        mask_noise: get("masknoise", "0.25").parse().unwrap(),
        queries_per_topic: get("qpt", "2").parse().unwrap(),
        ..Default::default()
    };
    let cfg = PrfConfig {
        k_prime: get("kprime", "100").parse().unwrap(),
        nprobe: get("nprobe", "8").parse().unwrap(),
        beta: get("beta", "1.0").parse().unwrap(),
        feedback_docs: get("fb", "3").parse().unwrap(),
        expansion_embeddings: get("fe", "10").parse().unwrap(),
        clusters: get("k", "24").parse().unwrap(),
        ..Default::default()
    };
    println!("noise seed | MAP e2e rerank rank | R@100 e2e rerank rank");
    for &noise in &noises {
        for seed in 0..seeds {
            spec.noise = noise;
            spec.seed = seed;
            let corpus = generate(&spec)?;
            let index = IndexedCorpus::build(
                corpus.docs.clone(),
                Some(&corpus.docnos),
                &IndexBuildConfig {
                    seed,
                    ..Default::default()
                },
            )?;
            let queries = corpus.query_embeddings();
            let mut maps = Vec::new();
            let mut recalls = Vec::new();
            for mode in [SearchMode::E2e, SearchMode::PrfRerank, SearchMode::PrfRank] {
                let out = search_batch(&index, &queries, mode, &cfg, 1000)?;
                maps.push(map_at(&out.run, &corpus.qrels, 1000, RelevanceThreshold::Auto).mean);
                recalls.push(recall_at(&out.run, &corpus.qrels, 100, RelevanceThreshold::Auto).mean);
            }
            println!(
                "{noise:5.2} {seed:4} | {:.4} {:.4} {:.4} | {:.4} {:.4} {:.4}",
                maps[0], maps[1], maps[2], recalls[0], recalls[1], recalls[2]
            );
        }
    }
    Ok(())
}
