//! Parameter sweeps: one batch run and evaluation per grid point.

use std::fmt::Write as _;

use crate::batch::{search_batch, RUN_DEPTH};
use crate::embedding::QueryEmbeddings;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, Qrels};
use crate::index::IndexedCorpus;
use crate::prf::{PrfConfig, SearchMode};

/// Values to try for each swept parameter. An empty axis keeps the base
/// configuration's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub feedback_docs: Vec<usize>,
    pub clusters: Vec<usize>,
    pub expansion_embeddings: Vec<usize>,
    pub beta: Vec<f64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.feedback_docs.is_empty()
            && self.clusters.is_empty()
            && self.expansion_embeddings.is_empty()
            && self.beta.is_empty()
    }

    /// Every combination, f_b varying slowest and β fastest.
    pub fn points(&self, base: &PrfConfig) -> Result<Vec<PrfConfig>> {
        if self.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
            if values.is_empty() {
                vec![base]
            } else {
                values.to_vec()
            }
        }
        let mut out = Vec::new();
        for fb in axis(&self.feedback_docs, base.feedback_docs) {
            for k in axis(&self.clusters, base.clusters) {
                for fe in axis(&self.expansion_embeddings, base.expansion_embeddings) {
                    for beta in axis(&self.beta, base.beta) {
                        let cfg = PrfConfig {
                            feedback_docs: fb,
                            clusters: k,
                            expansion_embeddings: fe,
                            beta,
                            ..base.clone()
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub feedback_docs: usize,
    pub clusters: usize,
    pub expansion_embeddings: usize,
    pub beta: f64,
    pub map: f64,
    pub ndcg10: f64,
    pub mrr10: f64,
    pub recall: f64,
    pub mean_response_ms: f64,
}

pub fn sweep(
    index: &IndexedCorpus,
    queries: &[QueryEmbeddings],
    qrels: &Qrels,
    mode: SearchMode,
    base: &PrfConfig,
    grid: &SweepGrid,
    eval: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    grid.points(base)?
        .into_iter()
        .map(|cfg| {
            let out = search_batch(index, queries, mode, &cfg, RUN_DEPTH)?;
            let ev = evaluate(&out.run, qrels, eval);
            Ok(SweepRow {
                feedback_docs: cfg.feedback_docs,
                clusters: cfg.clusters,
                expansion_embeddings: cfg.expansion_embeddings,
                beta: cfg.beta,
                map: ev.map.mean,
                ndcg10: ev.ndcg10.mean,
                mrr10: ev.mrr10.mean,
                recall: ev.recall.mean,
                mean_response_ms: out.mean_response_ms,
            })
        })
        .collect()
}

pub const CSV_HEADER: &str = "fb,k,fe,beta,MAP,NDCG@10,MRR@10,Recall@1000,MRT_ms";

/// CSV with a header line. Metrics get six decimals; without `timing` the
/// MRT column is `NA`, which makes the file reproducible byte for byte.
pub fn to_csv(rows: &[SweepRow], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let mrt = if timing {
            format!("{:.3}", r.mean_response_ms)
        } else {
            "NA".to_string()
        };
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{mrt}",
            r.feedback_docs, r.clusters, r.expansion_embeddings, r.beta, r.map, r.ndcg10, r.mrr10, r.recall
        )
        .unwrap();
    }
    out
}
