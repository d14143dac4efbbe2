//! TREC-style evaluation: qrels and run file IO, ranking metrics and paired
//! significance testing.

mod metrics;
mod significance;
mod trec;

pub use metrics::{
    average_precision, evaluate, map_at, mrr_at, ndcg, ndcg_at, recall, recall_at, reciprocal_rank, EvalConfig,
    Evaluation, Gain, MetricReport, RelevanceThreshold,
};
pub use significance::{holm_adjust, paired_ttest, paired_ttest_holm, Comparison, TTest};
pub use trec::{Qrels, RunEntry, RunFile};

/// Values of two reports on the queries both define, ordered by query id.
pub fn paired_values(a: &MetricReport, b: &MetricReport) -> (Vec<f64>, Vec<f64>) {
    a.per_query
        .iter()
        .filter_map(|(q, &va)| b.per_query.get(q).map(|&vb| (va, vb)))
        .unzip()
}
