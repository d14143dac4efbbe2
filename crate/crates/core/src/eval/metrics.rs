use std::collections::{BTreeMap, HashSet};

use super::trec::{Qrels, RunEntry, RunFile};

/// Minimum grade that counts as relevant for the binary metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelevanceThreshold {
    /// 2 when any judgement reaches grade 2, otherwise 1.
    #[default]
    Auto,
    AtLeast(u32),
}

impl RelevanceThreshold {
    pub fn resolve(self, qrels: &Qrels) -> u32 {
        match self {
            RelevanceThreshold::Auto if qrels.max_grade() >= 2 => 2,
            RelevanceThreshold::Auto => 1,
            RelevanceThreshold::AtLeast(g) => g.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    #[default]
    Linear,
    /// `2^grade - 1`
    Exponential,
}

impl Gain {
    fn of(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

/// Per-query values of one metric and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub name: String,
    pub per_query: BTreeMap<String, f64>,
    /// Mean over `per_query`; zero when no query could be evaluated.
    pub mean: f64,
    /// Run queries absent from the qrels.
    pub unjudged: Vec<String>,
    /// Judged queries where the metric is undefined (nothing relevant).
    pub undefined: Vec<String>,
}

/// Distinct docnos of a ranking, first occurrence wins, cut at depth `k`.
fn top_k(entries: &[RunEntry], k: usize) -> Vec<&str> {
    let mut seen = HashSet::new();
    entries
        .iter()
        .map(|e| e.docno.as_str())
        .filter(|d| seen.insert(*d))
        .take(k)
        .collect()
}

fn relevant_count(judged: &BTreeMap<String, u32>, threshold: u32) -> usize {
    judged.values().filter(|&&g| g >= threshold).count()
}

fn is_rel(judged: &BTreeMap<String, u32>, docno: &str, threshold: u32) -> bool {
    judged.get(docno).is_some_and(|&g| g >= threshold)
}

pub fn average_precision(ranked: &[&str], judged: &BTreeMap<String, u32>, threshold: u32) -> Option<f64> {
    let total = relevant_count(judged, threshold);
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if is_rel(judged, d, threshold) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

pub fn recall(ranked: &[&str], judged: &BTreeMap<String, u32>, threshold: u32) -> Option<f64> {
    let total = relevant_count(judged, threshold);
    if total == 0 {
        return None;
    }
    let hits = ranked.iter().filter(|d| is_rel(judged, d, threshold)).count();
    Some(hits as f64 / total as f64)
}

pub fn reciprocal_rank(ranked: &[&str], judged: &BTreeMap<String, u32>, threshold: u32) -> Option<f64> {
    if relevant_count(judged, threshold) == 0 {
        return None;
    }
    Some(
        ranked
            .iter()
            .position(|d| is_rel(judged, d, threshold))
            .map_or(0.0, |p| 1.0 / (p + 1) as f64),
    )
}

/// DCG over the ranking divided by the DCG of the ideal ordering of all
/// judged grades, both cut at depth `k`.
pub fn ndcg(ranked: &[&str], judged: &BTreeMap<String, u32>, k: usize, gain: Gain) -> Option<f64> {
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.of(g) * discount(i))
        .sum();
    if idcg <= 0.0 {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain.of(judged.get(*d).copied().unwrap_or(0)) * discount(i))
        .sum();
    Some(dcg / idcg)
}

fn report<F>(name: String, run: &RunFile, qrels: &Qrels, k: usize, f: F) -> MetricReport
where
    F: Fn(&[&str], &BTreeMap<String, u32>) -> Option<f64>,
{
    let mut per_query = BTreeMap::new();
    let mut unjudged = Vec::new();
    let mut undefined = Vec::new();
    for (qid, entries) in run.queries() {
        let Some(judged) = qrels.query(qid) else {
            unjudged.push(qid.to_string());
            continue;
        };
        match f(&top_k(entries, k), judged) {
            Some(v) => {
                per_query.insert(qid.to_string(), v);
            }
            None => undefined.push(qid.to_string()),
        }
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    MetricReport {
        name,
        per_query,
        mean,
        unjudged,
        undefined,
    }
}

pub fn map_at(run: &RunFile, qrels: &Qrels, k: usize, threshold: RelevanceThreshold) -> MetricReport {
    let t = threshold.resolve(qrels);
    report(format!("MAP@{k}"), run, qrels, k, |r, j| average_precision(r, j, t))
}

pub fn recall_at(run: &RunFile, qrels: &Qrels, k: usize, threshold: RelevanceThreshold) -> MetricReport {
    let t = threshold.resolve(qrels);
    report(format!("Recall@{k}"), run, qrels, k, |r, j| recall(r, j, t))
}

pub fn mrr_at(run: &RunFile, qrels: &Qrels, k: usize, threshold: RelevanceThreshold) -> MetricReport {
    let t = threshold.resolve(qrels);
    report(format!("MRR@{k}"), run, qrels, k, |r, j| reciprocal_rank(r, j, t))
}

pub fn ndcg_at(run: &RunFile, qrels: &Qrels, k: usize, gain: Gain) -> MetricReport {
    report(format!("NDCG@{k}"), run, qrels, k, |r, j| ndcg(r, j, k, gain))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalConfig {
    pub threshold: RelevanceThreshold,
    pub gain: Gain,
}

/// The four headline metrics: MAP@1000, NDCG@10, MRR@10, Recall@1000.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub map: MetricReport,
    pub ndcg10: MetricReport,
    pub mrr10: MetricReport,
    pub recall: MetricReport,
}

impl Evaluation {
    pub fn reports(&self) -> [&MetricReport; 4] {
        [&self.map, &self.ndcg10, &self.mrr10, &self.recall]
    }
}

pub fn evaluate(run: &RunFile, qrels: &Qrels, cfg: &EvalConfig) -> Evaluation {
    Evaluation {
        map: map_at(run, qrels, 1000, cfg.threshold),
        ndcg10: ndcg_at(run, qrels, 10, cfg.gain),
        mrr10: mrr_at(run, qrels, 10, cfg.threshold),
        recall: recall_at(run, qrels, 1000, cfg.threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judged(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(d, g)| (d.to_string(), *g)).collect()
    }

    #[test]
    fn ap_two_relevant() {
        let j = judged(&[("a", 1), ("c", 1)]);
        let ap = average_precision(&["a", "b", "c"], &j, 1).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rr_cutoff() {
        let j = judged(&[("c", 1)]);
        assert!((reciprocal_rank(&["a", "b", "c"], &j, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let ranked: Vec<String> = (0..11).map(|i| format!("x{i}")).collect();
        let j = judged(&[("x10", 1)]);
        let refs: Vec<&str> = ranked.iter().map(String::as_str).take(10).collect();
        assert_eq!(reciprocal_rank(&refs, &j, 1).unwrap(), 0.0);
    }

    #[test]
    fn ndcg_perfect_single() {
        let j = judged(&[("a", 3)]);
        assert_eq!(ndcg(&["a", "b"], &j, 10, Gain::Linear).unwrap(), 1.0);
        assert!(ndcg(&["a"], &judged(&[("a", 0)]), 10, Gain::Linear).is_none());
    }

    #[test]
    fn exponential_gain() {
        let j = judged(&[("a", 1), ("b", 2)]);
        let lin = ndcg(&["a", "b"], &j, 10, Gain::Linear).unwrap();
        let exp = ndcg(&["a", "b"], &j, 10, Gain::Exponential).unwrap();
        let d2 = 1.0 / 3f64.log2();
        assert!((lin - (1.0 + 2.0 * d2) / (2.0 + d2)).abs() < 1e-12);
        assert!((exp - (1.0 + 3.0 * d2) / (3.0 + d2)).abs() < 1e-12);
    }

    #[test]
    fn threshold_detection() {
        let graded = Qrels::parse("1 0 a 1\n2 0 b 3\n").unwrap();
        assert_eq!(RelevanceThreshold::Auto.resolve(&graded), 2);
        let binary = Qrels::parse("1 0 a 1\n").unwrap();
        assert_eq!(RelevanceThreshold::Auto.resolve(&binary), 1);
        assert_eq!(RelevanceThreshold::AtLeast(1).resolve(&graded), 1);
    }

    #[test]
    fn unjudged_and_undefined_are_reported() {
        let qrels = Qrels::parse("1 0 a 2\n2 0 b 1\n").unwrap();
        let run = RunFile::parse("1 Q0 a 1 1 t\n2 Q0 b 1 1 t\n3 Q0 c 1 1 t\n").unwrap();
        let m = map_at(&run, &qrels, 1000, RelevanceThreshold::Auto);
        assert_eq!(m.per_query.len(), 1);
        assert_eq!(m.mean, 1.0);
        assert_eq!(m.unjudged, vec!["3"]);
        assert_eq!(m.undefined, vec!["2"]);
    }

    #[test]
    fn duplicate_docnos_count_once() {
        let qrels = Qrels::parse("1 0 a 1\n1 0 b 1\n").unwrap();
        let run = RunFile::parse("1 Q0 a 1 3 t\n1 Q0 a 2 2 t\n1 Q0 b 3 1 t\n").unwrap();
        let m = map_at(&run, &qrels, 1000, RelevanceThreshold::Auto);
        assert_eq!(m.mean, 1.0);
    }
}
