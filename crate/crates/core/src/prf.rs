//! End-to-end retrieval and the pseudo-relevance feedback pipelines.
//!
//! * [`colbert_e2e`]: union of per-embedding ANN candidates, exact MaxSim.
//! * [`prf_rerank`]: clusters the top feedback documents, picks expansion
//!   embeddings, and rescores the first-pass candidates.
//! * [`prf_rank`]: same expansion, but re-issues ANN retrieval for the query
//!   and expansion embeddings before scoring.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::embedding::{EmbeddingMatrix, QueryEmbeddings};
use crate::error::{Error, Result};
use crate::expansion::{select_expansion, ExpansionSet};
use crate::index::{DocId, IndexedCorpus};
use crate::kmeans::{kmeans_with, KMeansConfig};
use crate::scoring::{check_beta, prf_score_raw, RankedList, ScoredDoc};

/// Tunables of the feedback pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfConfig {
    /// Feedback documents taken from the top of the first pass (f_b).
    pub feedback_docs: usize,
    /// KMeans clusters over the feedback embeddings (K).
    pub clusters: usize,
    /// Expansion embeddings kept (f_e). Zero disables expansion.
    pub expansion_embeddings: usize,
    /// Weight of the expansion part of the score.
    pub beta: f64,
    /// Nearest stored embeddings inspected when mapping a centroid to a token.
    pub token_neighbours: usize,
    /// Documents returned by each ANN probe (k').
    pub k_prime: usize,
    pub nprobe: usize,
    /// Global seed; each query clusters with a seed derived from it and the
    /// query id.
    pub seed: u64,
    /// Token ids never chosen as a centroid's token.
    pub stoplist: BTreeSet<u32>,
    pub kmeans: KMeansConfig,
}

impl Default for PrfConfig {
    fn default() -> Self {
        PrfConfig {
            feedback_docs: 3,
            clusters: 24,
            expansion_embeddings: 10,
            beta: 1.0,
            token_neighbours: 8,
            k_prime: 1000,
            nprobe: 8,
            seed: 0,
            stoplist: BTreeSet::new(),
            kmeans: KMeansConfig::default(),
        }
    }
}

impl PrfConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f_b", self.feedback_docs),
            ("K", self.clusters),
            ("r", self.token_neighbours),
            ("k'", self.k_prime),
            ("nprobe", self.nprobe),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.expansion_embeddings > self.clusters {
            return Err(Error::config(format!(
                "f_e = {} exceeds K = {}",
                self.expansion_embeddings, self.clusters
            )));
        }
        check_beta(self.beta)
    }

    /// Compact canonical description, stable across runs; used for run tags.
    pub fn fingerprint(&self) -> String {
        format!(
            "fb={};k={};fe={};beta={};r={};kprime={};nprobe={};seed={};stop={:?}",
            self.feedback_docs,
            self.clusters,
            self.expansion_embeddings,
            self.beta,
            self.token_neighbours,
            self.k_prime,
            self.nprobe,
            self.seed,
            self.stoplist
        )
    }
}

/// A ranking together with the candidate set it was scored over.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub ranking: RankedList,
    /// Scored candidates, ascending doc id.
    pub candidates: Vec<DocId>,
    pub expansion: Option<ExpansionSet>,
}

/// All token embeddings of the top feedback documents.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackBag {
    pub embeddings: EmbeddingMatrix,
    pub docs: Vec<DocId>,
}

/// Union of the ANN results of every probe row.
pub fn candidate_union(
    probes: &EmbeddingMatrix,
    index: &IndexedCorpus,
    k_prime: usize,
    nprobe: usize,
) -> Result<Vec<DocId>> {
    let mut set = BTreeSet::new();
    for p in probes.iter() {
        set.extend(index.ann_docs(p, k_prime, nprobe)?);
    }
    Ok(set.into_iter().collect())
}

fn check_query(q: &QueryEmbeddings, index: &IndexedCorpus) -> Result<()> {
    if q.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            record: format!("query {}", q.id),
            expected: index.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

fn score_candidates(
    q: &QueryEmbeddings,
    candidates: &[DocId],
    index: &IndexedCorpus,
    fe: &ExpansionSet,
    beta: f64,
) -> Result<RankedList> {
    let dim = index.dim();
    let scored = candidates
        .par_iter()
        .map(|&doc| {
            let d = index.doc_slice(doc)?;
            Ok(ScoredDoc {
                doc,
                score: prf_score_raw(q.rows.as_slice(), fe, beta, d, dim),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedList::from_unsorted(scored))
}

/// First-pass retrieval: ANN candidates for every query embedding, each
/// candidate scored exactly with MaxSim.
pub fn colbert_e2e(q: &QueryEmbeddings, index: &IndexedCorpus, k_prime: usize, nprobe: usize) -> Result<Retrieval> {
    check_query(q, index)?;
    let candidates = candidate_union(&q.rows, index, k_prime, nprobe)?;
    let ranking = score_candidates(q, &candidates, index, &ExpansionSet::empty(), 0.0)?;
    Ok(Retrieval {
        ranking,
        candidates,
        expansion: None,
    })
}

pub fn collect_feedback(ranking: &RankedList, f_b: usize, index: &IndexedCorpus) -> Result<FeedbackBag> {
    let docs: Vec<DocId> = ranking.doc_ids().take(f_b).collect();
    let mut data = Vec::new();
    for &d in &docs {
        data.extend_from_slice(index.doc_slice(d)?);
    }
    Ok(FeedbackBag {
        embeddings: EmbeddingMatrix::from_raw(index.dim(), data),
        docs,
    })
}

/// Per-query clustering seed: a mix of the global seed and the query id.
pub fn query_seed(global: u64, query_id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finaliser
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in query_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = global ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Feedback collection, clustering and expansion selection for one query.
pub fn expansion_for(
    q: &QueryEmbeddings,
    first_pass: &RankedList,
    index: &IndexedCorpus,
    cfg: &PrfConfig,
) -> Result<ExpansionSet> {
    if cfg.expansion_embeddings == 0 || first_pass.is_empty() {
        return Ok(ExpansionSet::empty());
    }
    let bag = collect_feedback(first_pass, cfg.feedback_docs, index)?;
    let clusters = kmeans_with(&bag.embeddings, cfg.clusters, query_seed(cfg.seed, &q.id), &cfg.kmeans)?;
    select_expansion(
        &clusters.centroids,
        cfg.expansion_embeddings,
        cfg.token_neighbours,
        index,
        &cfg.stoplist,
    )
}

/// Rescores the first-pass candidates with the expansion-weighted score.
pub fn prf_rerank(q: &QueryEmbeddings, index: &IndexedCorpus, cfg: &PrfConfig) -> Result<Retrieval> {
    cfg.validate()?;
    let first = colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)?;
    let fe = expansion_for(q, &first.ranking, index, cfg)?;
    let ranking = if fe.is_empty() || cfg.beta == 0.0 {
        first.ranking
    } else {
        score_candidates(q, &first.candidates, index, &fe, cfg.beta)?
    };
    Ok(Retrieval {
        ranking,
        candidates: first.candidates,
        expansion: Some(fe),
    })
}

/// Re-runs ANN retrieval with the query and expansion embeddings, then
/// scores the enlarged candidate set with the expansion-weighted score.
pub fn prf_rank(q: &QueryEmbeddings, index: &IndexedCorpus, cfg: &PrfConfig) -> Result<Retrieval> {
    cfg.validate()?;
    let first = colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)?;
    let fe = expansion_for(q, &first.ranking, index, cfg)?;
    if fe.is_empty() {
        return Ok(Retrieval {
            expansion: Some(fe),
            ..first
        });
    }
    let mut candidates: BTreeSet<DocId> = first.candidates.into_iter().collect();
    candidates.extend(candidate_union(fe.embeddings(), index, cfg.k_prime, cfg.nprobe)?);
    let candidates: Vec<DocId> = candidates.into_iter().collect();
    let ranking = score_candidates(q, &candidates, index, &fe, cfg.beta)?;
    Ok(Retrieval {
        ranking,
        candidates,
        expansion: Some(fe),
    })
}

/// Which pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchMode {
    E2e,
    PrfRank,
    PrfRerank,
}

impl SearchMode {
    pub fn name(self) -> &'static str {
        match self {
            SearchMode::E2e => "e2e",
            SearchMode::PrfRank => "prf-rank",
            SearchMode::PrfRerank => "prf-rerank",
        }
    }
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e2e" => Ok(SearchMode::E2e),
            "prf-rank" => Ok(SearchMode::PrfRank),
            "prf-rerank" => Ok(SearchMode::PrfRerank),
            other => Err(Error::config(format!(
                "unknown mode {other:?} (expected e2e, prf-rank or prf-rerank)"
            ))),
        }
    }
}

pub fn search(q: &QueryEmbeddings, index: &IndexedCorpus, mode: SearchMode, cfg: &PrfConfig) -> Result<Retrieval> {
    match mode {
        SearchMode::E2e => {
            cfg.validate()?;
            colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)
        }
        SearchMode::PrfRank => prf_rank(q, index, cfg),
        SearchMode::PrfRerank => prf_rerank(q, index, cfg),
    }
}
