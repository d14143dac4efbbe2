//! Mapping feedback centroids to tokens and choosing expansion embeddings.
//!
//! Each centroid is mapped to the token that most often owns its `r` nearest
//! stored embeddings. The IDF of that token becomes the centroid's importance,
//! and the most important centroids form the expansion set.

use std::collections::{BTreeMap, BTreeSet};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::index::{IdfWeight, IndexedCorpus};

/// Empirical distribution of token ids among a centroid's nearest neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: BTreeMap<u32, f64>,
}

impl TokenDistribution {
    fn from_neighbours(tokens: &[u32]) -> Self {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let r = tokens.len() as f64;
        TokenDistribution {
            probs: counts.into_iter().map(|(t, c)| (t, c as f64 / r)).collect(),
        }
    }

    pub fn prob(&self, token: u32) -> f64 {
        self.probs.get(&token).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().map(|(&t, &p)| (t, p))
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    /// Most likely token outside `exclude`, ties to the smaller id.
    pub fn argmax_excluding(&self, exclude: &BTreeSet<u32>) -> Option<u32> {
        let mut best: Option<(u32, f64)> = None;
        for (&t, &p) in &self.probs {
            if exclude.contains(&t) {
                continue;
            }
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((t, p));
            }
        }
        best.map(|(t, _)| t)
    }

    pub fn argmax(&self) -> u32 {
        self.argmax_excluding(&BTreeSet::new())
            .expect("distribution has non-empty support")
    }
}

/// `P(t | v)`: share of the `r` nearest stored embeddings whose token is `t`.
pub fn token_likelihood(v: &[f32], r: usize, index: &IndexedCorpus) -> Result<TokenDistribution> {
    if index.embedding_count() == 0 {
        return Err(Error::Empty("index holds no embeddings"));
    }
    Ok(TokenDistribution::from_neighbours(&index.ann_tokens(v, r)?))
}

/// A feedback centroid with its mapped token and importance.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub embedding: Vec<f32>,
    pub token: u32,
    pub importance: IdfWeight,
}

/// Expansion embeddings with their importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionSet {
    centroids: Vec<Centroid>,
    matrix: Option<EmbeddingMatrix>,
}

impl ExpansionSet {
    pub fn empty() -> Self {
        ExpansionSet {
            centroids: Vec::new(),
            matrix: None,
        }
    }

    pub fn new(centroids: Vec<Centroid>) -> Result<Self> {
        let Some(first) = centroids.first() else {
            return Ok(Self::empty());
        };
        let rows: Vec<&[f32]> = centroids.iter().map(|c| c.embedding.as_slice()).collect();
        let matrix = EmbeddingMatrix::from_rows(first.embedding.len(), &rows)?;
        Ok(ExpansionSet {
            centroids,
            matrix: Some(matrix),
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.as_ref().map_or(0, EmbeddingMatrix::dim)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Centroid> {
        self.centroids.iter()
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    /// Row-major embeddings of the set. Panics on an empty set.
    pub fn embeddings(&self) -> &EmbeddingMatrix {
        self.matrix.as_ref().expect("expansion set is empty")
    }
}

/// Maps every centroid to its most likely token (skipping `stoplist`) and
/// weights it by that token's IDF. A centroid whose neighbours are all
/// stoplisted keeps its raw argmax token but gets zero importance.
pub fn score_centroids(
    centroids: &EmbeddingMatrix,
    r: usize,
    index: &IndexedCorpus,
    stoplist: &BTreeSet<u32>,
) -> Result<Vec<Centroid>> {
    centroids
        .iter()
        .map(|v| {
            let dist = token_likelihood(v, r, index)?;
            let (token, importance) = match dist.argmax_excluding(stoplist) {
                Some(t) => (t, index.idf(t)),
                None => (dist.argmax(), IdfWeight::new(0.0)?),
            };
            Ok(Centroid {
                embedding: v.to_vec(),
                token,
                importance,
            })
        })
        .collect()
}

/// The `count` centroids with the highest importance, ties to the earlier
/// centroid. Output is ordered by importance.
pub fn top_scoring(centroids: Vec<Centroid>, count: usize) -> Result<ExpansionSet> {
    if count > centroids.len() {
        return Err(Error::config(format!(
            "cannot select {count} expansion embeddings from {} centroids",
            centroids.len()
        )));
    }
    let mut order: Vec<(usize, Centroid)> = centroids.into_iter().enumerate().collect();
    order.sort_by(|a, b| {
        b.1.importance
            .value()
            .total_cmp(&a.1.importance.value())
            .then(a.0.cmp(&b.0))
    });
    order.truncate(count);
    ExpansionSet::new(order.into_iter().map(|(_, c)| c).collect())
}

pub fn select_expansion(
    centroids: &EmbeddingMatrix,
    f_e: usize,
    r: usize,
    index: &IndexedCorpus,
    stoplist: &BTreeSet<u32>,
) -> Result<ExpansionSet> {
    if f_e > centroids.rows() {
        return Err(Error::config(format!(
            "f_e = {f_e} exceeds the {} available centroids",
            centroids.rows()
        )));
    }
    top_scoring(score_centroids(centroids, r, index, stoplist)?, f_e)
}
