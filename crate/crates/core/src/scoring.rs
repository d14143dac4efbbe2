//! Exact late-interaction scoring.

use crate::embedding::{dot, EmbeddingMatrix, QueryEmbeddings};
use crate::error::{Error, Result};
use crate::expansion::ExpansionSet;
use crate::index::DocId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub doc: DocId,
    pub score: f64,
}

/// Documents ordered by descending score, ties by ascending doc id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedList(Vec<ScoredDoc>);

impl RankedList {
    pub fn from_unsorted(mut docs: Vec<ScoredDoc>) -> Self {
        docs.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc)));
        RankedList(docs)
    }

    pub fn as_slice(&self) -> &[ScoredDoc] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoredDoc> {
        self.0.iter()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.0.iter().map(|s| s.doc)
    }

    pub fn truncate(&mut self, depth: usize) {
        self.0.truncate(depth);
    }

    pub fn into_vec(self) -> Vec<ScoredDoc> {
        self.0
    }
}

/// For every probe row, the maximum inner product against any document row.
///
/// Walks the document once, keeping one running maximum per probe, so each
/// document row is loaded a single time.
pub(crate) fn max_per_row(probes: &[f32], doc: &[f32], dim: usize) -> Vec<f32> {
    let n = probes.len() / dim;
    let mut best = vec![f32::NEG_INFINITY; n];
    for d in doc.chunks_exact(dim) {
        for (b, p) in best.iter_mut().zip(probes.chunks_exact(dim)) {
            let s = dot(p, d);
            if s > *b {
                *b = s;
            }
        }
    }
    best
}

pub(crate) fn maxsim_raw(query: &[f32], doc: &[f32], dim: usize) -> f64 {
    max_per_row(query, doc, dim).into_iter().map(f64::from).sum()
}

fn check(q_dim: usize, doc: &EmbeddingMatrix) -> Result<()> {
    if doc.is_empty() {
        return Err(Error::Empty("document has no embeddings"));
    }
    if doc.dim() != q_dim {
        return Err(Error::DimensionMismatch {
            record: "document".into(),
            expected: q_dim,
            found: doc.dim(),
        });
    }
    Ok(())
}

/// Sum over query rows of the best inner product with any document row.
pub fn maxsim(q: &QueryEmbeddings, doc: &EmbeddingMatrix) -> Result<f64> {
    check(q.dim(), doc)?;
    Ok(maxsim_raw(q.rows.as_slice(), doc.as_slice(), doc.dim()))
}

/// The expansion-weighted part: `sum_i sigma_i * max_j <v_i, d_j>`.
pub(crate) fn expansion_score_raw(fe: &ExpansionSet, doc: &[f32], dim: usize) -> f64 {
    if fe.is_empty() {
        return 0.0;
    }
    let best = max_per_row(fe.embeddings().as_slice(), doc, dim);
    fe.iter()
        .zip(best)
        .map(|(c, m)| c.importance.value() * f64::from(m))
        .sum()
}

pub(crate) fn prf_score_raw(query: &[f32], fe: &ExpansionSet, beta: f64, doc: &[f32], dim: usize) -> f64 {
    let base = maxsim_raw(query, doc, dim);
    if beta == 0.0 || fe.is_empty() {
        return base;
    }
    base + beta * expansion_score_raw(fe, doc, dim)
}

/// MaxSim plus `beta` times the importance-weighted best match of every
/// expansion embedding.
pub fn prf_score(q: &QueryEmbeddings, fe: &ExpansionSet, beta: f64, doc: &EmbeddingMatrix) -> Result<f64> {
    check(q.dim(), doc)?;
    check_beta(beta)?;
    if !fe.is_empty() && fe.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            record: "expansion set".into(),
            expected: q.dim(),
            found: fe.dim(),
        });
    }
    Ok(prf_score_raw(q.rows.as_slice(), fe, beta, doc.as_slice(), doc.dim()))
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::config(format!("beta must be a non-negative number, got {beta}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::Centroid;
    use crate::index::IdfWeight;

    fn query(rows: &[&[f32]]) -> QueryEmbeddings {
        QueryEmbeddings::new("q", EmbeddingMatrix::from_rows(rows[0].len(), rows).unwrap()).unwrap()
    }

    fn doc(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows[0].len(), rows).unwrap()
    }

    fn naive(q: &QueryEmbeddings, d: &EmbeddingMatrix) -> f64 {
        let mut total = 0.0;
        for qi in q.rows.iter() {
            let mut best = f64::NEG_INFINITY;
            for dj in d.iter() {
                let s: f64 = qi.iter().zip(dj).map(|(a, b)| *a as f64 * *b as f64).sum();
                best = best.max(s);
            }
            total += best;
        }
        total
    }

    #[test]
    fn self_match_unit_vector() {
        let e = [0.6f32, 0.8];
        assert!((maxsim(&query(&[&e]), &doc(&[&e])).unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn hand_evaluated() {
        let q = query(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let d = doc(&[&[0.5, 0.5], &[1.0, 0.0]]);
        assert_eq!(maxsim(&q, &d).unwrap(), 1.5);
    }

    #[test]
    fn basis_rows_self_match() {
        let rows: Vec<Vec<f32>> = (0..32)
            .map(|i| (0..32).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let refs: Vec<&[f32]> = rows.iter().map(|r| r.as_slice()).collect();
        assert_eq!(maxsim(&query(&refs), &doc(&refs)).unwrap(), 32.0);
    }

    #[test]
    fn empty_doc_rejected() {
        let q = query(&[&[1.0, 0.0]]);
        let d = EmbeddingMatrix::new(2, vec![]).unwrap();
        assert!(matches!(maxsim(&q, &d), Err(Error::Empty(_))));
    }

    #[test]
    fn prf_score_hand_evaluated() {
        let q = query(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let d = doc(&[&[0.5, 0.5], &[1.0, 0.0]]);
        let fe = ExpansionSet::new(vec![Centroid {
            embedding: vec![1.0, 0.0],
            token: 9,
            importance: IdfWeight::new(2.0).unwrap(),
        }])
        .unwrap();
        assert_eq!(prf_score(&q, &fe, 0.5, &d).unwrap(), 2.5);
        assert_eq!(prf_score(&q, &fe, 0.0, &d).unwrap(), 1.5);
        assert_eq!(prf_score(&q, &ExpansionSet::empty(), 1.0, &d).unwrap(), 1.5);
        assert!(prf_score(&q, &fe, -0.1, &d).is_err());
    }

    #[test]
    fn production_path_matches_naive() {
        let unit = |n: usize, mul: usize, modu: usize| {
            let mut v: Vec<f32> = (0..n * 128).map(|i| ((i * mul % modu) as f32 / 50.0) - 1.0).collect();
            for row in v.chunks_exact_mut(128) {
                let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
                row.iter_mut().for_each(|x| *x /= norm);
            }
            v
        };
        let q = QueryEmbeddings::new("q", EmbeddingMatrix::new(128, unit(32, 37, 101)).unwrap()).unwrap();
        let d = EmbeddingMatrix::new(128, unit(57, 53, 97)).unwrap();
        assert!((maxsim(&q, &d).unwrap() - naive(&q, &d)).abs() < 1e-5);
    }
}
