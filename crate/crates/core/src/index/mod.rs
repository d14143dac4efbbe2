//! Immutable multi-vector index.
//!
//! Holds every document token embedding uncompressed for exact rescoring,
//! the token id of each stored embedding, per-token document frequencies and
//! an inverted-file coarse quantizer for approximate retrieval.

mod idf;
mod quantizer;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

pub use idf::{IdfTable, IdfWeight};
pub use quantizer::{default_cell_count, training_sample_size, CoarseQuantizer, MAX_CELLS};

use crate::embedding::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::format::{self, DocRecord};
use crate::kmeans::KMeansConfig;

/// Dense internal document id: the ingestion position of the document.
pub type DocId = u32;

pub const EMBEDDINGS_FILE: &str = "embeddings.cmve";
pub const DOCNOS_FILE: &str = "docnos.tsv";
pub const QUANTIZER_FILE: &str = "quantizer.bin";
pub const IDF_FILE: &str = "idf.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexBuildConfig {
    pub seed: u64,
    /// Fraction of embeddings sampled to train the quantizer.
    pub sample_rate: f64,
    /// Cell count; `None` picks `ceil(sqrt(total embeddings))`.
    pub cells: Option<usize>,
    pub kmeans: KMeansConfig,
}

impl Default for IndexBuildConfig {
    fn default() -> Self {
        IndexBuildConfig {
            seed: 0,
            sample_rate: 0.05,
            cells: None,
            kmeans: KMeansConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IndexedCorpus {
    embeddings: EmbeddingMatrix,
    /// `doc_offsets[d]..doc_offsets[d + 1]` are the rows of document `d`.
    doc_offsets: Vec<usize>,
    token_ids: Vec<u32>,
    embedding_docs: Vec<DocId>,
    record_ids: Vec<u64>,
    docnos: Vec<String>,
    idf: IdfTable,
    quantizer: CoarseQuantizer,
}

impl IndexedCorpus {
    /// Builds an index from documents in stream order. Documents without an
    /// entry in `docnos` are named by their numeric record id.
    pub fn build<I>(records: I, docnos: Option<&BTreeMap<u64, String>>, config: &IndexBuildConfig) -> Result<Self>
    where
        I: IntoIterator<Item = DocRecord>,
    {
        if !(config.sample_rate > 0.0 && config.sample_rate <= 1.0) {
            return Err(Error::config("quantizer sample rate must be in (0, 1]"));
        }
        let mut dim = None;
        let mut data = Vec::new();
        let mut doc_offsets = vec![0usize];
        let mut token_ids = Vec::new();
        let mut embedding_docs = Vec::new();
        let mut record_ids = Vec::new();
        let mut seen = HashSet::new();
        let mut idf = IdfTable::new();

        for rec in records {
            let d = *dim.get_or_insert(rec.embeddings.dim());
            if rec.embeddings.dim() != d {
                return Err(Error::DimensionMismatch {
                    record: rec.id.to_string(),
                    expected: d,
                    found: rec.embeddings.dim(),
                });
            }
            if rec.is_empty() {
                return Err(Error::InvalidValue(format!("document {} has no embeddings", rec.id)));
            }
            if !seen.insert(rec.id) {
                return Err(Error::InvalidValue(format!("duplicate document id {}", rec.id)));
            }
            if record_ids.len() >= u32::MAX as usize {
                return Err(Error::InvalidValue("too many documents".into()));
            }
            let doc = record_ids.len() as DocId;
            idf.add_document(&rec.token_ids);
            data.extend_from_slice(rec.embeddings.as_slice());
            embedding_docs.extend(std::iter::repeat_n(doc, rec.len()));
            token_ids.extend_from_slice(&rec.token_ids);
            doc_offsets.push(token_ids.len());
            record_ids.push(rec.id);
        }
        let dim = dim.ok_or(Error::Empty("embedding stream has no documents"))?;
        let embeddings = EmbeddingMatrix::from_raw(dim, data);
        let cells = config.cells.unwrap_or_else(|| default_cell_count(embeddings.rows()));
        let quantizer = CoarseQuantizer::train(
            &embeddings,
            &embedding_docs,
            cells,
            config.sample_rate,
            config.seed,
            &config.kmeans,
        )?;
        let docnos = record_ids
            .iter()
            .map(|id| {
                docnos
                    .and_then(|m| m.get(id).cloned())
                    .unwrap_or_else(|| id.to_string())
            })
            .collect();
        Ok(IndexedCorpus {
            embeddings,
            doc_offsets,
            token_ids,
            embedding_docs,
            record_ids,
            docnos,
            idf,
            quantizer,
        })
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn doc_count(&self) -> usize {
        self.record_ids.len()
    }

    pub fn embedding_count(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn quantizer(&self) -> &CoarseQuantizer {
        &self.quantizer
    }

    pub fn idf_table(&self) -> &IdfTable {
        &self.idf
    }

    pub fn idf(&self, token: u32) -> IdfWeight {
        self.idf.idf(token)
    }

    pub fn token_id(&self, embedding: usize) -> u32 {
        self.token_ids[embedding]
    }

    pub fn docno(&self, doc: DocId) -> Option<&str> {
        self.docnos.get(doc as usize).map(String::as_str)
    }

    pub fn record_id(&self, doc: DocId) -> Option<u64> {
        self.record_ids.get(doc as usize).copied()
    }

    pub fn doc_len(&self, doc: DocId) -> Option<usize> {
        let d = doc as usize;
        (d < self.doc_count()).then(|| self.doc_offsets[d + 1] - self.doc_offsets[d])
    }

    /// Raw row-major view of a document's stored embeddings.
    pub fn doc_slice(&self, doc: DocId) -> Result<&[f32]> {
        let d = doc as usize;
        if d >= self.doc_count() {
            return Err(Error::UnknownDoc(doc));
        }
        let dim = self.dim();
        Ok(&self.embeddings.as_slice()[self.doc_offsets[d] * dim..self.doc_offsets[d + 1] * dim])
    }

    /// Exact stored embeddings of a document, in ingestion order.
    pub fn doc_embeddings(&self, doc: DocId) -> Result<EmbeddingMatrix> {
        Ok(EmbeddingMatrix::from_raw(self.dim(), self.doc_slice(doc)?.to_vec()))
    }

    pub fn doc_token_ids(&self, doc: DocId) -> Result<&[u32]> {
        let d = doc as usize;
        if d >= self.doc_count() {
            return Err(Error::UnknownDoc(doc));
        }
        Ok(&self.token_ids[self.doc_offsets[d]..self.doc_offsets[d + 1]])
    }

    /// Approximate document retrieval for one embedding: scans the `nprobe`
    /// best cells and ranks each document by its best stored embedding found
    /// there. Returns up to `k_prime` `(doc, score)` pairs, best first, ties
    /// by ascending doc id.
    pub fn ann_docs_scored(&self, q: &[f32], k_prime: usize, nprobe: usize) -> Result<Vec<(DocId, f32)>> {
        self.check_dim(q.len())?;
        if k_prime == 0 {
            return Err(Error::config("k' must be at least 1"));
        }
        let dim = self.dim();
        let data = self.embeddings.as_slice();
        let mut best = vec![f32::NEG_INFINITY; self.doc_count()];
        let mut touched = Vec::new();
        for cell in self.quantizer.probe(q, nprobe) {
            let (ids, docs) = self.quantizer.list(cell);
            for (&e, &d) in ids.iter().zip(docs) {
                let e = e as usize;
                let s = dot(q, &data[e * dim..(e + 1) * dim]);
                let slot = &mut best[d as usize];
                if *slot == f32::NEG_INFINITY {
                    touched.push(d);
                }
                if s > *slot {
                    *slot = s;
                }
            }
        }
        let mut scored: Vec<(DocId, f32)> = touched.into_iter().map(|d| (d, best[d as usize])).collect();
        rank_by_score(&mut scored, k_prime);
        Ok(scored)
    }

    pub fn ann_docs(&self, q: &[f32], k_prime: usize, nprobe: usize) -> Result<Vec<DocId>> {
        Ok(self
            .ann_docs_scored(q, k_prime, nprobe)?
            .into_iter()
            .map(|(d, _)| d)
            .collect())
    }

    /// Token ids of the `r` stored embeddings with the highest inner product
    /// with `v`, nearest first (ties by ascending embedding position). Repeats
    /// are kept.
    pub fn ann_tokens(&self, v: &[f32], r: usize) -> Result<Vec<u32>> {
        self.check_dim(v.len())?;
        if r == 0 {
            return Err(Error::config("r must be at least 1"));
        }
        let mut scored: Vec<(u32, f32)> = self
            .embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| (i as u32, dot(v, e)))
            .collect();
        rank_by_score(&mut scored, r);
        Ok(scored.into_iter().map(|(i, _)| self.token_ids[i as usize]).collect())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                record: "probe".into(),
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    /// Writes the index directory. Fails if any index file already exists
    /// unless `overwrite` is set.
    pub fn save(&self, dir: &Path, overwrite: bool) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if !overwrite {
            for f in [EMBEDDINGS_FILE, DOCNOS_FILE, QUANTIZER_FILE, IDF_FILE] {
                let p = dir.join(f);
                if p.exists() {
                    return Err(Error::config(format!(
                        "{} already exists (use --force to overwrite)",
                        p.display()
                    )));
                }
            }
        }
        let records: Vec<DocRecord> = (0..self.doc_count() as DocId)
            .map(|d| DocRecord {
                id: self.record_ids[d as usize],
                token_ids: self.doc_token_ids(d).unwrap().to_vec(),
                embeddings: self.doc_embeddings(d).unwrap(),
            })
            .collect();
        format::write_cmve_file(&dir.join(EMBEDDINGS_FILE), self.dim(), &records)?;
        format::write_id_map(
            &dir.join(DOCNOS_FILE),
            self.record_ids
                .iter()
                .copied()
                .zip(self.docnos.iter().map(String::as_str)),
        )?;
        let write = |name: &str, bytes: Vec<u8>| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(p, e))
        };
        write(QUANTIZER_FILE, self.quantizer.encode())?;
        write(IDF_FILE, self.idf.encode())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let file = format::read_cmve_file(&dir.join(EMBEDDINGS_FILE))?;
        let names = format::read_id_map(&dir.join(DOCNOS_FILE))?;
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(p, e))
        };
        let quantizer = CoarseQuantizer::decode(&read(QUANTIZER_FILE)?)?;
        let idf = IdfTable::decode(&read(IDF_FILE)?)?;

        let dim = file.dim;
        let mut data = Vec::new();
        let mut doc_offsets = vec![0usize];
        let mut token_ids = Vec::new();
        let mut embedding_docs = Vec::new();
        let mut record_ids = Vec::new();
        let mut docnos = Vec::new();
        for (d, rec) in file.records.into_iter().enumerate() {
            embedding_docs.extend(std::iter::repeat_n(d as DocId, rec.len()));
            token_ids.extend_from_slice(&rec.token_ids);
            doc_offsets.push(token_ids.len());
            data.extend(rec.embeddings.into_vec());
            docnos.push(names.get(&rec.id).cloned().unwrap_or_else(|| rec.id.to_string()));
            record_ids.push(rec.id);
        }
        let index = IndexedCorpus {
            embeddings: EmbeddingMatrix::from_raw(dim, data),
            doc_offsets,
            token_ids,
            embedding_docs,
            record_ids,
            docnos,
            idf,
            quantizer,
        };
        index.validate()?;
        Ok(index)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format { offset: 0, message: m });
        if self.doc_count() == 0 {
            return bad("index holds no documents".into());
        }
        if self.quantizer.centroids().dim() != self.dim() {
            return bad("quantizer dimension differs from embeddings".into());
        }
        if self.idf.doc_count() != self.doc_count() as u64 {
            return bad("idf table document count differs from corpus".into());
        }
        let mut covered = vec![false; self.embedding_count()];
        for c in 0..self.quantizer.cell_count() {
            let (ids, docs) = self.quantizer.list(c);
            for (&e, &d) in ids.iter().zip(docs) {
                let e = e as usize;
                if e >= covered.len() || covered[e] || self.embedding_docs[e] != d {
                    return bad(format!("quantizer entry {e} in cell {c} is inconsistent"));
                }
                covered[e] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return bad("quantizer does not cover every stored embedding".into());
        }
        Ok(())
    }
}

/// Sorts by descending score, ascending id, and keeps the first `k`.
fn rank_by_score<I: Ord + Copy>(items: &mut Vec<(I, f32)>, k: usize) {
    let cmp = |a: &(I, f32), b: &(I, f32)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if items.len() > k {
        items.select_nth_unstable_by(k - 1, cmp);
        items.truncate(k);
    }
    items.sort_unstable_by(cmp);
}
