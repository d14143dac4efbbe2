//! Planted-topic synthetic corpora in the engine's own file formats.
//!
//! Geometry: every topic owns a unit anchor, and all anchors (plus one
//! stopword anchor) are orthonormal. A topic token's direction is its anchor
//! plus `token_spread` times a unit offset orthogonal to every anchor. Each
//! stored embedding is its token direction plus isotropic noise of norm about
//! `noise`, renormalised. Topic tokens within a document are Zipf
//! distributed, and every document holds each stopword once.
//!
//! Queries carry `query_terms` rows drawn from the topic vocabulary and are
//! padded to `query_len` rows with lightly perturbed copies of the topic
//! anchor (the mask-token analogue). Same-topic documents are judged grade 2;
//! a fixed share per topic are "marginal" documents whose anchor component is
//! damped, judged grade 1.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::{EmbeddingMatrix, QueryEmbeddings};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::format::{self, DocRecord};

pub const MAX_DOC_TOKENS: usize = 180;

pub const CORPUS_FILE: &str = "corpus.cmve";
pub const CORPUS_IDS_FILE: &str = "corpus.tsv";
pub const QUERIES_FILE: &str = "queries.cmve";
pub const QUERY_IDS_FILE: &str = "queries.tsv";
pub const QRELS_FILE: &str = "qrels.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_topics: usize,
    pub docs_per_topic: usize,
    pub tokens_per_doc: usize,
    pub dim: usize,
    pub queries_per_topic: usize,
    /// Norm of the per-embedding noise relative to the unit token direction.
    pub noise: f64,
    pub vocab_per_topic: usize,
    pub stopwords: usize,
    /// Vocabulary rows per query; the rest are mask rows.
    pub query_terms: usize,
    pub query_len: usize,
    /// Weight of the token-specific offset against the topic anchor.
    pub token_spread: f64,
    /// Share of each topic's documents generated as marginal (grade 1).
    pub marginal_fraction: f64,
    /// Anchor weight of marginal documents' tokens (1 for ordinary ones).
    pub marginal_anchor: f64,
    /// Mask-row noise as a fraction of `noise`.
    pub mask_noise: f64,
    pub zipf_exponent: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_topics: 20,
            docs_per_topic: 200,
            tokens_per_doc: 30,
            dim: 128,
            queries_per_topic: 2,
            noise: 0.5,
            vocab_per_topic: 50,
            stopwords: 4,
            query_terms: 4,
            query_len: 32,
            token_spread: 2.0,
            marginal_fraction: 0.2,
            marginal_anchor: 0.5,
            mask_noise: 0.25,
            zipf_exponent: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_topics", self.n_topics),
            ("docs_per_topic", self.docs_per_topic),
            ("tokens_per_doc", self.tokens_per_doc),
            ("dim", self.dim),
            ("queries_per_topic", self.queries_per_topic),
            ("vocab_per_topic", self.vocab_per_topic),
            ("stopwords", self.stopwords),
            ("query_terms", self.query_terms),
            ("query_len", self.query_len),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.tokens_per_doc > MAX_DOC_TOKENS {
            return Err(Error::config(format!("tokens_per_doc must be <= {MAX_DOC_TOKENS}")));
        }
        if self.tokens_per_doc <= self.stopwords {
            return Err(Error::config("tokens_per_doc must exceed the stopword count"));
        }
        if self.query_terms > self.query_len || self.query_terms > self.vocab_per_topic {
            return Err(Error::config(
                "query_terms must not exceed query_len or vocab_per_topic",
            ));
        }
        let reals = [
            ("noise", self.noise),
            ("token_spread", self.token_spread),
            ("marginal_anchor", self.marginal_anchor),
            ("mask_noise", self.mask_noise),
            ("zipf_exponent", self.zipf_exponent),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be a non-negative number")));
            }
        }
        if !(0.0..=1.0).contains(&self.marginal_fraction) {
            return Err(Error::config("marginal_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// 20 topics × 200 documents at a noise level where exact MaxSim reaches
    /// MAP ≈ 0.6 and feedback has room to help.
    pub fn benchmark(seed: u64) -> Self {
        SynthSpec {
            seed,
            dim: 64,
            noise: 3.5,
            query_terms: 2,
            ..Default::default()
        }
    }

    /// Many small topics (10 documents each), so deep feedback sets reach
    /// into other topics and drift.
    pub fn sparse_topics(seed: u64) -> Self {
        SynthSpec {
            seed,
            n_topics: 50,
            docs_per_topic: 10,
            queries_per_topic: 6,
            dim: 64,
            noise: 3.0,
            query_terms: 2,
            ..Default::default()
        }
    }

    pub fn doc_count(&self) -> usize {
        self.n_topics * self.docs_per_topic
    }

    pub fn mask_token(&self) -> u32 {
        (self.stopwords + self.n_topics * self.vocab_per_topic) as u32
    }

    pub fn topic_token(&self, topic: usize, j: usize) -> u32 {
        (self.stopwords + topic * self.vocab_per_topic + j) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub dim: usize,
    pub docs: Vec<DocRecord>,
    pub docnos: BTreeMap<u64, String>,
    pub queries: Vec<DocRecord>,
    pub qids: BTreeMap<u64, String>,
    pub qrels: Qrels,
    /// Topic of every document, by record id.
    pub doc_topics: Vec<usize>,
}

impl SynthCorpus {
    pub fn query_embeddings(&self) -> Vec<QueryEmbeddings> {
        self.queries
            .iter()
            .map(|q| QueryEmbeddings {
                id: self.qids[&q.id].clone(),
                rows: q.embeddings.clone(),
            })
            .collect()
    }

    /// Writes corpus, queries, their id sidecars and the qrels into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        format::write_cmve_file(&dir.join(CORPUS_FILE), self.dim, &self.docs)?;
        format::write_id_map(
            &dir.join(CORPUS_IDS_FILE),
            self.docnos.iter().map(|(&k, v)| (k, v.as_str())),
        )?;
        format::write_cmve_file(&dir.join(QUERIES_FILE), self.dim, &self.queries)?;
        format::write_id_map(
            &dir.join(QUERY_IDS_FILE),
            self.qids.iter().map(|(&k, v)| (k, v.as_str())),
        )?;
        let p = dir.join(QRELS_FILE);
        fs::write(&p, self.qrels.to_text()).map_err(|e| Error::io(p, e))
    }
}

struct Geometry {
    dim: usize,
    anchors: Vec<Vec<f64>>,
    stop_anchor: Vec<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

impl Geometry {
    /// Orthonormal anchors by Gram-Schmidt when they fit in the space,
    /// independent random unit vectors otherwise.
    fn new(rng: &mut ChaCha8Rng, n_topics: usize, dim: usize) -> Self {
        let orthogonal = n_topics < dim;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_topics + 1);
        for _ in 0..=n_topics {
            let mut v = gaussian(rng, dim);
            if orthogonal {
                project_out(&mut v, &basis);
            }
            normalize(&mut v);
            basis.push(v);
        }
        let stop_anchor = basis.pop().unwrap();
        Geometry {
            dim,
            anchors: basis,
            stop_anchor,
        }
    }

    fn all_anchors(&self) -> Vec<Vec<f64>> {
        let mut all = self.anchors.clone();
        all.push(self.stop_anchor.clone());
        all
    }

    /// Unit offset orthogonal to every anchor (when they are orthonormal).
    fn offset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = gaussian(rng, self.dim);
        if self.anchors.len() + 1 < self.dim {
            project_out(&mut v, &self.all_anchors());
        }
        normalize(&mut v);
        v
    }

    /// `normalize(anchor_weight * anchor + spread * offset)`
    fn direction(anchor: &[f64], anchor_weight: f64, offset: &[f64], spread: f64) -> Vec<f64> {
        let mut v: Vec<f64> = anchor
            .iter()
            .zip(offset)
            .map(|(a, o)| anchor_weight * a + spread * o)
            .collect();
        normalize(&mut v);
        v
    }

    /// `direction + noise * n` renormalised, with `n` isotropic of unit
    /// expected norm.
    fn perturb(&self, rng: &mut ChaCha8Rng, direction: &[f64], noise: f64) -> Vec<f32> {
        let scale = noise / (self.dim as f64).sqrt();
        let mut v: Vec<f64> = direction
            .iter()
            .map(|x| x + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        normalize(&mut v);
        v.into_iter().map(|x| x as f32).collect()
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let geo = Geometry::new(&mut rng, spec.n_topics, spec.dim);

    let stop_offsets: Vec<Vec<f64>> = (0..spec.stopwords).map(|_| geo.offset(&mut rng)).collect();
    let topic_offsets: Vec<Vec<Vec<f64>>> = (0..spec.n_topics)
        .map(|_| (0..spec.vocab_per_topic).map(|_| geo.offset(&mut rng)).collect())
        .collect();
    let stop_dirs: Vec<Vec<f64>> = stop_offsets
        .iter()
        .map(|o| Geometry::direction(&geo.stop_anchor, 1.0, o, spec.token_spread))
        .collect();
    let topic_dirs: Vec<Vec<Vec<f64>>> = (0..spec.n_topics)
        .map(|t| {
            topic_offsets[t]
                .iter()
                .map(|o| Geometry::direction(&geo.anchors[t], 1.0, o, spec.token_spread))
                .collect()
        })
        .collect();
    let zipf = WeightedIndex::new((0..spec.vocab_per_topic).map(|j| 1.0 / ((j + 1) as f64).powf(spec.zipf_exponent)))
        .map_err(|e| Error::config(format!("zipf weights: {e}")))?;

    // (topic, marginal) for every document, shuffled so ids carry no topic
    let marginal_per_topic = (spec.marginal_fraction * spec.docs_per_topic as f64).round() as usize;
    let mut layout = Vec::with_capacity(spec.doc_count());
    for t in 0..spec.n_topics {
        let mut flags = vec![false; spec.docs_per_topic];
        flags[..marginal_per_topic].iter_mut().for_each(|f| *f = true);
        flags.shuffle(&mut rng);
        layout.extend(flags.into_iter().map(|m| (t, m)));
    }
    layout.shuffle(&mut rng);

    let mut docs = Vec::with_capacity(layout.len());
    let mut docnos = BTreeMap::new();
    let mut doc_topics = Vec::with_capacity(layout.len());
    let width = spec.doc_count().to_string().len();
    for (id, &(topic, marginal)) in layout.iter().enumerate() {
        let mut tokens: Vec<(u32, Vec<f64>)> = Vec::with_capacity(spec.tokens_per_doc);
        for (s, dir) in stop_dirs.iter().enumerate() {
            tokens.push((s as u32, dir.clone()));
        }
        while tokens.len() < spec.tokens_per_doc {
            let j = zipf.sample(&mut rng);
            let dir = if marginal {
                Geometry::direction(
                    &geo.anchors[topic],
                    spec.marginal_anchor,
                    &topic_offsets[topic][j],
                    spec.token_spread,
                )
            } else {
                topic_dirs[topic][j].clone()
            };
            tokens.push((spec.topic_token(topic, j), dir));
        }
        tokens.shuffle(&mut rng);
        let mut ids = Vec::with_capacity(tokens.len());
        let mut data = Vec::with_capacity(tokens.len() * spec.dim);
        for (tok, dir) in &tokens {
            ids.push(*tok);
            data.extend(geo.perturb(&mut rng, dir, spec.noise));
        }
        docs.push(DocRecord::new(id as u64, ids, EmbeddingMatrix::new(spec.dim, data)?)?);
        docnos.insert(id as u64, format!("D{id:0width$}"));
        doc_topics.push(topic);
    }

    let mut queries = Vec::new();
    let mut qids = BTreeMap::new();
    let mut qrels = Qrels::new();
    for (topic, dirs) in topic_dirs.iter().enumerate() {
        for _ in 0..spec.queries_per_topic {
            let qid = queries.len() as u64;
            let terms = rand::seq::index::sample(&mut rng, spec.vocab_per_topic, spec.query_terms);
            let mut ids = Vec::with_capacity(spec.query_len);
            let mut data = Vec::with_capacity(spec.query_len * spec.dim);
            for j in terms.iter() {
                ids.push(spec.topic_token(topic, j));
                data.extend(geo.perturb(&mut rng, &dirs[j], spec.noise));
            }
            while ids.len() < spec.query_len {
                ids.push(spec.mask_token());
                data.extend(geo.perturb(&mut rng, &geo.anchors[topic], spec.mask_noise * spec.noise));
            }
            queries.push(DocRecord::new(qid, ids, EmbeddingMatrix::new(spec.dim, data)?)?);
            let name = format!("Q{qid}");
            for (d, &(t, marginal)) in layout.iter().enumerate() {
                if t == topic {
                    qrels.insert(&name, &docnos[&(d as u64)], if marginal { 1 } else { 2 })?;
                }
            }
            qids.insert(qid, name);
        }
    }

    Ok(SynthCorpus {
        dim: spec.dim,
        docs,
        docnos,
        queries,
        qids,
        qrels,
        doc_topics,
    })
}
