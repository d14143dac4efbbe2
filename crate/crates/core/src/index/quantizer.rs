use byteorder::{LittleEndian, WriteBytesExt};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::format::ByteReader;
use crate::kmeans::{kmeans_with, KMeansConfig};

pub const QUANTIZER_MAGIC: &[u8; 6] = b"CMVQ1\0";

pub const MAX_CELLS: usize = 65536;

/// `ceil(sqrt(n))` clamped to `[1, 65536]`.
pub fn default_cell_count(total_embeddings: usize) -> usize {
    ((total_embeddings as f64).sqrt().ceil() as usize).clamp(1, MAX_CELLS)
}

/// Size of the uniform training sample: `rate * n` rounded down, raised to
/// ten points per cell, never more than `n`.
pub fn training_sample_size(total_embeddings: usize, cells: usize, rate: f64) -> usize {
    let by_rate = (rate * total_embeddings as f64).floor() as usize;
    by_rate.max(10 * cells).min(total_embeddings)
}

/// Inverted-file coarse quantizer over inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseQuantizer {
    cells: EmbeddingMatrix,
    /// Per cell: stored embedding indices, ascending.
    lists: Vec<Vec<u64>>,
    /// Per cell: owning document of each entry in `lists`.
    list_docs: Vec<Vec<u32>>,
    trained_on: u64,
}

impl CoarseQuantizer {
    pub(crate) fn train(
        embeddings: &EmbeddingMatrix,
        embedding_docs: &[u32],
        cells: usize,
        sample_rate: f64,
        seed: u64,
        kmeans: &KMeansConfig,
    ) -> Result<Self> {
        let n = embeddings.rows();
        let cells = cells.clamp(1, MAX_CELLS.min(n));
        let take = training_sample_size(n, cells, sample_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, take).into_vec();
        picked.sort_unstable();
        let dim = embeddings.dim();
        let mut train = Vec::with_capacity(take * dim);
        for &i in &picked {
            train.extend_from_slice(embeddings.row(i));
        }
        let train = EmbeddingMatrix::from_raw(dim, train);
        let centroids = kmeans_with(&train, cells, seed ^ 0x5eed_ce11, kmeans)?.centroids;

        let cell_of: Vec<u32> = embeddings
            .as_slice()
            .par_chunks_exact(dim)
            .map(|e| best_cell(&centroids, e))
            .collect();
        let mut lists = vec![Vec::new(); cells];
        let mut list_docs = vec![Vec::new(); cells];
        for (i, &c) in cell_of.iter().enumerate() {
            lists[c as usize].push(i as u64);
            list_docs[c as usize].push(embedding_docs[i]);
        }
        Ok(CoarseQuantizer {
            cells: centroids,
            lists,
            list_docs,
            trained_on: take as u64,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.rows()
    }

    pub fn centroids(&self) -> &EmbeddingMatrix {
        &self.cells
    }

    /// Number of embeddings the centroids were trained on.
    pub fn trained_on(&self) -> u64 {
        self.trained_on
    }

    /// `(embedding index, doc id)` entries of one cell.
    pub fn list(&self, cell: usize) -> (&[u64], &[u32]) {
        (&self.lists[cell], &self.list_docs[cell])
    }

    /// The `nprobe` cells with the highest centroid inner product, best first
    /// (ties to the lower cell index). `nprobe` is clamped to the cell count.
    pub fn probe(&self, q: &[f32], nprobe: usize) -> Vec<usize> {
        let mut scored: Vec<(f32, usize)> = self
            .cells
            .iter()
            .enumerate()
            .map(|(c, centroid)| (dot(q, centroid), c))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(nprobe.max(1).min(self.cell_count()));
        scored.into_iter().map(|(_, c)| c).collect()
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(QUANTIZER_MAGIC);
        out.write_u32::<LittleEndian>(self.cells.dim() as u32).unwrap();
        out.write_u32::<LittleEndian>(self.cell_count() as u32).unwrap();
        out.write_u64::<LittleEndian>(self.trained_on).unwrap();
        for &v in self.cells.as_slice() {
            out.write_f32::<LittleEndian>(v).unwrap();
        }
        for (ids, docs) in self.lists.iter().zip(&self.list_docs) {
            out.write_u64::<LittleEndian>(ids.len() as u64).unwrap();
            for &i in ids {
                out.write_u64::<LittleEndian>(i).unwrap();
            }
            for &d in docs {
                out.write_u32::<LittleEndian>(d).unwrap();
            }
        }
        out
    }

    pub(crate) fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(6, "magic bytes")? != QUANTIZER_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic bytes, expected CMVQ1".into(),
            });
        }
        let dim = r.u32("dimension")? as usize;
        let at = r.offset();
        let count = r.u32("cell count")? as usize;
        if dim == 0 || count == 0 {
            return Err(Error::Format {
                offset: at,
                message: "quantizer needs a positive dimension and at least one cell".into(),
            });
        }
        let trained_on = r.u64("training sample size")?;
        let cells = EmbeddingMatrix::from_raw(dim, r.f32_vec(count * dim, "centroids")?);
        let mut lists = Vec::with_capacity(count);
        let mut list_docs = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u64("list length")? as usize;
            lists.push(r.u64_vec(len, "list entries")?);
            list_docs.push(r.u32_vec(len, "list documents")?);
        }
        if r.remaining() != 0 {
            return Err(Error::Format {
                offset: r.offset(),
                message: "trailing bytes in quantizer".into(),
            });
        }
        Ok(CoarseQuantizer {
            cells,
            lists,
            list_docs,
            trained_on,
        })
    }
}

fn best_cell(centroids: &EmbeddingMatrix, e: &[f32]) -> u32 {
    let mut best = (0u32, f32::NEG_INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let s = dot(e, centroid);
        if s > best.1 {
            best = (c as u32, s);
        }
    }
    best.0
}
