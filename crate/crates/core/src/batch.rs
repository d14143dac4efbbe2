//! Running a whole query set and collecting a TREC run.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::embedding::QueryEmbeddings;
use crate::error::{Error, Result};
use crate::eval::RunFile;
use crate::format;
use crate::index::{DocId, IndexedCorpus};
use crate::prf::{search, PrfConfig, SearchMode};

/// Ranked results are cut to this depth in run files.
pub const RUN_DEPTH: usize = 1000;

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub run: RunFile,
    /// Mean wall-clock time per query in milliseconds (retrieval only).
    pub mean_response_ms: f64,
    /// Scored candidate set of every query, by query id.
    pub candidates: BTreeMap<String, Vec<DocId>>,
}

/// `<mode>-<16 hex digits>`, the digits hashing the mode and configuration.
pub fn run_tag(mode: SearchMode, cfg: &PrfConfig) -> String {
    let text = format!("{}|{}", mode.name(), cfg.fingerprint());
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{}-{h:016x}", mode.name())
}

/// Reads a query file. Query ids come from the `id<TAB>qid` sidecar when
/// `ids` is given, otherwise the numeric record id is used.
pub fn load_queries(path: &Path, ids: Option<&BTreeMap<u64, String>>) -> Result<Vec<QueryEmbeddings>> {
    let file = format::read_cmve_file(path)?;
    file.records
        .into_iter()
        .map(|r| {
            let id = match ids {
                Some(map) => map
                    .get(&r.id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidValue(format!("query record {} has no id in the sidecar", r.id)))?,
                None => r.id.to_string(),
            };
            Ok(QueryEmbeddings { id, rows: r.embeddings })
        })
        .collect()
}

/// Runs every query (in parallel) and returns the run ordered by query id.
pub fn search_batch(
    index: &IndexedCorpus,
    queries: &[QueryEmbeddings],
    mode: SearchMode,
    cfg: &PrfConfig,
    depth: usize,
) -> Result<BatchResult> {
    cfg.validate()?;
    let outputs = queries
        .par_iter()
        .map(|q| {
            let start = Instant::now();
            let mut r = search(q, index, mode, cfg)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            r.ranking.truncate(depth);
            Ok((q.id.clone(), r, elapsed))
        })
        .collect::<Result<Vec<_>>>()?;

    let tag = run_tag(mode, cfg);
    let mut run = RunFile::new();
    let mut candidates = BTreeMap::new();
    let mut total_ms = 0.0;
    for (qid, r, ms) in &outputs {
        total_ms += ms;
        let ranking = r.ranking.iter().map(|s| {
            let docno = index.docno(s.doc).expect("ranked doc exists");
            (docno.to_string(), s.score)
        });
        run.push_ranking(qid, &tag, ranking)?;
        candidates.insert(qid.clone(), r.candidates.clone());
    }
    let mean_response_ms = if outputs.is_empty() {
        0.0
    } else {
        total_ms / outputs.len() as f64
    };
    Ok(BatchResult {
        run,
        mean_response_ms,
        candidates,
    })
}
