//! Multi-vector dense retrieval with embedding-level pseudo-relevance
//! feedback.
//!
//! Documents and queries are bags of per-token embeddings. Retrieval gathers
//! candidates with an inverted-file ANN index and scores them exactly with
//! MaxSim. Feedback clusters the embeddings of the top documents, keeps the
//! centroids whose nearest token is rare in the collection, and adds them to
//! the query with IDF weights.

pub mod batch;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod format;
pub mod index;
pub mod kmeans;
pub mod prf;
pub mod scoring;
pub mod sweep;
pub mod synth;

pub use embedding::{Embedding, EmbeddingMatrix, QueryEmbeddings};
pub use error::{Error, Result};
pub use expansion::{Centroid, ExpansionSet, TokenDistribution};
pub use format::DocRecord;
pub use index::{DocId, IdfWeight, IndexBuildConfig, IndexedCorpus};
pub use prf::{colbert_e2e, prf_rank, prf_rerank, PrfConfig, Retrieval, SearchMode};
pub use scoring::{maxsim, prf_score, RankedList, ScoredDoc};
