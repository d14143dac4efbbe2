//! Python bindings: index building and loading, the three retrieval modes,
//! scoring primitives, KMeans, TREC evaluation and the synthetic generator.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use mvprf_core::batch::{load_queries, search_batch, RUN_DEPTH};
use mvprf_core::eval::{self, EvalConfig, Gain, Qrels, RelevanceThreshold, RunFile};
use mvprf_core::format::{read_cmve_file, read_id_map, sidecar_path};
use mvprf_core::synth::{generate, SynthSpec};
use mvprf_core::{
    Centroid, EmbeddingMatrix, ExpansionSet, IdfWeight, IndexBuildConfig, IndexedCorpus, QueryEmbeddings, SearchMode,
};

pyo3::create_exception!(mvprf, MvprfError, PyException);

fn to_py(e: mvprf_core::Error) -> PyErr {
    MvprfError::new_err(format!("[{}] {e}", e.category()))
}

fn matrix(rows: &[Vec<f32>]) -> PyResult<EmbeddingMatrix> {
    let dim = rows.first().map_or(0, Vec::len);
    EmbeddingMatrix::from_rows(dim, rows).map_err(to_py)
}

fn mode(name: &str) -> PyResult<SearchMode> {
    name.parse::<SearchMode>().map_err(to_py)
}

/// Feedback and retrieval settings; defaults f_b=3, K=24, f_e=10, beta=1.
#[pyclass(name = "PrfConfig", from_py_object)]
#[derive(Clone)]
struct PyPrfConfig {
    #[pyo3(get, set)]
    fb: usize,
    #[pyo3(get, set)]
    k: usize,
    #[pyo3(get, set)]
    fe: usize,
    #[pyo3(get, set)]
    beta: f64,
    #[pyo3(get, set)]
    r: usize,
    #[pyo3(get, set)]
    kprime: usize,
    #[pyo3(get, set)]
    nprobe: usize,
    #[pyo3(get, set)]
    seed: u64,
    #[pyo3(get, set)]
    stoplist: Vec<u32>,
}

#[pymethods]
impl PyPrfConfig {
    #[new]
    #[pyo3(signature = (fb=3, k=24, fe=10, beta=1.0, r=8, kprime=1000, nprobe=8, seed=0, stoplist=Vec::new()))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        fb: usize,
        k: usize,
        fe: usize,
        beta: f64,
        r: usize,
        kprime: usize,
        nprobe: usize,
        seed: u64,
        stoplist: Vec<u32>,
    ) -> PyResult<Self> {
        let cfg = PyPrfConfig {
            fb,
            k,
            fe,
            beta,
            r,
            kprime,
            nprobe,
            seed,
            stoplist,
        };
        cfg.core().validate().map_err(to_py)?;
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!(
            "PrfConfig(fb={}, k={}, fe={}, beta={}, r={}, kprime={}, nprobe={}, seed={})",
            self.fb, self.k, self.fe, self.beta, self.r, self.kprime, self.nprobe, self.seed
        )
    }
}

impl PyPrfConfig {
    fn core(&self) -> mvprf_core::PrfConfig {
        mvprf_core::PrfConfig {
            feedback_docs: self.fb,
            clusters: self.k,
            expansion_embeddings: self.fe,
            beta: self.beta,
            token_neighbours: self.r,
            k_prime: self.kprime,
            nprobe: self.nprobe,
            seed: self.seed,
            stoplist: self.stoplist.iter().copied().collect(),
            ..Default::default()
        }
    }
}

fn config_or_default(cfg: Option<PyPrfConfig>) -> mvprf_core::PrfConfig {
    cfg.map_or_else(Default::default, |c| c.core())
}

/// An immutable multi-vector index.
#[pyclass(name = "Index")]
struct PyIndex {
    inner: IndexedCorpus,
}

#[pymethods]
impl PyIndex {
    /// Builds an index from a CMVE1 corpus file and its optional docno sidecar.
    #[staticmethod]
    #[pyo3(signature = (corpus, docnos=None, seed=0))]
    fn build(corpus: PathBuf, docnos: Option<PathBuf>, seed: u64) -> PyResult<Self> {
        let file = read_cmve_file(&corpus).map_err(to_py)?;
        let side = docnos.or_else(|| Some(sidecar_path(&corpus)).filter(|p| p.exists()));
        let names = side.map(|p| read_id_map(&p)).transpose().map_err(to_py)?;
        let cfg = IndexBuildConfig {
            seed,
            ..Default::default()
        };
        let inner = IndexedCorpus::build(file.records, names.as_ref(), &cfg).map_err(to_py)?;
        Ok(PyIndex { inner })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyIndex {
            inner: IndexedCorpus::load(&dir).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (dir, overwrite=false))]
    fn save(&self, dir: PathBuf, overwrite: bool) -> PyResult<()> {
        self.inner.save(&dir, overwrite).map_err(to_py)
    }

    #[getter]
    fn doc_count(&self) -> usize {
        self.inner.doc_count()
    }

    #[getter]
    fn embedding_count(&self) -> usize {
        self.inner.embedding_count()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.quantizer().cell_count()
    }

    fn docno(&self, doc: u32) -> Option<String> {
        self.inner.docno(doc).map(str::to_string)
    }

    fn idf(&self, token: u32) -> f64 {
        self.inner.idf(token).value()
    }

    /// `(doc, score)` pairs of the approximate nearest documents of one embedding.
    fn ann_docs(&self, q: Vec<f32>, k_prime: usize, nprobe: usize) -> PyResult<Vec<(u32, f32)>> {
        self.inner.ann_docs_scored(&q, k_prime, nprobe).map_err(to_py)
    }

    /// Token ids of the `r` nearest stored embeddings.
    fn ann_tokens(&self, v: Vec<f32>, r: usize) -> PyResult<Vec<u32>> {
        self.inner.ann_tokens(&v, r).map_err(to_py)
    }

    fn doc_embeddings(&self, doc: u32) -> PyResult<Vec<Vec<f32>>> {
        let m = self.inner.doc_embeddings(doc).map_err(to_py)?;
        Ok(m.iter().map(<[f32]>::to_vec).collect())
    }

    /// Ranks documents for one query given as a list of embedding rows.
    /// Returns `(docno, score)` pairs, best first.
    #[pyo3(signature = (rows, mode="prf-rank", config=None, qid="q"))]
    fn search(
        &self,
        rows: Vec<Vec<f32>>,
        mode: &str,
        config: Option<PyPrfConfig>,
        qid: &str,
    ) -> PyResult<Vec<(String, f64)>> {
        let q = QueryEmbeddings::new(qid, matrix(&rows)?).map_err(to_py)?;
        let mut r =
            mvprf_core::prf::search(&q, &self.inner, self::mode(mode)?, &config_or_default(config)).map_err(to_py)?;
        r.ranking.truncate(RUN_DEPTH);
        Ok(r.ranking
            .iter()
            .map(|s| (self.inner.docno(s.doc).unwrap_or_default().to_string(), s.score))
            .collect())
    }

    /// Runs every query of a CMVE1 file; returns the TREC run text and the
    /// mean response time in milliseconds.
    #[pyo3(signature = (queries, mode="prf-rank", config=None, qids=None))]
    fn search_file(
        &self,
        queries: PathBuf,
        mode: &str,
        config: Option<PyPrfConfig>,
        qids: Option<PathBuf>,
    ) -> PyResult<(String, f64)> {
        let side = qids.or_else(|| Some(sidecar_path(&queries)).filter(|p| p.exists()));
        let names = side.map(|p| read_id_map(&p)).transpose().map_err(to_py)?;
        let qs = load_queries(&queries, names.as_ref()).map_err(to_py)?;
        let out = search_batch(
            &self.inner,
            &qs,
            self::mode(mode)?,
            &config_or_default(config),
            RUN_DEPTH,
        )
        .map_err(to_py)?;
        Ok((out.run.to_text(), out.mean_response_ms))
    }
}

/// Sum over query rows of the best dot product with any document row.
#[pyfunction]
fn maxsim(query: Vec<Vec<f32>>, doc: Vec<Vec<f32>>) -> PyResult<f64> {
    let q = QueryEmbeddings::new("q", matrix(&query)?).map_err(to_py)?;
    mvprf_core::maxsim(&q, &matrix(&doc)?).map_err(to_py)
}

/// MaxSim plus `beta` times the importance-weighted MaxSim of the
/// expansion embeddings, given as `(embedding, importance)` pairs.
#[pyfunction]
fn prf_score(query: Vec<Vec<f32>>, expansion: Vec<(Vec<f32>, f64)>, beta: f64, doc: Vec<Vec<f32>>) -> PyResult<f64> {
    let q = QueryEmbeddings::new("q", matrix(&query)?).map_err(to_py)?;
    let centroids = expansion
        .into_iter()
        .map(|(embedding, sigma)| {
            Ok(Centroid {
                embedding,
                token: 0,
                importance: IdfWeight::new(sigma).map_err(to_py)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let fe = ExpansionSet::new(centroids).map_err(to_py)?;
    mvprf_core::prf_score(&q, &fe, beta, &matrix(&doc)?).map_err(to_py)
}

type Clustering = (Vec<Vec<f32>>, Vec<u32>, Vec<f64>);

/// Returns `(centroids, assignments, inertia_per_iteration)`.
#[pyfunction]
#[pyo3(signature = (points, k, seed=0))]
fn kmeans(points: Vec<Vec<f32>>, k: usize, seed: u64) -> PyResult<Clustering> {
    let res = mvprf_core::kmeans::kmeans(&matrix(&points)?, k, seed).map_err(to_py)?;
    Ok((
        res.centroids.iter().map(<[f32]>::to_vec).collect(),
        res.assignments,
        res.inertia_history,
    ))
}

/// Mean MAP@1000, NDCG@10, MRR@10 and Recall@1000 of a run file.
#[pyfunction]
#[pyo3(signature = (run, qrels, min_grade=None, exp_gain=false))]
fn evaluate(run: PathBuf, qrels: PathBuf, min_grade: Option<u32>, exp_gain: bool) -> PyResult<BTreeMap<String, f64>> {
    let run = RunFile::read(&run).map_err(to_py)?;
    let qrels = Qrels::read(&qrels).map_err(to_py)?;
    let cfg = EvalConfig {
        threshold: min_grade.map_or(RelevanceThreshold::Auto, RelevanceThreshold::AtLeast),
        gain: if exp_gain { Gain::Exponential } else { Gain::Linear },
    };
    let ev = eval::evaluate(&run, &qrels, &cfg);
    Ok(ev.reports().iter().map(|r| (r.name.clone(), r.mean)).collect())
}

#[pyfunction]
fn holm_adjust(pvalues: Vec<f64>) -> PyResult<Vec<f64>> {
    eval::holm_adjust(&pvalues, pvalues.len()).map_err(to_py)
}

/// Writes a synthetic corpus into `out`; returns `(documents, queries)`.
#[pyfunction]
#[pyo3(signature = (out, preset="default", seed=0, topics=None, docs_per_topic=None, dim=None, noise=None))]
fn synth(
    out: PathBuf,
    preset: &str,
    seed: u64,
    topics: Option<usize>,
    docs_per_topic: Option<usize>,
    dim: Option<usize>,
    noise: Option<f64>,
) -> PyResult<(usize, usize)> {
    let mut spec = match preset {
        "default" => SynthSpec {
            seed,
            ..Default::default()
        },
        "benchmark" => SynthSpec::benchmark(seed),
        "sparse-topics" => SynthSpec::sparse_topics(seed),
        other => return Err(MvprfError::new_err(format!("[config] unknown preset {other:?}"))),
    };
    spec.n_topics = topics.unwrap_or(spec.n_topics);
    spec.docs_per_topic = docs_per_topic.unwrap_or(spec.docs_per_topic);
    spec.dim = dim.unwrap_or(spec.dim);
    spec.noise = noise.unwrap_or(spec.noise);
    let corpus = generate(&spec).map_err(to_py)?;
    corpus.write(&out).map_err(to_py)?;
    Ok((corpus.docs.len(), corpus.queries.len()))
}

#[pymodule]
fn mvprf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MvprfError", m.py().get_type::<MvprfError>())?;
    m.add_class::<PyIndex>()?;
    m.add_class::<PyPrfConfig>()?;
    m.add_function(wrap_pyfunction!(maxsim, m)?)?;
    m.add_function(wrap_pyfunction!(prf_score, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(holm_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    Ok(())
}
