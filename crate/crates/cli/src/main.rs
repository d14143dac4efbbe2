use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mvprf_core::batch::{load_queries, search_batch, RUN_DEPTH};
use mvprf_core::eval::{
    evaluate, paired_ttest_holm, paired_values, EvalConfig, Evaluation, Gain, Qrels, RelevanceThreshold, RunFile,
};
use mvprf_core::format::{read_cmve_file, read_id_map, sidecar_path};
use mvprf_core::sweep::{sweep, to_csv, SweepGrid};
use mvprf_core::synth::{generate, SynthSpec};
use mvprf_core::{IndexBuildConfig, IndexedCorpus, PrfConfig, SearchMode};

/// Multi-vector dense retrieval with embedding-level pseudo-relevance feedback.
#[derive(Parser)]
#[command(name = "mvprf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index directory from a CMVE1 corpus file.
    Index(IndexArgs),
    /// Retrieve for every query and write a TREC run file.
    Search(SearchArgs),
    /// Score one or more run files against qrels.
    Eval(EvalArgs),
    /// Run and evaluate every point of a parameter grid, emitting CSV.
    Sweep(SweepArgs),
    /// Generate a planted-topic synthetic corpus, queries and qrels.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IndexArgs {
    corpus: PathBuf,
    out: PathBuf,
    /// `id<TAB>docno` sidecar; defaults to the corpus path with a .tsv extension.
    #[arg(long)]
    docnos: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coarse quantizer cells; defaults to ceil(sqrt(#embeddings)).
    #[arg(long)]
    cells: Option<usize>,
    /// Replace an existing index directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct PrfArgs {
    /// Feedback documents.
    #[arg(long, default_value_t = 3)]
    fb: usize,
    /// KMeans clusters.
    #[arg(long, default_value_t = 24)]
    k: usize,
    /// Expansion embeddings.
    #[arg(long, default_value_t = 10)]
    fe: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Nearest stored embeddings used to map a centroid to a token.
    #[arg(long, default_value_t = 8)]
    r: usize,
    /// Documents per ANN probe.
    #[arg(long, default_value_t = 1000)]
    kprime: usize,
    /// Inverted lists probed per embedding; 0 probes all of them.
    #[arg(long, default_value_t = 8)]
    nprobe: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated token ids never used as expansion tokens.
    #[arg(long, value_delimiter = ',')]
    stoplist: Vec<u32>,
}

impl PrfArgs {
    fn config(&self, index: &IndexedCorpus) -> PrfConfig {
        PrfConfig {
            feedback_docs: self.fb,
            clusters: self.k,
            expansion_embeddings: self.fe,
            beta: self.beta,
            token_neighbours: self.r,
            k_prime: self.kprime,
            nprobe: if self.nprobe == 0 {
                index.quantizer().cell_count()
            } else {
                self.nprobe
            },
            seed: self.seed,
            stoplist: self.stoplist.iter().copied().collect(),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    E2e,
    PrfRank,
    PrfRerank,
}

impl From<Mode> for SearchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::E2e => SearchMode::E2e,
            Mode::PrfRank => SearchMode::PrfRank,
            Mode::PrfRerank => SearchMode::PrfRerank,
        }
    }
}

#[derive(Args)]
struct QueryInput {
    index: PathBuf,
    queries: PathBuf,
    /// `id<TAB>qid` sidecar; defaults to the queries path with a .tsv
    /// extension, or numeric record ids when that file is absent.
    #[arg(long)]
    qids: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    input: QueryInput,
    #[arg(long, value_enum, default_value = "prf-rank")]
    mode: Mode,
    /// Run file to write; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    prf: PrfArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Table,
    Csv,
}

#[derive(Args)]
struct EvalOptions {
    /// Minimum grade counted relevant by MAP, MRR and recall; by default 2
    /// when any judgement reaches 2, otherwise 1.
    #[arg(long)]
    min_grade: Option<u32>,
    /// Use 2^grade - 1 gains in NDCG instead of the grade itself.
    #[arg(long)]
    exp_gain: bool,
}

impl EvalOptions {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            threshold: self
                .min_grade
                .map_or(RelevanceThreshold::Auto, RelevanceThreshold::AtLeast),
            gain: if self.exp_gain { Gain::Exponential } else { Gain::Linear },
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    qrels: PathBuf,
    /// Run files; with more than one, each is tested against the first.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
    #[command(flatten)]
    opts: EvalOptions,
    /// Significance level for the Holm-corrected paired t-tests.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: QueryInput,
    qrels: PathBuf,
    #[arg(long, value_enum, default_value = "prf-rank")]
    mode: Mode,
    /// Comma-separated feedback document counts to sweep.
    #[arg(long = "grid-fb", value_delimiter = ',')]
    grid_fb: Vec<usize>,
    #[arg(long = "grid-k", value_delimiter = ',')]
    grid_k: Vec<usize>,
    #[arg(long = "grid-fe", value_delimiter = ',')]
    grid_fe: Vec<usize>,
    #[arg(long = "grid-beta", value_delimiter = ',')]
    grid_beta: Vec<f64>,
    /// CSV file to write; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write NA in the MRT column so the CSV is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    prf: PrfArgs,
    #[command(flatten)]
    opts: EvalOptions,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Benchmark,
    SparseTopics,
}

#[derive(Args)]
struct SynthArgs {
    out: PathBuf,
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    docs_per_topic: Option<usize>,
    #[arg(long)]
    tokens_per_doc: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    queries_per_topic: Option<usize>,
    /// Embedding noise level.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    vocab: Option<usize>,
    /// Replace existing files in the output directory.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e
                .chain()
                .find_map(|c| c.downcast_ref::<mvprf_core::Error>())
                .map_or("other", |c| c.category());
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{category}]: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Search(a) => cmd_search(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn default_sidecar(given: Option<PathBuf>, data: &Path, required: bool) -> Result<Option<PathBuf>> {
    match given {
        Some(p) => Ok(Some(p)),
        None => {
            let p = sidecar_path(data);
            if p.exists() {
                Ok(Some(p))
            } else if required {
                bail!("no id sidecar at {}; pass it explicitly", p.display())
            } else {
                Ok(None)
            }
        }
    }
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    if a.out.exists() && !a.force && fs::read_dir(&a.out)?.next().is_some() {
        return Err(mvprf_core::Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            a.out.display()
        ))
        .into());
    }
    let file = read_cmve_file(&a.corpus)?;
    let docnos = match default_sidecar(a.docnos, &a.corpus, false)? {
        Some(p) => Some(read_id_map(&p)?),
        None => None,
    };
    let cfg = IndexBuildConfig {
        seed: a.seed,
        cells: a.cells,
        ..Default::default()
    };
    let index = IndexedCorpus::build(file.records, docnos.as_ref(), &cfg)?;
    index.save(&a.out, a.force)?;
    eprintln!(
        "indexed {} documents, {} embeddings, {} cells",
        index.doc_count(),
        index.embedding_count(),
        index.quantizer().cell_count()
    );
    Ok(())
}

fn load_input(input: &QueryInput) -> Result<(IndexedCorpus, Vec<mvprf_core::QueryEmbeddings>)> {
    let index = IndexedCorpus::load(&input.index)?;
    let qids = match default_sidecar(input.qids.clone(), &input.queries, false)? {
        Some(p) => Some(read_id_map(&p)?),
        None => None,
    };
    let queries = load_queries(&input.queries, qids.as_ref())?;
    if queries.is_empty() {
        return Err(mvprf_core::Error::Empty("query file has no records").into());
    }
    Ok((index, queries))
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let (index, queries) = load_input(&a.input)?;
    let cfg = a.prf.config(&index);
    let out = search_batch(&index, &queries, a.mode.into(), &cfg, RUN_DEPTH)?;
    emit(a.out.as_deref(), &out.run.to_text())?;
    eprintln!("queries: {}  MRT: {:.3} ms", queries.len(), out.mean_response_ms);
    Ok(())
}

fn print_eval(name: &str, ev: &Evaluation, format: OutputFormat) {
    let means: Vec<f64> = ev.reports().iter().map(|r| r.mean).collect();
    match format {
        OutputFormat::Table => println!(
            "{name:<32} {:>10.4} {:>10.4} {:>10.4} {:>12.4}",
            means[0], means[1], means[2], means[3]
        ),
        OutputFormat::Csv => println!("{name},{:.6},{:.6},{:.6},{:.6}", means[0], means[1], means[2], means[3]),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let qrels = Qrels::read(&a.qrels)?;
    let cfg = a.opts.config();
    let mut evals = Vec::new();
    for p in &a.runs {
        let run = RunFile::read(p)?;
        run.validate().with_context(|| format!("run file {}", p.display()))?;
        evals.push((p.display().to_string(), evaluate(&run, &qrels, &cfg)));
    }
    match a.format {
        OutputFormat::Table => println!(
            "{:<32} {:>10} {:>10} {:>10} {:>12}",
            "run", "MAP@1000", "NDCG@10", "MRR@10", "Recall@1000"
        ),
        OutputFormat::Csv => println!("run,MAP@1000,NDCG@10,MRR@10,Recall@1000"),
    }
    for (name, ev) in &evals {
        print_eval(name, ev, a.format);
        if !ev.map.unjudged.is_empty() {
            eprintln!("{name}: {} run queries have no judgements", ev.map.unjudged.len());
        }
        if !ev.map.undefined.is_empty() {
            eprintln!("{name}: {} queries have no relevant documents", ev.map.undefined.len());
        }
    }
    if evals.len() > 1 {
        // every metric of every run against the baseline forms one family
        let (_, base) = &evals[0];
        let mut pairs = Vec::new();
        let mut labels = Vec::new();
        for (name, ev) in &evals[1..] {
            for (b, r) in base.reports().iter().zip(ev.reports()) {
                let (x, y) = paired_values(r, b);
                labels.push(format!("{name} {}", r.name));
                pairs.push((x, y));
            }
        }
        let refs: Vec<(&[f64], &[f64])> = pairs.iter().map(|(x, y)| (x.as_slice(), y.as_slice())).collect();
        let cmps = paired_ttest_holm(&refs, a.alpha, refs.len())?;
        println!();
        for (label, c) in labels.iter().zip(cmps) {
            println!(
                "{label}: t={:.4} p={:.4} holm_p={:.4}{}",
                c.test.t,
                c.test.p,
                c.adjusted_p,
                if c.reject { " *" } else { "" }
            );
        }
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let (index, queries) = load_input(&a.input)?;
    let qrels = Qrels::read(&a.qrels)?;
    let base = a.prf.config(&index);
    let grid = SweepGrid {
        feedback_docs: a.grid_fb,
        clusters: a.grid_k,
        expansion_embeddings: a.grid_fe,
        beta: a.grid_beta,
    };
    let rows = sweep(&index, &queries, &qrels, a.mode.into(), &base, &grid, &a.opts.config())?;
    emit(a.out.as_deref(), &to_csv(&rows, !a.no_timing))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec = match a.preset {
        Preset::Default => SynthSpec {
            seed: a.seed,
            ..Default::default()
        },
        Preset::Benchmark => SynthSpec::benchmark(a.seed),
        Preset::SparseTopics => SynthSpec::sparse_topics(a.seed),
    };
    if let Some(v) = a.topics {
        spec.n_topics = v;
    }
    if let Some(v) = a.docs_per_topic {
        spec.docs_per_topic = v;
    }
    if let Some(v) = a.tokens_per_doc {
        spec.tokens_per_doc = v;
    }
    if let Some(v) = a.dim {
        spec.dim = v;
    }
    if let Some(v) = a.queries_per_topic {
        spec.queries_per_topic = v;
    }
    if let Some(v) = a.noise {
        spec.noise = v;
    }
    if let Some(v) = a.vocab {
        spec.vocab_per_topic = v;
    }
    let corpus_file = a.out.join(mvprf_core::synth::CORPUS_FILE);
    if corpus_file.exists() && !a.force {
        return Err(mvprf_core::Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            corpus_file.display()
        ))
        .into());
    }
    let corpus = generate(&spec)?;
    corpus.write(&a.out)?;
    eprintln!(
        "wrote {} documents and {} queries to {}",
        corpus.docs.len(),
        corpus.queries.len(),
        a.out.display()
    );
    Ok(())
}
