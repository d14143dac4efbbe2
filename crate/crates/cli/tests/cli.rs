use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mvprf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvprf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mvprf(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small synthetic corpus and its index under `root`.
fn fixture(root: &Path) {
    let data = root.join("data");
    ok(&[
        "synth",
        p(&data),
        "--topics",
        "4",
        "--docs-per-topic",
        "10",
        "--dim",
        "16",
        "--tokens-per-doc",
        "8",
        "--vocab",
        "10",
        "--noise",
        "0.5",
    ]);
    ok(&["index", p(&data.join("corpus.cmve")), p(&root.join("idx"))]);
}

#[test]
fn index_search_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let queries = root.join("data/queries.cmve");
    let qrels = root.join("data/qrels.txt");
    for mode in ["e2e", "prf-rank", "prf-rerank"] {
        let run = root.join(format!("{mode}.run"));
        let out = ok(&[
            "search",
            p(&root.join("idx")),
            p(&queries),
            "--mode",
            mode,
            "-o",
            p(&run),
        ]);
        assert!(stderr_line(&out).contains("MRT"));
        let text = fs::read_to_string(&run).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first.split_whitespace().count(), 6);
        assert!(first.split_whitespace().nth(5).unwrap().starts_with(mode));
        let out = ok(&["eval", p(&qrels), p(&run), "--format", "csv"]);
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.starts_with("run,MAP@1000,NDCG@10,MRR@10,Recall@1000\n"));
        assert_eq!(stdout.lines().count(), 2);
    }
}

#[test]
fn beta_zero_rerank_matches_e2e() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let idx = root.join("idx");
    let queries = root.join("data/queries.cmve");
    let e2e = ok(&["search", p(&idx), p(&queries), "--mode", "e2e"]).stdout;
    let rr = ok(&["search", p(&idx), p(&queries), "--mode", "prf-rerank", "--beta", "0"]).stdout;
    let strip = |b: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(b)
            .lines()
            .map(|l| l.rsplit_once(' ').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&e2e), strip(&rr));
}

#[test]
fn rebuilding_gives_identical_index_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let corpus = root.join("data/corpus.cmve");
    ok(&["index", p(&corpus), p(&root.join("idx2"))]);
    for name in ["embeddings.cmve", "docnos.tsv", "quantizer.bin", "idf.bin"] {
        assert_eq!(
            fs::read(root.join("idx").join(name)).unwrap(),
            fs::read(root.join("idx2").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let corpus = root.join("data/corpus.cmve");
    let out = mvprf(&["index", p(&corpus), p(&root.join("idx"))]);
    assert!(!out.status.success());
    let line = stderr_line(&out);
    assert!(line.starts_with("error[config]:") && line.contains("--force"), "{line}");
    ok(&["index", p(&corpus), p(&root.join("idx")), "--force"]);
}

#[test]
fn corrupt_and_truncated_corpus_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let bytes = fs::read(root.join("data/corpus.cmve")).unwrap();

    let truncated = root.join("trunc.cmve");
    fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    let out = mvprf(&["index", p(&truncated), p(&root.join("a"))]);
    assert!(!out.status.success());
    let line = stderr_line(&out);
    assert!(
        line.starts_with("error[format]:") && line.contains("byte offset"),
        "{line}"
    );
    assert_eq!(line.lines().count(), 1);

    let mut bad = bytes.clone();
    bad[0] = b'X';
    let corrupt = root.join("bad.cmve");
    fs::write(&corrupt, bad).unwrap();
    let out = mvprf(&["index", p(&corrupt), p(&root.join("b"))]);
    assert!(stderr_line(&out).starts_with("error[format]: format error at byte offset 0"));
}

#[test]
fn query_dimension_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let other = root.join("other");
    ok(&[
        "synth",
        p(&other),
        "--topics",
        "2",
        "--docs-per-topic",
        "2",
        "--dim",
        "8",
        "--vocab",
        "4",
    ]);
    let out = mvprf(&["search", p(&root.join("idx")), p(&other.join("queries.cmve"))]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("error[dimension]:"));
}

#[test]
fn sweep_csv_shape_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            p(&root.join("idx")).to_string(),
            p(&root.join("data/queries.cmve")).to_string(),
            p(&root.join("data/qrels.txt")).to_string(),
            "--mode".into(),
            "prf-rerank".into(),
            "--grid-beta".into(),
            "0,0.5,1".into(),
            "--no-timing".into(),
            "-o".into(),
            p(out).to_string(),
        ]
    };
    let (a, b) = (root.join("a.csv"), root.join("b.csv"));
    for out in [&a, &b] {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "fb,k,fe,beta,MAP,NDCG@10,MRR@10,Recall@1000,MRT_ms");

    // the beta = 0 row carries the e2e metrics
    let e2e = root.join("e2e.run");
    ok(&[
        "search",
        p(&root.join("idx")),
        p(&root.join("data/queries.cmve")),
        "--mode",
        "e2e",
        "-o",
        p(&e2e),
    ]);
    let ev = ok(&["eval", p(&root.join("data/qrels.txt")), p(&e2e), "--format", "csv"]).stdout;
    let ev = String::from_utf8(ev).unwrap();
    let e2e_metrics: Vec<&str> = ev.lines().nth(1).unwrap().split(',').skip(1).collect();
    let row0: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row0[3], "0");
    assert_eq!(&row0[4..8], e2e_metrics.as_slice());

    let out = mvprf(&[
        "sweep",
        p(&root.join("idx")),
        p(&root.join("data/queries.cmve")),
        p(&root.join("data/qrels.txt")),
    ]);
    assert!(stderr_line(&out).starts_with("error[config]:"));
}

#[test]
fn eval_with_baseline_prints_significance() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let idx = root.join("idx");
    let queries = root.join("data/queries.cmve");
    let (a, b) = (root.join("a.run"), root.join("b.run"));
    ok(&["search", p(&idx), p(&queries), "--mode", "e2e", "-o", p(&a)]);
    ok(&["search", p(&idx), p(&queries), "--mode", "prf-rank", "-o", p(&b)]);
    let out = ok(&["eval", p(&root.join("data/qrels.txt")), p(&a), p(&b)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("holm_p="), "{text}");
}

#[test]
fn missing_file_is_io_error() {
    let out = mvprf(&["eval", "/nonexistent/qrels", "/nonexistent/run"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("error[io]:"));
}
