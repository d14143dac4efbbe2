//! TREC qrels and run files.
//!
//! Qrels: `qid 0 docno grade`. Run: `qid Q0 docno rank score tag`.
//! Both whitespace separated, one record per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Graded judgements per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgements: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, docno: &str, grade: u32) -> Result<()> {
        let prev = self
            .judgements
            .entry(qid.to_string())
            .or_default()
            .insert(docno.to_string(), grade);
        if prev.is_some() {
            return Err(Error::InvalidValue(format!("duplicate judgement for ({qid}, {docno})")));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut q = Qrels::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let perr = |m: String| Error::Parse {
                line: i + 1,
                message: m,
            };
            if fields.len() != 4 {
                return Err(perr(format!("expected 4 fields, found {}", fields.len())));
            }
            let grade: i64 = fields[3]
                .parse()
                .map_err(|_| perr(format!("bad grade {:?}", fields[3])))?;
            if grade < 0 {
                return Err(perr(format!("negative grade {grade}")));
            }
            q.insert(fields[0], fields[2], grade as u32)
                .map_err(|e| perr(e.to_string()))?;
        }
        Ok(q)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (qid, docs) in &self.judgements {
            for (docno, grade) in docs {
                writeln!(out, "{qid} 0 {docno} {grade}").unwrap();
            }
        }
        out
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgements.get(qid)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgements.keys().map(String::as_str)
    }

    pub fn max_grade(&self) -> u32 {
        self.judgements
            .values()
            .flat_map(|d| d.values().copied())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub docno: String,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

/// Ranked results per query, each list ordered by rank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    queries: BTreeMap<String, Vec<RunEntry>>,
}

impl RunFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one query's ranking; ranks are assigned 1..n in the given order.
    pub fn push_ranking<I, S>(&mut self, qid: &str, tag: &str, ranking: I) -> Result<()>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let entries: Vec<RunEntry> = ranking
            .into_iter()
            .enumerate()
            .map(|(i, (docno, score))| RunEntry {
                docno: docno.into(),
                rank: i as u32 + 1,
                score,
                tag: tag.to_string(),
            })
            .collect();
        if entries.windows(2).any(|w| w[1].score > w[0].score) {
            return Err(Error::InvalidValue(format!("ranking for {qid} has increasing scores")));
        }
        if self.queries.insert(qid.to_string(), entries).is_some() {
            return Err(Error::InvalidValue(format!("query {qid} already present in run")));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut queries: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let perr = |m: String| Error::Parse {
                line: i + 1,
                message: m,
            };
            if f.len() != 6 {
                return Err(perr(format!("expected 6 fields, found {}", f.len())));
            }
            let rank: u32 = f[3].parse().map_err(|_| perr(format!("bad rank {:?}", f[3])))?;
            let score: f64 = f[4].parse().map_err(|_| perr(format!("bad score {:?}", f[4])))?;
            if !score.is_finite() {
                return Err(perr(format!("non-finite score {score}")));
            }
            queries.entry(f[0].to_string()).or_default().push(RunEntry {
                docno: f[2].to_string(),
                rank,
                score,
                tag: f[5].to_string(),
            });
        }
        for entries in queries.values_mut() {
            entries.sort_by_key(|e| e.rank);
        }
        Ok(RunFile { queries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Checks that ranks run 1..n and scores never increase with rank.
    pub fn validate(&self) -> Result<()> {
        for (qid, entries) in &self.queries {
            for (i, e) in entries.iter().enumerate() {
                if e.rank as usize != i + 1 {
                    return Err(Error::InvalidValue(format!(
                        "query {qid}: ranks are not contiguous at {}",
                        e.rank
                    )));
                }
            }
            if entries.windows(2).any(|w| w[1].score > w[0].score) {
                return Err(Error::InvalidValue(format!("query {qid}: scores increase with rank")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (qid, entries) in &self.queries {
            for e in entries {
                writeln!(out, "{qid} Q0 {} {} {} {}", e.docno, e.rank, e.score, e.tag).unwrap();
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn query(&self, qid: &str) -> Option<&[RunEntry]> {
        self.queries.get(qid).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.queries.iter().map(|(q, e)| (q.as_str(), e.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}
