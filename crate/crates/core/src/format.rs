//! The CMVE1 per-token embedding file format and its docno sidecar.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "CMVE1\0"  u32 dim  u64 doc_count
//! repeated doc_count times:
//!     u64 id  u32 token_count  token_count x u32 token_id  token_count x dim x f32
//! ```
//!
//! The sidecar is a two-column TSV mapping the numeric record id to an
//! external identifier string (a docno for corpora, a qid for queries).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const CMVE_MAGIC: &[u8; 6] = b"CMVE1\0";

/// One document (or query) worth of token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct DocRecord {
    pub id: u64,
    pub token_ids: Vec<u32>,
    pub embeddings: EmbeddingMatrix,
}

impl DocRecord {
    pub fn new(id: u64, token_ids: Vec<u32>, embeddings: EmbeddingMatrix) -> Result<Self> {
        if token_ids.len() != embeddings.rows() {
            return Err(Error::InvalidValue(format!(
                "record {id}: {} token ids for {} embeddings",
                token_ids.len(),
                embeddings.rows()
            )));
        }
        Ok(DocRecord {
            id,
            token_ids,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Parsed contents of a CMVE1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct CmveFile {
    pub dim: usize,
    pub records: Vec<DocRecord>,
}

pub fn write_cmve<W: Write>(mut w: W, dim: usize, records: &[DocRecord]) -> Result<()> {
    let io_err = |e: io::Error| Error::io("<cmve writer>", e);
    w.write_all(CMVE_MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(dim as u32).map_err(io_err)?;
    w.write_u64::<LittleEndian>(records.len() as u64).map_err(io_err)?;
    for rec in records {
        if rec.embeddings.dim() != dim {
            return Err(Error::DimensionMismatch {
                record: rec.id.to_string(),
                expected: dim,
                found: rec.embeddings.dim(),
            });
        }
        w.write_u64::<LittleEndian>(rec.id).map_err(io_err)?;
        w.write_u32::<LittleEndian>(rec.token_ids.len() as u32)
            .map_err(io_err)?;
        for &t in &rec.token_ids {
            w.write_u32::<LittleEndian>(t).map_err(io_err)?;
        }
        for &v in rec.embeddings.as_slice() {
            w.write_f32::<LittleEndian>(v).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_cmve_file(path: &Path, dim: usize, records: &[DocRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_cmve(BufWriter::new(file), dim, records).map_err(|e| with_path(e, path))
}

pub fn read_cmve_file(path: &Path) -> Result<CmveFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cmve(&bytes)
}

pub fn parse_cmve(bytes: &[u8]) -> Result<CmveFile> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(CMVE_MAGIC.len(), "magic bytes")?;
    if magic != CMVE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic bytes, expected CMVE1".into(),
        });
    }
    let dim_offset = r.offset();
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::Format {
            offset: dim_offset,
            message: "dimension is zero".into(),
        });
    }
    let count = r.u64("document count")?;
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let rec_offset = r.offset();
        let id = r.u64("record id")?;
        let n = r.u32("token count")? as usize;
        let token_ids = r.u32_vec(n, "token ids")?;
        let values = r.f32_vec(n * dim, "embedding values")?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format {
                offset: rec_offset,
                message: format!("record {id}: non-finite value in row {}", i / dim),
            });
        }
        records.push(DocRecord {
            id,
            token_ids,
            embeddings: EmbeddingMatrix::from_raw(dim, values),
        });
    }
    if r.remaining() != 0 {
        return Err(Error::Format {
            offset: r.offset(),
            message: format!("{} trailing bytes after last record", r.remaining()),
        });
    }
    Ok(CmveFile { dim, records })
}

/// Little-endian cursor that reports the byte offset of any short read.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format {
                offset: self.offset(),
                message: format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.remaining()
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8, what)?))
    }

    pub(crate) fn u32_vec(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        let raw = self.take(n.saturating_mul(4), what)?;
        let mut out = vec![0u32; n];
        LittleEndian::read_u32_into(raw, &mut out);
        Ok(out)
    }

    pub(crate) fn u64_vec(&mut self, n: usize, what: &str) -> Result<Vec<u64>> {
        let raw = self.take(n.saturating_mul(8), what)?;
        let mut out = vec![0u64; n];
        LittleEndian::read_u64_into(raw, &mut out);
        Ok(out)
    }

    pub(crate) fn f32_vec(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(n.saturating_mul(4), what)?;
        let mut out = vec![0f32; n];
        LittleEndian::read_f32_into(raw, &mut out);
        Ok(out)
    }
}

/// Reads an `id<TAB>name` sidecar. Blank lines are ignored.
pub fn read_id_map(path: &Path) -> Result<BTreeMap<u64, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected <id>\\t<name>".into(),
        })?;
        let id: u64 = id.trim().parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("bad numeric id {id:?}"),
        })?;
        if map.insert(id, name.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate id {id}"),
            });
        }
    }
    Ok(map)
}

pub fn write_id_map<'a, I>(path: &Path, entries: I) -> Result<()>
where
    I: IntoIterator<Item = (u64, &'a str)>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, name) in entries {
        writeln!(w, "{id}\t{name}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar path convention: `corpus.cmve` pairs with `corpus.tsv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("tsv")
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<DocRecord> {
        vec![
            DocRecord::new(
                0,
                vec![7, 7],
                EmbeddingMatrix::new(2, vec![1.0, 0.0, 0.5, -0.25]).unwrap(),
            )
            .unwrap(),
            DocRecord::new(5, vec![3], EmbeddingMatrix::new(2, vec![0.0, 1.0]).unwrap()).unwrap(),
        ]
    }

    fn encode(records: &[DocRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_cmve(&mut buf, 2, records).unwrap();
        buf
    }

    #[test]
    fn layout_is_exact() {
        let buf = encode(&sample());
        assert_eq!(&buf[..6], b"CMVE1\0");
        assert_eq!(LittleEndian::read_u32(&buf[6..10]), 2);
        assert_eq!(LittleEndian::read_u64(&buf[10..18]), 2);
        // first record: id, count, 2 token ids, 4 floats
        assert_eq!(LittleEndian::read_u64(&buf[18..26]), 0);
        assert_eq!(LittleEndian::read_u32(&buf[26..30]), 2);
        assert_eq!(LittleEndian::read_u32(&buf[30..34]), 7);
        assert_eq!(LittleEndian::read_f32(&buf[38..42]), 1.0);
        assert_eq!(buf.len(), 18 + (8 + 4 + 8 + 16) + (8 + 4 + 4 + 8));
    }

    #[test]
    fn parse_round_trip() {
        let parsed = parse_cmve(&encode(&sample())).unwrap();
        assert_eq!(parsed.dim, 2);
        assert_eq!(parsed.records, sample());
    }

    #[test]
    fn truncation_reports_offset() {
        let buf = encode(&sample());
        let cut = &buf[..buf.len() - 3];
        match parse_cmve(cut).unwrap_err() {
            Error::Format { offset, message } => {
                assert_eq!(offset, (buf.len() - 8) as u64);
                assert!(message.contains("truncated"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let mut buf = encode(&sample());
        buf[0] = b'X';
        assert!(matches!(parse_cmve(&buf), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut buf = encode(&sample());
        buf.push(0);
        assert!(matches!(parse_cmve(&buf), Err(Error::Format { .. })));
    }

    #[test]
    fn id_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ids.tsv");
        write_id_map(&p, [(0, "D0"), (9, "doc nine")]).unwrap();
        let m = read_id_map(&p).unwrap();
        assert_eq!(m[&9], "doc nine");
        assert_eq!(m.len(), 2);
    }
}
