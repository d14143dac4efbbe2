use std::collections::{BTreeMap, BTreeSet};

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::format::ByteReader;

pub const IDF_MAGIC: &[u8; 6] = b"CMVI1\0";

/// Inverse document frequency of a token, `ln((N + 1) / (N_t + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct IdfWeight(f64);

impl IdfWeight {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidValue(format!("idf weight {value} must be >= 0")));
        }
        Ok(IdfWeight(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Per-token document frequencies plus the collection size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdfTable {
    doc_count: u64,
    doc_freq: BTreeMap<u32, u64>,
}

impl IdfTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts each distinct token of one document once.
    pub fn add_document(&mut self, token_ids: &[u32]) {
        self.doc_count += 1;
        let distinct: BTreeSet<u32> = token_ids.iter().copied().collect();
        for t in distinct {
            *self.doc_freq.entry(t).or_insert(0) += 1;
        }
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    /// Number of documents containing `token`; zero for unseen tokens.
    pub fn doc_freq(&self, token: u32) -> u64 {
        self.doc_freq.get(&token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: u32) -> IdfWeight {
        let n = self.doc_count as f64;
        let df = self.doc_freq(token) as f64;
        IdfWeight(((n + 1.0) / (df + 1.0)).ln())
    }

    pub fn tokens(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.doc_freq.iter().map(|(&t, &d)| (t, d))
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(22 + self.doc_freq.len() * 12);
        out.extend_from_slice(IDF_MAGIC);
        out.write_u64::<LittleEndian>(self.doc_count).unwrap();
        out.write_u64::<LittleEndian>(self.doc_freq.len() as u64).unwrap();
        for (&t, &df) in &self.doc_freq {
            out.write_u32::<LittleEndian>(t).unwrap();
            out.write_u64::<LittleEndian>(df).unwrap();
        }
        out
    }

    pub(crate) fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(6, "magic bytes")? != IDF_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic bytes, expected CMVI1".into(),
            });
        }
        let doc_count = r.u64("document count")?;
        let entries = r.u64("entry count")?;
        let mut doc_freq = BTreeMap::new();
        for _ in 0..entries {
            let at = r.offset();
            let t = r.u32("token id")?;
            let df = r.u64("document frequency")?;
            if df > doc_count {
                return Err(Error::Format {
                    offset: at,
                    message: format!("token {t} has frequency {df} > {doc_count} documents"),
                });
            }
            doc_freq.insert(t, df);
        }
        if r.remaining() != 0 {
            return Err(Error::Format {
                offset: r.offset(),
                message: "trailing bytes in idf table".into(),
            });
        }
        Ok(IdfTable { doc_count, doc_freq })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(docs: &[&[u32]]) -> IdfTable {
        let mut t = IdfTable::new();
        for d in docs {
            t.add_document(d);
        }
        t
    }

    #[test]
    fn formula_values() {
        let t = table(&[&[1, 2], &[2], &[2, 3]]);
        assert_eq!(t.doc_count(), 3);
        assert!((t.idf(1).value() - (4.0f64 / 2.0).ln()).abs() < 1e-12);
        assert_eq!(t.idf(2).value(), 0.0);
    }

    #[test]
    fn unseen_token() {
        let docs: Vec<Vec<u32>> = (0..999).map(|_| vec![1]).collect();
        let refs: Vec<&[u32]> = docs.iter().map(|d| d.as_slice()).collect();
        let t = table(&refs);
        assert!((t.idf(42).value() - 1000f64.ln()).abs() < 1e-12);
        assert!((t.idf(42).value() - 6.9078).abs() < 1e-4);
    }

    #[test]
    fn repeated_token_counts_once_per_document() {
        let t = table(&[&[7, 7, 7], &[1]]);
        assert_eq!(t.doc_freq(7), 1);
    }

    #[test]
    fn encode_decode() {
        let t = table(&[&[5, 9], &[9]]);
        assert_eq!(IdfTable::decode(&t.encode()).unwrap(), t);
        let bytes = t.encode();
        assert!(IdfTable::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(IdfWeight::new(-0.1).is_err());
        assert!(IdfWeight::new(0.0).is_ok());
    }
}
