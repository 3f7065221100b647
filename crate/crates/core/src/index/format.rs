//! Binary index files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SPHX1"
//! m u64 | r f64 | h_index f64 | h_query f64 | kind u8 | d u64 | seed u64 | n u64
//! n x (varint len, utf-8 doc id)
//! m x (varint len, varint first id, varint gaps...)
//! xxh64 of everything above, u64
//! ```

use std::io::{Read, Write};

use twox_hash::XxHash64;

use super::{IndexConfig, InvertedIndex};
use crate::embedding::TransformKind;
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SPHX1";
const HEADER_LEN: usize = 8 * 7 + 1;
const CHECKSUM_LEN: usize = 8;

fn put_varint(buf: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        buf.push((v as u8) | 0x80);
        v >>= 7;
    }
    buf.push(v as u8);
}

pub fn save_index<W: Write>(index: &InvertedIndex, mut out: W) -> Result<()> {
    let c = index.config();
    let mut buf = Vec::with_capacity(64 + 2 * index.total_postings());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(c.m as u64).to_le_bytes());
    buf.extend_from_slice(&c.r.to_le_bytes());
    buf.extend_from_slice(&c.h_index.to_le_bytes());
    buf.extend_from_slice(&c.h_query.to_le_bytes());
    buf.push(c.kind.code());
    buf.extend_from_slice(&(c.d as u64).to_le_bytes());
    buf.extend_from_slice(&c.seed.to_le_bytes());
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for id in index.doc_ids() {
        put_varint(&mut buf, id.len() as u64);
        buf.extend_from_slice(id.as_bytes());
    }
    for list in index.postings() {
        put_varint(&mut buf, list.len() as u64);
        let mut prev = 0u32;
        for (j, &doc) in list.iter().enumerate() {
            put_varint(&mut buf, if j == 0 { doc } else { doc - prev } as u64);
            prev = doc;
        }
    }
    let sum = XxHash64::oneshot(0, &buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(what: &str) -> Error {
    Error::CorruptStream(what.to_string())
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt("unexpected end of data"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(corrupt("varint too long"))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn load_index<R: Read>(mut source: R) -> Result<InvertedIndex> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() >= 5 && &bytes[..4] == b"SPHX" && bytes[4] != MAGIC[4] {
        return Err(Error::VersionMismatch(bytes[4]));
    }
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if bytes.len() < MAGIC.len() + HEADER_LEN + CHECKSUM_LEN {
        return Err(corrupt("truncated header"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if XxHash64::oneshot(0, body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(corrupt("checksum mismatch"));
    }

    let mut cur = Cursor {
        buf: body,
        pos: MAGIC.len(),
    };
    let m = cur.u64()?;
    let r = cur.f64()?;
    let h_index = cur.f64()?;
    let h_query = cur.f64()?;
    let kind_code = cur.take(1)?[0];
    let kind = TransformKind::from_code(kind_code)
        .ok_or_else(|| corrupt(&format!("unknown transform kind {kind_code}")))?;
    let d = cur.u64()?;
    let seed = cur.u64()?;
    let n = cur.u64()?;
    // Every doc id and every posting list costs at least one byte.
    if m > cur.remaining() as u64 || n > cur.remaining() as u64 || n > u32::MAX as u64 {
        return Err(corrupt("sizes exceed stream length"));
    }
    let config = IndexConfig {
        m: m as usize,
        r,
        h_index,
        h_query,
        kind,
        d: d as usize,
        seed,
    };
    config.validate().map_err(|e| corrupt(&e.to_string()))?;

    let mut doc_ids = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let len = cur.varint()?;
        if len > cur.remaining() as u64 {
            return Err(corrupt("doc id overruns stream"));
        }
        let raw = cur.take(len as usize)?;
        let id = std::str::from_utf8(raw).map_err(|_| corrupt("doc id is not utf-8"))?;
        doc_ids.push(id.to_string());
    }
    if doc_ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(corrupt("doc ids not strictly ascending"));
    }

    let mut postings = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let len = cur.varint()?;
        if len > n || len > cur.remaining() as u64 {
            return Err(corrupt("posting list too long"));
        }
        let mut list = Vec::with_capacity(len as usize);
        let mut prev = 0u64;
        for j in 0..len {
            let v = cur.varint()?;
            let doc = if j == 0 {
                v
            } else if v == 0 {
                return Err(corrupt("posting list not strictly ascending"));
            } else {
                prev.checked_add(v).ok_or_else(|| corrupt("posting overflow"))?
            };
            if doc >= n {
                return Err(corrupt("posting refers to missing document"));
            }
            list.push(doc as u32);
            prev = doc;
        }
        postings.push(list);
    }
    if cur.remaining() != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(InvertedIndex::from_parts(config, doc_ids, postings))
}
