//! Versioned binary persistence for the index.
//!
//! Layout (all integers little-endian, floats as IEEE-754 bit patterns):
//! magic, format version, dimension, parameters, entry point, node count,
//! then each node (id, label, event, level, vector, per-layer neighbor
//! lists), and a trailing SHA-256 over everything before it. Field order is
//! canonical, so saving the same index twice is byte-identical.

use super::PipelineError;
use crate::hnsw::{HnswIndex, HnswParams};
use crate::model::Label;
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 8] = b"RUMORIDX";
pub const INDEX_FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_bits().to_le_bytes());
}

fn put_string(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

fn put_opt_string(buf: &mut Vec<u8>, s: Option<&str>) {
    match s {
        Some(s) => {
            buf.push(1);
            put_string(buf, s);
        }
        None => buf.push(0),
    }
}

/// Serializes the index to its canonical byte form.
pub fn index_to_bytes(index: &HnswIndex) -> Vec<u8> {
    let params = index.params();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, INDEX_FORMAT_VERSION);
    put_u32(&mut buf, index.dim() as u32);
    put_u32(&mut buf, params.m as u32);
    put_u32(&mut buf, params.m0 as u32);
    put_u32(&mut buf, params.ef_construction as u32);
    put_u32(&mut buf, params.ef_search as u32);
    put_f64(&mut buf, params.level_multiplier);
    put_u64(&mut buf, params.rng_seed);
    match index.entry_point() {
        Some(entry) => {
            buf.push(1);
            put_u32(&mut buf, entry);
        }
        None => {
            buf.push(0);
            put_u32(&mut buf, 0);
        }
    }
    put_u64(&mut buf, index.nodes().len() as u64);
    for node in index.nodes() {
        put_string(&mut buf, &node.id);
        buf.push(node.label.code());
        put_opt_string(&mut buf, node.event.as_deref());
        put_u32(&mut buf, node.level as u32);
        for &v in &node.vector {
            put_f64(&mut buf, v);
        }
        for layer in &node.neighbors {
            put_u32(&mut buf, layer.len() as u32);
            for &neighbor in layer {
                put_u32(&mut buf, neighbor);
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn save_index(index: &HnswIndex, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, index_to_bytes(index)).map_err(|e| PipelineError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PipelineError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| PipelineError::CorruptIndex("unexpected end of file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, PipelineError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PipelineError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PipelineError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn u8(&mut self) -> Result<u8, PipelineError> {
        Ok(self.take(1)?[0])
    }

    fn string(&mut self) -> Result<String, PipelineError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| PipelineError::CorruptIndex("invalid UTF-8 in string field".into()))
    }

    fn opt_string(&mut self) -> Result<Option<String>, PipelineError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.string()?)),
            other => Err(PipelineError::CorruptIndex(format!(
                "invalid optional-string flag {other}"
            ))),
        }
    }
}

/// Deserializes an index from its canonical byte form.
///
/// The version field is inspected first so old/new formats report
/// `VersionMismatch`; every other defect (truncation, bad checksum,
/// inconsistent graph) reports `CorruptIndex`.
pub fn index_from_bytes(bytes: &[u8]) -> Result<HnswIndex, PipelineError> {
    let mut reader = Reader { bytes, pos: 0 };
    let magic = reader.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(PipelineError::CorruptIndex("bad magic header".into()));
    }
    let version = reader.u32()?;
    if version != INDEX_FORMAT_VERSION {
        return Err(PipelineError::VersionMismatch {
            found: version,
            expected: INDEX_FORMAT_VERSION,
        });
    }
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(PipelineError::CorruptIndex("unexpected end of file".into()));
    }
    let (body, stored_checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_checksum {
        return Err(PipelineError::CorruptIndex("checksum mismatch".into()));
    }

    let dim = reader.u32()? as usize;
    let params = HnswParams {
        m: reader.u32()? as usize,
        m0: reader.u32()? as usize,
        ef_construction: reader.u32()? as usize,
        ef_search: reader.u32()? as usize,
        level_multiplier: reader.f64()?,
        rng_seed: reader.u64()?,
    };
    let entry_flag = reader.u8()?;
    let entry_value = reader.u32()?;
    let entry_point = match entry_flag {
        0 => None,
        1 => Some(entry_value),
        other => {
            return Err(PipelineError::CorruptIndex(format!(
                "invalid entry-point flag {other}"
            )))
        }
    };
    let node_count = reader.u64()? as usize;
    let mut nodes = Vec::with_capacity(node_count.min(1 << 20));
    for _ in 0..node_count {
        let id = reader.string()?;
        let label = Label::from_code(reader.u8()?)
            .map_err(|e| PipelineError::CorruptIndex(e.to_string()))?;
        let event = reader.opt_string()?;
        let level = reader.u32()? as usize;
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            vector.push(reader.f64()?);
        }
        let mut neighbors = Vec::with_capacity(level + 1);
        for _ in 0..=level {
            let count = reader.u32()? as usize;
            let mut layer = Vec::with_capacity(count.min(1 << 16));
            for _ in 0..count {
                layer.push(reader.u32()?);
            }
            neighbors.push(layer);
        }
        nodes.push(crate::hnsw::Node {
            id,
            label,
            event,
            level,
            vector,
            neighbors,
        });
    }
    if reader.pos != body.len() {
        return Err(PipelineError::CorruptIndex("trailing bytes in body".into()));
    }
    if let Some(entry) = entry_point {
        if entry as usize >= nodes.len() {
            return Err(PipelineError::CorruptIndex(format!(
                "entry point {entry} out of range"
            )));
        }
    }
    let index = HnswIndex::from_parts(params, dim, nodes, entry_point)
        .map_err(|e| PipelineError::CorruptIndex(e.to_string()))?;
    index
        .validate_structure()
        .map_err(PipelineError::CorruptIndex)?;
    Ok(index)
}

pub fn load_index(path: &Path) -> Result<HnswIndex, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    index_from_bytes(&bytes)
}
