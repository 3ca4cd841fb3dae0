//! Parameter container: magic `MAMP`, version u32, an opaque header block
//! (u32 length + bytes) and u32 record count, then per record
//! `{kind u8, name (u16 length + UTF-8), rank u8, dims u32 each, f32 values}`.
//! All integers little-endian.

use std::io::Write;

use super::{AutodiffError, ParamKind, ParamStore, Tensor};
use crate::dataset::format::Reader;
use crate::dataset::DatasetError;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MAMP";
const VERSION: u32 = 1;

/// Parameter values plus an owner-defined header.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Vec<u8>,
    pub params: ParamStore<f32>,
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> std::io::Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ckpt.header.len() as u32).to_le_bytes())?;
    w.write_all(&ckpt.header)?;
    w.write_all(&(ckpt.params.len() as u32).to_le_bytes())?;
    for (_, p) in ckpt.params.iter() {
        w.write_all(&[match p.kind {
            ParamKind::Trainable => 0,
            ParamKind::Buffer => 1,
        }])?;
        w.write_all(&(p.name.len() as u16).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&[p.value.shape().len() as u8])?;
        for d in p.value.shape() {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn format_error(e: DatasetError) -> AutodiffError {
    match e {
        DatasetError::Format { offset, reason } => AutodiffError::Format { offset, reason },
        other => AutodiffError::Format {
            offset: 0,
            reason: other.to_string(),
        },
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint, AutodiffError> {
    read_inner(bytes).map_err(format_error)
}

fn read_inner(bytes: &[u8]) -> Result<Checkpoint, DatasetError> {
    let mut r = Reader::new(bytes);
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Reader::new(bytes).error("bad magic, expected MAMP"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let header_len = r.u32("header length")? as usize;
    let header = r.take(header_len, "header")?.to_vec();
    let count = r.u32("record count")?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let kind = match r.u8("record kind")? {
            0 => ParamKind::Trainable,
            1 => ParamKind::Buffer,
            k => return Err(r.error(format!("unknown record kind {k}"))),
        };
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| r.error("record name is not UTF-8"))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")? as usize);
        }
        let numel: usize = dims.iter().product();
        if numel.saturating_mul(4) > r.remaining() {
            return Err(r.error(format!("record `{name}` needs {numel} values, file is truncated")));
        }
        let data = r.f32s(numel, "values")?;
        let value = Tensor::new(dims, data).map_err(|e| r.error(e.to_string()))?;
        params.add(name, kind, value);
    }
    if r.remaining() != 0 {
        return Err(r.error(format!("{} trailing bytes", r.remaining())));
    }
    Ok(Checkpoint { header, params })
}
