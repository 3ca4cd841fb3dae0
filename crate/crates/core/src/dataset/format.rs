//! Little-endian dataset container.
//!
//! ```text
//! "MAMC" | version u32 | n_examples u64 | n_antennas u32 | frame_len u32
//! | n_classes u32 | grid_len u32 | grid f32 * grid_len | master_seed u64
//! then per example: label u16 | snr_db f32 | seed u64 | tensor f32 * (n_antennas * 2 * frame_len)
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Dataset, DatasetError, DatasetHeader, MultiAntennaExample};

pub const MAGIC: &[u8; 4] = b"MAMC";
pub const FORMAT_VERSION: u32 = 1;

/// Exact encoded size in bytes.
pub fn encoded_len(header: &DatasetHeader, n_examples: usize) -> usize {
    let fixed = 4 + 4 + 8 + 4 + 4 + 4 + 4 + 4 * header.snr_grid_db.len() + 8;
    let per_example = 2 + 4 + 8 + 4 * header.n_antennas as usize * 2 * header.frame_len as usize;
    fixed + n_examples * per_example
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> std::io::Result<()> {
    let h = &dataset.header;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(dataset.examples.len() as u64).to_le_bytes())?;
    w.write_all(&h.n_antennas.to_le_bytes())?;
    w.write_all(&h.frame_len.to_le_bytes())?;
    w.write_all(&h.n_classes.to_le_bytes())?;
    w.write_all(&(h.snr_grid_db.len() as u32).to_le_bytes())?;
    for s in &h.snr_grid_db {
        w.write_all(&s.to_le_bytes())?;
    }
    w.write_all(&h.master_seed.to_le_bytes())?;
    let mut buf = Vec::new();
    for e in &dataset.examples {
        buf.clear();
        buf.extend_from_slice(&e.label.to_le_bytes());
        buf.extend_from_slice(&e.snr_db.to_le_bytes());
        buf.extend_from_slice(&e.seed.to_le_bytes());
        for v in &e.tensor {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let expected = dataset.header.n_antennas as usize * 2 * dataset.header.frame_len as usize;
    if let Some(bad) = dataset.examples.iter().position(|e| e.tensor.len() != expected) {
        return Err(DatasetError::Manifest(format!(
            "example {bad} has {} values, header implies {expected}",
            dataset.examples[bad].tensor.len()
        )));
    }
    let file = fs::File::create(path).map_err(io_err)?;
    write_dataset(dataset, BufWriter::new(file)).map_err(io_err)
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn error(&self, reason: impl Into<String>) -> DatasetError {
        DatasetError::Format {
            offset: self.offset(),
            reason: reason.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DatasetError> {
        if self.remaining() < n {
            return Err(self.error(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8, DatasetError> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16, DatasetError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64, DatasetError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32, DatasetError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>, DatasetError> {
        let bytes = self.take(n * 4, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_dataset(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(DatasetError::Format {
            offset: 0,
            reason: format!("bad magic {magic:?}, expected \"MAMC\""),
        });
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::Format {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let n_examples = r.u64("n_examples")?;
    let n_antennas = r.u32("n_antennas")?;
    let frame_len = r.u32("frame_len")?;
    let n_classes = r.u32("n_classes")?;
    if n_antennas == 0 || frame_len == 0 || n_classes == 0 {
        return Err(r.error("n_antennas, frame_len and n_classes must be non-zero"));
    }
    let grid_len = r.u32("snr grid length")? as usize;
    let snr_grid_db = r.f32s(grid_len, "snr grid")?;
    let master_seed = r.u64("master_seed")?;
    let header = DatasetHeader {
        n_antennas,
        frame_len,
        n_classes,
        snr_grid_db,
        master_seed,
    };
    let values = n_antennas as usize * 2 * frame_len as usize;
    let record = 14 + 4 * values;
    if (r.remaining() as u64) < n_examples.saturating_mul(record as u64) {
        return Err(r.error(format!(
            "truncated: {n_examples} examples need {} bytes, {} left",
            n_examples.saturating_mul(record as u64),
            r.remaining()
        )));
    }
    let mut examples = Vec::with_capacity(n_examples as usize);
    for _ in 0..n_examples {
        let start = r.offset();
        let label = r.u16("label")?;
        if label as u32 >= n_classes {
            return Err(DatasetError::Format {
                offset: start,
                reason: format!("label {label} >= n_classes {n_classes}"),
            });
        }
        let snr_db = r.f32("snr_db")?;
        let seed = r.u64("seed")?;
        let tensor = r.f32s(values, "tensor")?;
        examples.push(MultiAntennaExample {
            tensor,
            label,
            snr_db,
            seed,
        });
    }
    if r.remaining() != 0 {
        return Err(r.error(format!("{} trailing bytes", r.remaining())));
    }
    Ok(Dataset { header, examples })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(&bytes)
}
