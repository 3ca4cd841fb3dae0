use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchConfig, ArchError, ArchKind, Model, ViewPool};
use crate::autodiff::{read_checkpoint, write_checkpoint, AutodiffError, Checkpoint, Scalar};

const HEADER_LEN: usize = 22;

/// `{kind u8, view_pool u8, n_antennas u32, frame_len u32, n_classes u32, width f64}`, little-endian.
pub fn encode_header(c: &ArchConfig) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.push(match c.kind {
        ArchKind::Base => 0,
        ArchKind::Mvcnn => 1,
        ArchKind::Wlcnn => 2,
        ArchKind::CoAmc => 3,
    });
    h.push(match c.view_pool {
        ViewPool::Max => 0,
        ViewPool::Mean => 1,
    });
    h.extend_from_slice(&(c.n_antennas as u32).to_le_bytes());
    h.extend_from_slice(&(c.frame_len as u32).to_le_bytes());
    h.extend_from_slice(&(c.n_classes as u32).to_le_bytes());
    h.extend_from_slice(&c.width_multiplier.to_le_bytes());
    h
}

fn header_error(reason: impl Into<String>) -> ArchError {
    AutodiffError::Format {
        offset: 12,
        reason: reason.into(),
    }
    .into()
}

pub fn decode_header(h: &[u8]) -> Result<ArchConfig, ArchError> {
    if h.len() != HEADER_LEN {
        return Err(header_error(format!("architecture header has {} bytes, expected {HEADER_LEN}", h.len())));
    }
    let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().expect("4 bytes")) as usize;
    let kind = match h[0] {
        0 => ArchKind::Base,
        1 => ArchKind::Mvcnn,
        2 => ArchKind::Wlcnn,
        3 => ArchKind::CoAmc,
        k => return Err(header_error(format!("unknown architecture tag {k}"))),
    };
    let view_pool = match h[1] {
        0 => ViewPool::Max,
        1 => ViewPool::Mean,
        k => return Err(header_error(format!("unknown view pool tag {k}"))),
    };
    let config = ArchConfig {
        kind,
        view_pool,
        n_antennas: u32_at(2),
        frame_len: u32_at(6),
        n_classes: u32_at(10),
        width_multiplier: f64::from_le_bytes(h[14..22].try_into().expect("8 bytes")),
    };
    config.validate()?;
    Ok(config)
}

impl<T: Scalar> Model<T> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: encode_header(&self.config),
            params: self.store.cast(),
        }
    }

    /// Rebuilds the architecture named by the header and copies the values in,
    /// checking every entry's name and shape.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ArchError> {
        let config = decode_header(&ckpt.header)?;
        let mut model = Model::new(config, &mut ChaCha8Rng::seed_from_u64(0))?;
        model.store.copy_values_from(&ckpt.params.cast())?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArchError> {
        let path = path.as_ref();
        let io = |source| ArchError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        write_checkpoint(&self.to_checkpoint(), &mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArchError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ArchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_checkpoint(&read_checkpoint(&bytes)?)
    }
}
