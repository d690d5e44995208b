//! Versioned binary checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "HARCKPT\0"
//! header_len       u32
//! header           UTF-8 JSON: {"version", "arch", "seed", "epoch"}
//! tensor_count     u32
//! per tensor:
//!   name_len u32, name bytes (UTF-8)
//!   rank u32, rank x u32 dims
//!   numel x f64 (row-major, IEEE-754 bit patterns)
//! ```
//!
//! Values are written as raw f64 bits, so a load/save round trip is
//! bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::Rng;

use super::{ArchConfig, ModelParams};

const MAGIC: &[u8; 8] = b"HARCKPT\0";
const VERSION: u32 = 1;

/// A trained (or freshly initialized) model plus the training position.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    arch: ArchConfig,
    seed: u64,
    epoch: usize,
}

/// Serializes a checkpoint to `path`, writing atomically via a temp file.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let header = Header {
        version: VERSION,
        arch: ckpt.params.config.clone(),
        seed: ckpt.seed,
        epoch: ckpt.epoch,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);

    let tensors = ckpt.params.named_tensors();
    bytes.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in tensors {
        bytes.extend_from_slice(&(name.len() as u32).to_le_bytes());
        bytes.extend_from_slice(name.as_bytes());
        bytes.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.shape() {
            bytes.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    let mut reader = Reader::new(&bytes);

    let magic = reader.take(8)?;
    if magic != MAGIC {
        return Err(Error::Data(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let header_len = reader.u32()? as usize;
    let header: Header = serde_json::from_slice(reader.take(header_len)?)
        .map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
    if header.version != VERSION {
        return Err(Error::Data(format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }

    // Materialize the parameter skeleton, then overwrite every tensor from
    // the file; a cheap constant seed keeps init away from the rng contract.
    let mut params = ModelParams::init(&header.arch, &mut Rng::new(0))?;
    let expected = params.named_tensors().len();
    let count = reader.u32()? as usize;
    if count != expected {
        return Err(Error::Data(format!(
            "checkpoint holds {count} tensors, architecture needs {expected}"
        )));
    }
    for (name, tensor) in params.named_tensors_mut() {
        let name_len = reader.u32()? as usize;
        let stored_name = std::str::from_utf8(reader.take(name_len)?)
            .map_err(|_| Error::Data("checkpoint tensor name is not UTF-8".into()))?;
        if stored_name != name {
            return Err(Error::Data(format!(
                "checkpoint tensor order mismatch: found {stored_name:?}, expected {name:?}"
            )));
        }
        let rank = reader.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(reader.u32()? as usize);
        }
        if dims != tensor.shape() {
            return Err(Error::ShapeMismatch {
                op: "load_checkpoint",
                left: dims,
                right: tensor.shape().to_vec(),
            });
        }
        for v in tensor.data_mut() {
            *v = f64::from_le_bytes(reader.take(8)?.try_into().expect("8 bytes"));
        }
    }
    if !reader.done() {
        return Err(Error::Data("trailing bytes after checkpoint payload".into()));
    }

    Ok(Checkpoint {
        params,
        seed: header.seed,
        epoch: header.epoch,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Data("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
