//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "THML"  u16 version
//! model:  u16 channels, u32 height, u32 width, u8 blocks,
//!         blocks x (u16 filters, u8 batch_norm), f64 epsilon, f64 momentum
//! config: f64 lr, u32 batch, u32 epochs, u32 steps, u8 optimizer, u64 seed, f64 threshold
//! u32 tensor count
//! tensors x (u16 name length, name, u8 dtype, u8 rank, rank x u32 dims, payload)
//! u32 CRC-32 of every preceding byte
//! ```

use std::path::Path;

use thiserror::Error;

use super::{build_model, BlockDef, ModelDef, ModelParams, Optimizer, TrainConfig};
use crate::tensor::{DType, Element, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"THML";
pub const CHECKPOINT_VERSION: u16 = 1;

const MAX_BLOCKS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint: magic bytes {found:02x?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("CRC-32 mismatch: stored {stored:08x}, computed {computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("checkpoint truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("tensor `{name}` has dtype {found}, expected {expected}")]
    DtypeMismatch { name: String, expected: &'static str, found: String },
    #[error("malformed checkpoint at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

type Result<T> = std::result::Result<T, CheckpointError>;

/// Everything needed to rebuild a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub def: ModelDef,
    pub config: TrainConfig,
    pub params: ModelParams<f32>,
}

fn named<T: Element>(params: &ModelParams<T>) -> Vec<(String, &Tensor<T>)> {
    let mut out = Vec::new();
    for (i, (conv, norm)) in params.convs.iter().zip(&params.norms).enumerate() {
        let b = i + 1;
        out.push((format!("conv{b}.kernels"), &conv.kernels));
        out.push((format!("conv{b}.bias"), &conv.bias));
        if let Some(bn) = norm {
            out.push((format!("bn{b}.gamma"), &bn.gamma));
            out.push((format!("bn{b}.beta"), &bn.beta));
            out.push((format!("bn{b}.running_mean"), &bn.running_mean));
            out.push((format!("bn{b}.running_var"), &bn.running_var));
        }
    }
    out.push(("dense.weights".into(), &params.dense.weights));
    out.push(("dense.bias".into(), &params.dense.bias));
    out
}

fn named_mut<T: Element>(params: &mut ModelParams<T>) -> Vec<&mut Tensor<T>> {
    let mut out = Vec::new();
    for (conv, norm) in params.convs.iter_mut().zip(params.norms.iter_mut()) {
        out.push(&mut conv.kernels);
        out.push(&mut conv.bias);
        if let Some(bn) = norm {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
            out.push(&mut bn.running_mean);
            out.push(&mut bn.running_var);
        }
    }
    out.push(&mut params.dense.weights);
    out.push(&mut params.dense.bias);
    out
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(CHECKPOINT_MAGIC);
    b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let d = &ckpt.def;
    b.extend_from_slice(&(d.input_channels as u16).to_le_bytes());
    b.extend_from_slice(&(d.input_height as u32).to_le_bytes());
    b.extend_from_slice(&(d.input_width as u32).to_le_bytes());
    b.push(d.blocks.len() as u8);
    for blk in &d.blocks {
        b.extend_from_slice(&(blk.filters as u16).to_le_bytes());
        b.push(u8::from(blk.batch_norm));
    }
    b.extend_from_slice(&d.bn_epsilon.to_le_bytes());
    b.extend_from_slice(&d.bn_momentum.to_le_bytes());
    let c = &ckpt.config;
    b.extend_from_slice(&c.learning_rate.to_le_bytes());
    b.extend_from_slice(&(c.batch_size as u32).to_le_bytes());
    b.extend_from_slice(&c.epochs.to_le_bytes());
    b.extend_from_slice(&c.steps_per_epoch.to_le_bytes());
    b.push(match c.optimizer {
        Optimizer::Adam => 0,
    });
    b.extend_from_slice(&c.seed.to_le_bytes());
    b.extend_from_slice(&c.threshold.to_le_bytes());
    let tensors = named(&ckpt.params);
    b.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        b.extend_from_slice(&(name.len() as u16).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.push(f32::DTYPE.tag());
        b.push(t.rank() as u8);
        for &dim in t.shape() {
            b.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in t.data() {
            v.write_le(&mut b);
        }
    }
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated { offset: self.bytes.len() });
        }
        self.pos += n;
        Ok(&self.bytes[self.pos - n..self.pos])
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn malformed(&self, reason: impl Into<String>) -> CheckpointError {
        CheckpointError::Malformed { offset: self.pos, reason: reason.into() }
    }
}

/// Parses everything after the version field. Fields are validated before
/// the bytes they describe are consumed, so running out of input means the
/// file was cut short rather than that a length was garbled.
fn parse_body(r: &mut Reader<'_>) -> Result<Checkpoint> {
    let channels = r.u16()? as usize;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let nblocks = r.u8()? as usize;
    if nblocks == 0 || nblocks > MAX_BLOCKS {
        return Err(r.malformed(format!("implausible block count {nblocks}")));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let filters = r.u16()? as usize;
        let batch_norm = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(r.malformed(format!("batch-norm flag {v}"))),
        };
        blocks.push(BlockDef { filters, batch_norm });
    }
    let bn_epsilon = r.f64()?;
    let bn_momentum = r.f64()?;
    let def = ModelDef { input_channels: channels, input_height: height, input_width: width, blocks, bn_epsilon, bn_momentum };
    def.validate().map_err(|e| r.malformed(e.to_string()))?;

    let learning_rate = r.f64()?;
    let batch_size = r.u32()? as usize;
    let epochs = r.u32()?;
    let steps_per_epoch = r.u32()?;
    let optimizer = match r.u8()? {
        0 => Optimizer::Adam,
        v => return Err(r.malformed(format!("unknown optimizer tag {v}"))),
    };
    let seed = r.u64()?;
    let threshold = r.f64()?;
    let config = TrainConfig { learning_rate, batch_size, epochs, steps_per_epoch, optimizer, seed, threshold };

    let mut params: ModelParams<f32> = build_model(&def, 0).map_err(|e| r.malformed(e.to_string()))?;
    let expected: Vec<(String, Vec<usize>)> =
        named(&params).into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(r.malformed(format!("{count} tensors, expected {}", expected.len())));
    }
    for ((name, shape), slot) in expected.iter().zip(named_mut(&mut params)) {
        let len = r.u16()? as usize;
        if len != name.len() {
            return Err(r.malformed(format!("expected tensor `{name}`")));
        }
        let found = r.take(len)?;
        if found != name.as_bytes() {
            return Err(r.malformed(format!(
                "expected tensor `{name}`, found `{}`",
                String::from_utf8_lossy(found)
            )));
        }
        let tag = r.u8()?;
        match DType::from_tag(tag) {
            Some(DType::F32) => {}
            Some(other) => {
                return Err(CheckpointError::DtypeMismatch {
                    name: name.clone(),
                    expected: "f32",
                    found: format!("{other:?}").to_lowercase(),
                })
            }
            None => return Err(r.malformed(format!("unknown dtype tag {tag}"))),
        }
        let rank = r.u8()? as usize;
        if rank != shape.len() {
            return Err(r.malformed(format!("tensor `{name}` has rank {rank}, expected {}", shape.len())));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        if &dims != shape {
            return Err(r.malformed(format!("tensor `{name}` has shape {dims:?}, expected {shape:?}")));
        }
        let n: usize = dims.iter().product();
        let payload = r.take(n * 4)?;
        let data: Vec<f32> = payload.chunks_exact(4).map(f32::read_le).collect();
        *slot = Tensor::new(&dims, data).map_err(|e| r.malformed(e.to_string()))?;
    }
    Ok(Checkpoint { def, config, params })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated { offset: bytes.len() });
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic { found: bytes[..4].to_vec() });
    }
    if bytes.len() < 6 {
        return Err(CheckpointError::Truncated { offset: bytes.len() });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    if bytes.len() < 10 {
        return Err(CheckpointError::Truncated { offset: bytes.len() });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        // A short file fails the checksum too; tell the two apart.
        let mut probe = Reader { bytes, pos: 6 };
        return Err(match parse_body(&mut probe) {
            Err(e @ CheckpointError::Truncated { .. }) => e,
            Ok(_) if bytes.len() - probe.pos < 4 => CheckpointError::Truncated { offset: bytes.len() },
            _ => CheckpointError::CrcMismatch { stored, computed },
        });
    }
    let mut r = Reader { bytes: body, pos: 6 };
    let ckpt = parse_body(&mut r)?;
    if r.pos != body.len() {
        return Err(r.malformed(format!("{} unexpected trailing bytes", body.len() - r.pos)));
    }
    Ok(ckpt)
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt))
        .map_err(|e| CheckpointError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)
        .map_err(|e| CheckpointError::Io { path: path.display().to_string(), message: e.to_string() })?;
    decode_checkpoint(&bytes)
}
