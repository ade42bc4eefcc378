//! Bit-exact binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "TSRN" | version u32 | input h,w,c u32 x3 | layer count u32
//! per layer: tag u32 + payload
//!   0 conv    out_channels u32, kernel u32
//!   1 relu    -
//!   2 maxpool size u32, stride u32
//!   3 dropout rate f32
//!   4 flatten -
//!   5 dense   units u32
//!   6 softmax -
//! parameter tensors    f32, declaration order (shapes derive from the spec)
//! optimizer state      step u64, then m tensors, then v tensors (f32)
//! rng state            master seed u64, shuffle stream position u128
//! epoch u32 | best monitored value f32
//! ```
//!
//! Loading verifies the magic, the version, and that the byte stream is
//! consumed exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{LayerSpec, NetworkSpec, Params};
use crate::tensor::{Shape, Tensor};

use super::adam::AdamState;

pub const MAGIC: [u8; 4] = *b"TSRN";
pub const VERSION: u32 = 1;

/// Master seed plus the shuffle stream's position, enough to replay the
/// epoch ordering that produced this checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub master_seed: u64,
    pub shuffle_word_pos: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Params<f32>,
    pub adam: AdamState<f32>,
    pub rng: RngState,
    pub epoch: u32,
    pub best_value: f32,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = encode(checkpoint);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn encode(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for &d in ck.spec.input_shape().dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(ck.spec.layers().len() as u32).to_le_bytes());
    for layer in ck.spec.layers() {
        match layer {
            LayerSpec::Conv { out_channels, kernel } => {
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&(*out_channels as u32).to_le_bytes());
                out.extend_from_slice(&(*kernel as u32).to_le_bytes());
            }
            LayerSpec::Relu => out.extend_from_slice(&1u32.to_le_bytes()),
            LayerSpec::MaxPool { size, stride } => {
                out.extend_from_slice(&2u32.to_le_bytes());
                out.extend_from_slice(&(*size as u32).to_le_bytes());
                out.extend_from_slice(&(*stride as u32).to_le_bytes());
            }
            LayerSpec::Dropout { rate } => {
                out.extend_from_slice(&3u32.to_le_bytes());
                out.extend_from_slice(&rate.to_le_bytes());
            }
            LayerSpec::Flatten => out.extend_from_slice(&4u32.to_le_bytes()),
            LayerSpec::Dense { units } => {
                out.extend_from_slice(&5u32.to_le_bytes());
                out.extend_from_slice(&(*units as u32).to_le_bytes());
            }
            LayerSpec::Softmax => out.extend_from_slice(&6u32.to_le_bytes()),
        }
    }
    for tensor in ck.params.tensors() {
        write_tensor(&mut out, tensor);
    }
    out.extend_from_slice(&ck.adam.step.to_le_bytes());
    for tensor in &ck.adam.m {
        write_tensor(&mut out, tensor);
    }
    for tensor in &ck.adam.v {
        write_tensor(&mut out, tensor);
    }
    out.extend_from_slice(&ck.rng.master_seed.to_le_bytes());
    out.extend_from_slice(&ck.rng.shuffle_word_pos.to_le_bytes());
    out.extend_from_slice(&ck.epoch.to_le_bytes());
    out.extend_from_slice(&ck.best_value.to_le_bytes());
    out
}

fn write_tensor(out: &mut Vec<u8>, tensor: &Tensor<f32>) {
    for &x in tensor.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CheckpointVersion(version));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let input = Shape::new(vec![h, w, c])
        .map_err(|e| Error::CheckpointCorrupt(format!("input shape: {e}")))?;
    let layer_count = r.u32()? as usize;
    if layer_count > 10_000 {
        return Err(Error::CheckpointCorrupt(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = r.u32()?;
        layers.push(match tag {
            0 => LayerSpec::Conv {
                out_channels: r.u32()? as usize,
                kernel: r.u32()? as usize,
            },
            1 => LayerSpec::Relu,
            2 => LayerSpec::MaxPool {
                size: r.u32()? as usize,
                stride: r.u32()? as usize,
            },
            3 => LayerSpec::Dropout { rate: r.f32()? },
            4 => LayerSpec::Flatten,
            5 => LayerSpec::Dense {
                units: r.u32()? as usize,
            },
            6 => LayerSpec::Softmax,
            other => {
                return Err(Error::CheckpointCorrupt(format!("unknown layer tag {other}")))
            }
        });
    }
    let spec = NetworkSpec::new(input, layers)
        .map_err(|e| Error::CheckpointCorrupt(format!("layer table: {e}")))?;

    let shapes = spec.parameter_shapes();
    let params = Params::from_tensors(&spec, r.tensors(&shapes)?)
        .map_err(|e| Error::CheckpointCorrupt(format!("parameters: {e}")))?;
    let step = r.u64()?;
    let m = r.tensors(&shapes)?;
    let v = r.tensors(&shapes)?;
    let adam = AdamState { step, m, v };
    let rng = RngState {
        master_seed: r.u64()?,
        shuffle_word_pos: r.u128()?,
    };
    let epoch = r.u32()?;
    let best_value = r.f32()?;
    if r.pos != bytes.len() {
        return Err(Error::CheckpointTrailing(bytes.len() - r.pos));
    }
    Ok(Checkpoint {
        spec,
        params,
        adam,
        rng,
        epoch,
        best_value,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CheckpointTruncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensors(&mut self, shapes: &[Shape]) -> Result<Vec<Tensor<f32>>> {
        let mut tensors = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let n = shape.element_count();
            let raw = self.take(n * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            tensors.push(
                Tensor::from_vec(shape.clone(), data)
                    .map_err(|e| Error::CheckpointCorrupt(e.to_string()))?,
            );
        }
        Ok(tensors)
    }
}
