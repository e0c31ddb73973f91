//! Binary checkpoint format.
//!
//! ```text
//! "HDNN"                     magic
//! u32                        format version
//! u64, bytes                 model config as canonical JSON
//! u32                        record count
//! per record:
//!   u32, bytes               name
//!   u32                      rank
//!   u64 × rank               dims
//!   f64 × Π dims             values
//! u64                        FNV-1a of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Records hold parameters and
//! batch-norm buffers (named as in [`HybridModel::parameters`]), normalizer
//! statistics (`normalizer.*`) and, optionally, optimizer state (`adam.*`).

use std::collections::HashMap;
use std::path::Path;

use super::{HybridModel, ModelConfig};
use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"HDNN";
pub const FORMAT_VERSION: u32 = 1;

const ADAM_HYPER: &str = "adam.hyper";

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn push_record(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a model and optional optimizer state.
pub fn encode_checkpoint(model: &HybridModel, optimizer: Option<&AdamState>) -> Result<Vec<u8>> {
    let mut records: Vec<(String, Tensor)> = Vec::new();
    records.extend(model.parameters().into_iter().map(|(n, t)| (n, t.clone())));
    records.extend(model.buffers().into_iter().map(|(n, t)| (n, t.clone())));
    if let Some(n) = model.normalizer() {
        records.extend(n.to_records());
    }
    if let Some(adam) = optimizer {
        let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
        if adam.first_moment.len() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} tensors, model has {}",
                adam.first_moment.len(),
                names.len()
            )));
        }
        let c = &adam.config;
        records.push((
            ADAM_HYPER.into(),
            Tensor::vector(vec![
                adam.step as f64,
                c.learning_rate,
                c.beta1,
                c.beta2,
                c.epsilon,
            ])?,
        ));
        for (name, (m, v)) in names
            .iter()
            .zip(adam.first_moment.iter().zip(&adam.second_moment))
        {
            records.push((format!("adam.m.{name}"), m.clone()));
            records.push((format!("adam.v.{name}"), v.clone()));
        }
    }

    let config = model.config().to_canonical_text();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, t) in &records {
        push_record(&mut out, name, t);
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::CorruptCheckpoint(format!("unexpected end of data at byte {}", self.pos))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self, wide: bool) -> Result<usize> {
        let n = if wide {
            self.u64()?
        } else {
            u64::from(self.u32()?)
        };
        usize::try_from(n).map_err(|_| Error::CorruptCheckpoint(format!("length {n} out of range")))
    }

    fn text(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?)
            .map_err(|_| Error::CorruptCheckpoint("invalid UTF-8".into()))
    }

    fn record(&mut self) -> Result<(String, Tensor)> {
        let name_len = self.len(false)?;
        let name = self.text(name_len)?.to_string();
        let rank = self.len(false)?;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(self.len(true)?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c <= self.bytes.len() / 8)
            .ok_or_else(|| {
                Error::CorruptCheckpoint(format!("record `{name}` has implausible shape {shape:?}"))
            })?;
        let data = self
            .take(count * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data)
            .map_err(|e| Error::CorruptCheckpoint(format!("record `{name}`: {e}")))?;
        Ok((name, t))
    }
}

/// Parses a checkpoint, verifying magic, version and checksum before
/// touching any record.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(HybridModel, Option<AdamState>)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::CorruptCheckpoint("missing HDNN header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version > FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if version == 0 {
        return Err(Error::CorruptCheckpoint("format version 0".into()));
    }
    if bytes.len() < 8 + 8 + 4 + 8 {
        return Err(Error::CorruptCheckpoint(format!(
            "file is only {} bytes",
            bytes.len()
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if fnv1a64(body) != stored {
        return Err(Error::CorruptCheckpoint(
            "checksum mismatch (truncated or modified file)".into(),
        ));
    }

    let mut cur = Cursor {
        bytes: body,
        pos: 8,
    };
    let config_len = cur.len(true)?;
    let config = ModelConfig::from_canonical_text(cur.text(config_len)?)
        .map_err(|e| Error::CorruptCheckpoint(format!("embedded config: {e}")))?;
    let count = cur.len(false)?;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        records.push(cur.record()?);
    }
    if cur.pos != body.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} unexpected bytes after the last record",
            body.len() - cur.pos
        )));
    }
    assemble(config, records)
}

fn assemble(
    config: ModelConfig,
    records: Vec<(String, Tensor)>,
) -> Result<(HybridModel, Option<AdamState>)> {
    let mut model = HybridModel::build(config)?;
    let param_names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
    let buffer_names: Vec<String> = model.buffers().into_iter().map(|(n, _)| n).collect();

    let mut state = HashMap::new();
    let mut normalizer_records = Vec::new();
    let mut adam_records = Vec::new();
    for (name, t) in records {
        if param_names.contains(&name) || buffer_names.contains(&name) {
            if state.insert(name.clone(), t).is_some() {
                return Err(Error::CorruptCheckpoint(format!(
                    "duplicate record `{name}`"
                )));
            }
        } else if name.starts_with("normalizer.") {
            normalizer_records.push((name, t));
        } else if name.starts_with("adam.") {
            adam_records.push((name, t));
        } else {
            return Err(Error::UnknownParameter(name));
        }
    }
    let mut fill = |slots: Vec<(String, &mut Tensor)>| -> Result<()> {
        for (name, slot) in slots {
            let t = state
                .remove(&name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing record `{name}`")))?;
            if t.shape() != slot.shape() {
                return Err(Error::CorruptCheckpoint(format!(
                    "`{name}` has shape {:?}, the config implies {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        Ok(())
    };
    fill(model.parameters_mut())?;
    fill(model.buffers_mut())?;

    let take = |records: &mut Vec<(String, Tensor)>, name: &str| {
        records
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| records.swap_remove(i).1)
    };
    let normalizer = Normalizer::from_records(|name| take(&mut normalizer_records, name))?;
    if let Some((name, _)) = normalizer_records.first() {
        return Err(Error::UnknownParameter(name.clone()));
    }
    model.set_normalizer(normalizer);

    let optimizer = match take(&mut adam_records, ADAM_HYPER) {
        None => None,
        Some(hyper) => {
            let &[step, learning_rate, beta1, beta2, epsilon] = hyper.data() else {
                return Err(Error::CorruptCheckpoint(format!(
                    "{ADAM_HYPER} must hold 5 values"
                )));
            };
            let config = AdamConfig {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            };
            let mut state = AdamState::new(config, &model.parameter_shapes())?;
            state.step = step as u64;
            for (i, name) in param_names.iter().enumerate() {
                for (prefix, slot) in [
                    ("m", &mut state.first_moment[i]),
                    ("v", &mut state.second_moment[i]),
                ] {
                    let key = format!("adam.{prefix}.{name}");
                    let t = take(&mut adam_records, &key).ok_or_else(|| {
                        Error::CorruptCheckpoint(format!("missing record `{key}`"))
                    })?;
                    if t.shape() != slot.shape() {
                        return Err(Error::CorruptCheckpoint(format!(
                            "`{key}` has shape {:?}",
                            t.shape()
                        )));
                    }
                    *slot = t;
                }
            }
            Some(state)
        }
    };
    if let Some((name, _)) = adam_records.first() {
        return Err(Error::UnknownParameter(name.clone()));
    }
    Ok((model, optimizer))
}

pub fn save_checkpoint(
    model: &HybridModel,
    optimizer: Option<&AdamState>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(model, optimizer)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(HybridModel, Option<AdamState>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
