//! Model checkpoint file format.
//!
//! Binary, little-endian: magic `SKRM`, version u32 = 1, a length-prefixed
//! UTF-8 config record of `key=value` lines, a tensor count, then per tensor
//! a length-prefixed name, rank, dims and the raw f32 payload, and finally a
//! CRC32 of every preceding byte. Round-trips are bit-exact.

use std::path::Path;

use crate::activation::ActivationKind;
use crate::error::{CheckpointError, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Shape;
use crate::unet::{init_params, UNetConfig, UNetParams};

pub const MAGIC: &[u8; 4] = b"SKRM";
pub const VERSION: u32 = 1;

/// Training metadata stored alongside the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub best_val_mcc: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: UNetConfig,
    pub params: UNetParams<f32>,
    pub meta: CheckpointMeta,
}

fn config_record(config: &UNetConfig, meta: &CheckpointMeta) -> String {
    let mut s = String::new();
    s.push_str(&format!("depth={}\n", config.depth));
    s.push_str(&format!("base_channels={}\n", config.base_channels));
    s.push_str(&format!("num_classes={}\n", config.num_classes));
    s.push_str(&format!("activation={}\n", config.activation.name()));
    s.push_str(&format!("dropout={}\n", config.dropout_rate));
    s.push_str(&format!("input_h={}\n", config.input_size.0));
    s.push_str(&format!("input_w={}\n", config.input_size.1));
    s.push_str(&format!("epoch={}\n", meta.epoch));
    s.push_str(&format!("best_val_mcc={}\n", meta.best_val_mcc));
    s.push_str(&format!("seed={}\n", meta.seed));
    s
}

fn parse_config_record(text: &str) -> Result<(UNetConfig, CheckpointMeta)> {
    let mut config = UNetConfig::default();
    let mut meta = CheckpointMeta {
        epoch: 0,
        best_val_mcc: 0.0,
        seed: 0,
    };
    let bad = |msg: String| Error::Checkpoint(CheckpointError::BadConfig(msg));
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line without '=': {line}")))?;
        match key {
            "depth" => config.depth = value.parse().map_err(|_| bad(format!("depth={value}")))?,
            "base_channels" => {
                config.base_channels =
                    value.parse().map_err(|_| bad(format!("base_channels={value}")))?
            }
            "num_classes" => {
                config.num_classes =
                    value.parse().map_err(|_| bad(format!("num_classes={value}")))?
            }
            "activation" => {
                config.activation = ActivationKind::parse(value)
                    .ok_or_else(|| bad(format!("activation={value}")))?
            }
            "dropout" => {
                config.dropout_rate = value.parse().map_err(|_| bad(format!("dropout={value}")))?
            }
            "input_h" => {
                config.input_size.0 = value.parse().map_err(|_| bad(format!("input_h={value}")))?
            }
            "input_w" => {
                config.input_size.1 = value.parse().map_err(|_| bad(format!("input_w={value}")))?
            }
            "epoch" => meta.epoch = value.parse().map_err(|_| bad(format!("epoch={value}")))?,
            "best_val_mcc" => {
                meta.best_val_mcc =
                    value.parse().map_err(|_| bad(format!("best_val_mcc={value}")))?
            }
            "seed" => meta.seed = value.parse().map_err(|_| bad(format!("seed={value}")))?,
            other => return Err(bad(format!("unknown key {other}"))),
        }
    }
    Ok((config, meta))
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    push_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

/// Serialize to bytes (exposed for tests that need to corrupt files).
pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);
    push_str(&mut buf, &config_record(&ckpt.config, &ckpt.meta));
    let view = ckpt.params.flat_view();
    push_u32(&mut buf, view.len() as u32);
    for (name, values) in &view {
        push_str(&mut buf, name);
        // Biases and PReLU slopes are rank-1; weights carry their 4-D shape.
        let dims = named_dims(&ckpt.params, name);
        push_u32(&mut buf, dims.len() as u32);
        for d in &dims {
            push_u32(&mut buf, *d as u32);
        }
        for v in values.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    push_u32(&mut buf, crc);
    buf
}

fn named_dims<T: Scalar>(params: &UNetParams<T>, name: &str) -> Vec<usize> {
    if name.ends_with(".weight") {
        let s = find_weight_shape(params, name).expect("name comes from flat_view");
        vec![s.n, s.c, s.h, s.w]
    } else {
        let len = params
            .flat_view()
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.len())
            .expect("name comes from flat_view");
        vec![len]
    }
}

fn find_weight_shape<T: Scalar>(params: &UNetParams<T>, name: &str) -> Option<Shape> {
    let last = params.encoder.len() - 1;
    for (i, b) in params.encoder.iter().enumerate() {
        let prefix = if i == last { "bottleneck".to_string() } else { format!("enc{i}") };
        if name == format!("{prefix}.conv1.weight") {
            return Some(b.conv1.weights.shape());
        }
        if name == format!("{prefix}.conv2.weight") {
            return Some(b.conv2.weights.shape());
        }
    }
    for (level, d) in params.decoder.iter().enumerate() {
        if name == format!("dec{level}.up.weight") {
            return Some(d.up.weights.shape());
        }
        if name == format!("dec{level}.conv1.weight") {
            return Some(d.conv1.weights.shape());
        }
        if name == format!("dec{level}.conv2.weight") {
            return Some(d.conv2.weights.shape());
        }
    }
    if name == "head.weight" {
        return Some(params.head.weights.shape());
    }
    None
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, to_bytes(ckpt))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> std::result::Result<String, CheckpointError> {
        let len = self.u32()? as usize;
        let b = self.take(len)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| CheckpointError::BadConfig("non-UTF-8 string".into()))
    }
}

/// Parse checkpoint bytes (exposed for tests).
pub fn from_bytes(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4).map_err(Error::Checkpoint)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let version = r.u32().map_err(Error::Checkpoint)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version).into());
    }
    let record = r.string().map_err(Error::Checkpoint)?;
    let tensor_count = r.u32().map_err(Error::Checkpoint)? as usize;

    struct RawTensor {
        name: String,
        dims: Vec<usize>,
        values: Vec<f32>,
    }
    let mut tensors = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let name = r.string().map_err(Error::Checkpoint)?;
        let rank = r.u32().map_err(Error::Checkpoint)? as usize;
        if rank > 4 {
            return Err(CheckpointError::BadConfig(format!("tensor {name} has rank {rank}")).into());
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32().map_err(Error::Checkpoint)? as usize);
        }
        let len: usize = dims.iter().product();
        let raw = r.take(len * 4).map_err(Error::Checkpoint)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(RawTensor { name, dims, values });
    }
    let crc_stored = r.u32().map_err(Error::Checkpoint)?;
    if r.pos != buf.len() {
        return Err(CheckpointError::Truncated.into());
    }
    if crc32fast::hash(&buf[..buf.len() - 4]) != crc_stored {
        return Err(CheckpointError::CrcMismatch.into());
    }

    let (config, meta) = parse_config_record(&record)?;
    config.validate().map_err(|e| {
        Error::Checkpoint(CheckpointError::BadConfig(format!("embedded config: {e}")))
    })?;

    // Build the expected layout from the embedded config and fill it,
    // reporting the first tensor whose name or shape disagrees.
    let mut params: UNetParams<f32> = init_params(&config, meta.seed)?;
    {
        let expected = params.flat_view();
        for i in 0..expected.len().max(tensors.len()) {
            match (expected.get(i), tensors.get(i)) {
                (Some((expected_name, _)), Some(raw)) => {
                    let expected_dims = named_dims(&params, expected_name);
                    if *expected_name != raw.name || expected_dims != raw.dims {
                        return Err(CheckpointError::ShapeMismatch {
                            name: raw.name.clone(),
                            expected: format!("{expected_name} {expected_dims:?}"),
                            found: format!("{} {:?}", raw.name, raw.dims),
                        }
                        .into());
                    }
                }
                (Some((expected_name, _)), None) => {
                    return Err(CheckpointError::ShapeMismatch {
                        name: expected_name.clone(),
                        expected: format!("{expected_name} {:?}", named_dims(&params, expected_name)),
                        found: "missing".into(),
                    }
                    .into());
                }
                (None, Some(raw)) => {
                    return Err(CheckpointError::ShapeMismatch {
                        name: raw.name.clone(),
                        expected: "no further tensors".into(),
                        found: format!("{} {:?}", raw.name, raw.dims),
                    }
                    .into());
                }
                (None, None) => unreachable!(),
            }
        }
    }
    for ((_, slot), raw) in params.flat_view_mut().iter_mut().zip(&tensors) {
        slot.copy_from_slice(&raw.values);
    }
    Ok(Checkpoint {
        config,
        params,
        meta,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path)?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unet::RunMode;

    fn sample_checkpoint() -> Checkpoint {
        let config = UNetConfig {
            depth: 2,
            base_channels: 4,
            num_classes: 3,
            activation: ActivationKind::Relu,
            dropout_rate: 0.05,
            input_size: (16, 16),
        };
        let params = init_params(&config, 9).unwrap();
        Checkpoint {
            config,
            params,
            meta: CheckpointMeta {
                epoch: 7,
                best_val_mcc: 0.8125,
                seed: 9,
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = sample_checkpoint();
        let bytes = to_bytes(&ckpt);
        let loaded = from_bytes(&bytes).unwrap();
        assert_eq!(loaded, ckpt);
        // And serializing again yields identical bytes, CRC included.
        assert_eq!(to_bytes(&loaded), bytes);
    }

    #[test]
    fn round_trip_preserves_forward_output() {
        let ckpt = sample_checkpoint();
        let loaded = from_bytes(&to_bytes(&ckpt)).unwrap();
        let img = crate::tensor::Tensor::filled(Shape::new(1, 1, 16, 16), 0.5f32).unwrap();
        let (a, _) =
            crate::unet::forward(&ckpt.params, &ckpt.config, img.clone(), RunMode::Infer, 0)
                .unwrap();
        let (b, _) =
            crate::unet::forward(&loaded.params, &loaded.config, img, RunMode::Infer, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_magic_is_bad_magic() {
        let mut bytes = to_bytes(&sample_checkpoint());
        bytes[0] = b'X';
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::Checkpoint(CheckpointError::BadMagic))
        ));
    }

    #[test]
    fn wrong_version_detected() {
        let mut bytes = to_bytes(&sample_checkpoint());
        bytes[4] = 99;
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::Checkpoint(CheckpointError::Version(99)))
        ));
    }

    #[test]
    fn truncation_detected() {
        let bytes = to_bytes(&sample_checkpoint());
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            from_bytes(cut),
            Err(Error::Checkpoint(CheckpointError::Truncated))
        ));
    }

    #[test]
    fn payload_corruption_is_crc_mismatch() {
        let mut bytes = to_bytes(&sample_checkpoint());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::Checkpoint(CheckpointError::CrcMismatch))
        ));
    }

    #[test]
    fn depth_mismatch_names_first_offending_tensor() {
        // Rewrite the config record to claim depth 3 (same byte length),
        // recompute the CRC, and expect a shape mismatch naming the tensor
        // where the depth-2 file diverges from the depth-3 layout.
        let ckpt = sample_checkpoint();
        let mut bytes = to_bytes(&ckpt);
        let record = config_record(&ckpt.config, &ckpt.meta);
        let patched = record.replace("depth=2", "depth=3");
        assert_eq!(record.len(), patched.len());
        let start = 4 + 4 + 4;
        bytes[start..start + record.len()].copy_from_slice(patched.as_bytes());
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
        let len = bytes.len();
        bytes[len - 4..].copy_from_slice(&crc.to_le_bytes());

        match from_bytes(&bytes) {
            Err(Error::Checkpoint(CheckpointError::ShapeMismatch { name, .. })) => {
                assert!(!name.is_empty());
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }
}
