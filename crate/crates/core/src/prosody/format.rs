//! Binary model checkpoints (`PPM1`) and embedding files (`EMB1`).
//!
//! A checkpoint is the line `PPM1\n`, one text line of hyperparameters
//!
//! ```text
//! kind=pitch units=64 unit_dim=32 emotion_dim=96 kernel=3 channels=64,64 out=32 params=47200
//! ```
//!
//! and then `params` 32-bit IEEE-754 little-endian floats in the order
//! documented on [`PredictorModel`]. Loading therefore rounds parameters to
//! single precision.
//!
//! An embedding file is the 4 bytes `EMB1`, the vector count and dimension as
//! 32-bit little-endian unsigned integers, then count x dimension f32 values.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Architecture, EmotionEmbedding, PredictorKind, PredictorModel, EMOTION_DIM};
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8] = b"PPM1\n";
const EMBEDDING_MAGIC: &[u8] = b"EMB1";

pub fn write_checkpoint(model: &PredictorModel) -> Vec<u8> {
    let arch = model.architecture();
    let channels = arch.channels.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let mut header = String::new();
    let _ = writeln!(
        header,
        "kind={} units={} unit_dim={} emotion_dim={EMOTION_DIM} kernel={} channels={channels} out={} params={}",
        arch.kind.as_str(),
        arch.num_units,
        arch.unit_dim,
        arch.kernel,
        arch.out_dim,
        model.num_params()
    );
    let mut out = Vec::with_capacity(CHECKPOINT_MAGIC.len() + header.len() + 4 * model.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(header.as_bytes());
    for &p in model.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<PredictorModel> {
    let bad = |message: String| Error::Format {
        what: "checkpoint",
        message,
    };
    let rest = bytes
        .strip_prefix(CHECKPOINT_MAGIC)
        .ok_or_else(|| bad("missing PPM1 magic".into()))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("unterminated header".into()))?;
    let header = std::str::from_utf8(&rest[..nl]).map_err(|e| bad(e.to_string()))?;
    let body = &rest[nl + 1..];

    let fields: HashMap<&str, &str> = header.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| bad(format!("missing {key}")));
    let num = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|e| bad(format!("{key}: {e}"))) };

    if num("emotion_dim")? != EMOTION_DIM {
        return Err(bad(format!("emotion_dim must be {EMOTION_DIM}")));
    }
    let arch = Architecture {
        kind: get("kind")?.parse::<PredictorKind>()?,
        num_units: num("units")?,
        unit_dim: num("unit_dim")?,
        kernel: num("kernel")?,
        channels: get("channels")?
            .split(',')
            .map(|c| c.parse().map_err(|e| bad(format!("channels: {e}"))))
            .collect::<Result<_>>()?,
        out_dim: num("out")?,
    };
    arch.validate()?;
    let n = num("params")?;
    if n != arch.num_params() || body.len() != 4 * n {
        return Err(bad(format!(
            "expected {} parameters, header says {n} and body holds {} bytes",
            arch.num_params(),
            body.len()
        )));
    }
    let params = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    PredictorModel::from_params(arch, params)
}

/// Packs equal-length vectors; an empty slice writes dimension 0.
pub fn write_embeddings(vectors: &[&[f64]]) -> Result<Vec<u8>> {
    let dim = vectors.first().map_or(0, |v| v.len());
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    let mut out = Vec::with_capacity(12 + 4 * dim * vectors.len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for v in vectors {
        for &x in *v {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_embeddings(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let bad = |message: &str| Error::Format {
        what: "embedding file",
        message: message.to_string(),
    };
    let rest = bytes
        .strip_prefix(EMBEDDING_MAGIC)
        .ok_or_else(|| bad("missing EMB1 magic"))?;
    if rest.len() < 8 {
        return Err(bad("truncated header"));
    }
    let count = u32::from_le_bytes(rest[0..4].try_into().expect("4 bytes")) as usize;
    let dim = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes")) as usize;
    let body = &rest[8..];
    if body.len() != 4 * count * dim {
        return Err(bad("body length does not match count x dimension"));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if dim == 0 {
        return Ok(vec![Vec::new(); count]);
    }
    Ok(values.chunks_exact(dim).map(<[f64]>::to_vec).collect())
}

impl EmotionEmbedding {
    /// Rounds every component to single precision, matching what an
    /// embedding file stores.
    pub fn to_f32_precision(&self) -> Self {
        Self(self.0.iter().map(|&v| v as f32 as f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let model =
            PredictorModel::new(Architecture::pitch(5, 4).with_unit_dim(3).with_channels(vec![6, 2]), 8).unwrap();
        let bytes = write_checkpoint(&model);
        assert!(bytes
            .starts_with(b"PPM1\nkind=pitch units=5 unit_dim=3 emotion_dim=96 kernel=3 channels=6,2 out=4 params="));
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(back.architecture(), model.architecture());
        for (a, b) in back.params().iter().zip(model.params()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        // Second pass is exact: values are already single precision.
        assert_eq!(write_checkpoint(&back), bytes);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(read_checkpoint(b"nope").is_err());
        let model = PredictorModel::new(Architecture::duration(2).with_channels(vec![2]), 0).unwrap();
        let mut bytes = write_checkpoint(&model);
        bytes.pop();
        assert!(read_checkpoint(&bytes).is_err());
    }

    #[test]
    fn embeddings_round_trip() {
        let a = vec![1.0, 0.5, -2.0];
        let b = vec![0.25, 0.0, 3.0];
        let bytes = write_embeddings(&[&a, &b]).unwrap();
        assert_eq!(&bytes[..12], b"EMB1\x02\x00\x00\x00\x03\x00\x00\x00");
        assert_eq!(read_embeddings(&bytes).unwrap(), vec![a.clone(), b]);
        assert!(write_embeddings(&[&a, &[1.0][..]]).is_err());
        assert!(read_embeddings(&bytes[..bytes.len() - 1]).is_err());
    }
}
