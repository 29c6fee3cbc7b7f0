//! `CND1` conditioning files: the header line `CND1 T E S frame_period`, then
//! `T * (E + 1 + 96 + S)` row-major f32 values, little-endian.

use super::ConditioningMatrix;
use crate::error::{Error, Result};

pub fn write_conditioning(m: &ConditioningMatrix) -> Vec<u8> {
    let header = format!(
        "CND1 {} {} {} {}\n",
        m.rows(),
        m.unit_dim(),
        m.speaker_dim(),
        m.frame_period()
    );
    let mut out = Vec::with_capacity(header.len() + 4 * m.as_flat().len());
    out.extend_from_slice(header.as_bytes());
    for v in m.as_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_conditioning(bytes: &[u8]) -> Result<ConditioningMatrix> {
    let bad = |message: String| Error::Format {
        what: "conditioning file",
        message,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| bad(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "CND1" {
        return Err(bad(format!("bad header {header:?}")));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
    let (rows, e, s) = (int(fields[1])?, int(fields[2])?, int(fields[3])?);
    let frame_period: f64 = fields[4].parse().map_err(|e| bad(format!("frame period: {e}")))?;
    let body = &bytes[nl + 1..];
    if !body.len().is_multiple_of(4) {
        return Err(bad("body is not a whole number of f32 values".into()));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ConditioningMatrix::from_parts(rows, e, s, frame_period, data).map_err(|err| bad(err.to_string()))
}
