//! Vocoder conditioning: F0 resampling, per-frame feature assembly and a
//! deterministic harmonic synthesizer standing in for a neural vocoder.

mod format;
mod synth;

pub use format::{read_conditioning, write_conditioning};
pub use synth::{toy_synthesize, HARMONICS, NOISE_LEVEL, VOICED_GAIN};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pitch_analysis::PitchTrack;
use crate::prosody::{EmotionEmbedding, EMOTION_DIM};
use crate::unit_codec::{check_units, UnitSequence};

/// Resamples a track to `target_rate` frames per second.
///
/// The output has `round(len * frame_period * target_rate)` samples spread
/// evenly over the source index range, so the first and last values are kept
/// exactly. Between two voiced frames the value is linear in time; when either
/// neighbour is unvoiced the nearer neighbour is held, so unvoiced runs stay at
/// zero instead of being bridged.
pub fn interpolate_f0(track: &PitchTrack, target_rate: f64) -> Result<Vec<f64>> {
    if track.is_empty() {
        return Err(Error::InsufficientData("cannot resample an empty track".into()));
    }
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::invalid("target rate must be positive"));
    }
    let src = track.f0_hz();
    let voiced = track.voiced();
    let n_out = (src.len() as f64 * track.frame_period() * target_rate).round() as usize;
    let n_out = n_out.max(1);
    if n_out == src.len() {
        return Ok(src.to_vec());
    }
    let last = (src.len() - 1) as f64;
    let step = if n_out > 1 { last / (n_out - 1) as f64 } else { 0.0 };
    Ok((0..n_out)
        .map(|j| {
            let pos = if n_out > 1 && j + 1 == n_out {
                last
            } else {
                j as f64 * step
            };
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 || i + 1 >= src.len() {
                return src[i.min(src.len() - 1)];
            }
            if voiced[i] && voiced[i + 1] {
                src[i] + frac * (src[i + 1] - src[i])
            } else if frac < 0.5 {
                src[i]
            } else {
                src[i + 1]
            }
        })
        .collect())
}

/// `K` unit vectors of dimension `E`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "embedding table of {} values does not split into rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding values must be finite"));
        }
        Ok(Self { dim, data })
    }

    /// Seeded table with entries uniform in `[-1, 1)`.
    pub fn random(k: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_flat((0..k * dim).map(|_| rng.random_range(-1.0..1.0)).collect(), dim)
    }

    pub fn k(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, unit: u32) -> &[f64] {
        let start = unit as usize * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Per-frame vocoder input with column blocks
/// `[unit embedding (E) | f0 (1) | emotion (96) | speaker (S)]`.
///
/// Values are held in single precision, which is also what the file format
/// stores, so a write/read round trip is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningMatrix {
    rows: usize,
    unit_dim: usize,
    speaker_dim: usize,
    frame_period: f64,
    data: Vec<f32>,
}

impl ConditioningMatrix {
    pub fn from_parts(
        rows: usize,
        unit_dim: usize,
        speaker_dim: usize,
        frame_period: f64,
        data: Vec<f32>,
    ) -> Result<Self> {
        let cols = unit_dim + 1 + EMOTION_DIM + speaker_dim;
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if !(frame_period > 0.0 && frame_period.is_finite()) {
            return Err(Error::invalid("frame period must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("conditioning values must be finite"));
        }
        let m = Self {
            rows,
            unit_dim,
            speaker_dim,
            frame_period,
            data,
        };
        if (0..rows).any(|t| m.f0(t) < 0.0) {
            return Err(Error::invalid("f0 column must be non-negative"));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.unit_dim + 1 + EMOTION_DIM + self.speaker_dim
    }

    pub fn unit_dim(&self) -> usize {
        self.unit_dim
    }

    pub fn speaker_dim(&self) -> usize {
        self.speaker_dim
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f32] {
        let c = self.cols();
        &self.data[t * c..(t + 1) * c]
    }

    pub fn unit_block(&self, t: usize) -> &[f32] {
        &self.row(t)[..self.unit_dim]
    }

    pub fn f0(&self, t: usize) -> f32 {
        self.row(t)[self.unit_dim]
    }

    pub fn emotion_block(&self, t: usize) -> &[f32] {
        let s = self.unit_dim + 1;
        &self.row(t)[s..s + EMOTION_DIM]
    }

    pub fn speaker_block(&self, t: usize) -> &[f32] {
        &self.row(t)[self.unit_dim + 1 + EMOTION_DIM..]
    }
}

/// Builds row `t` as `unit_emb[units[t]] ++ [f0[t]] ++ emo ++ spk`.
pub fn assemble_conditioning(
    units: &UnitSequence,
    unit_emb: &EmbeddingTable,
    f0: &[f64],
    emo: &EmotionEmbedding,
    spk: &[f64],
) -> Result<ConditioningMatrix> {
    if units.len() != f0.len() {
        return Err(Error::UnalignedStreams {
            left: units.len(),
            right: f0.len(),
        });
    }
    check_units(&units.units, unit_emb.k())?;
    if f0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("f0 values must be finite and non-negative"));
    }
    if spk.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("speaker vector must be finite"));
    }
    let cols = unit_emb.dim() + 1 + EMOTION_DIM + spk.len();
    let mut data = Vec::with_capacity(units.len() * cols);
    for (&u, &f) in units.units.iter().zip(f0) {
        data.extend(unit_emb.row(u).iter().map(|&v| v as f32));
        data.push(f as f32);
        data.extend(emo.values().iter().map(|&v| v as f32));
        data.extend(spk.iter().map(|&v| v as f32));
    }
    ConditioningMatrix::from_parts(units.len(), unit_emb.dim(), spk.len(), units.frame_period, data)
}
