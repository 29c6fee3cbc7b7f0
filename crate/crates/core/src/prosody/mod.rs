//! Emotion and speaker conditioning plus the duration and pitch predictors.
//!
//! Both predictors share [`PredictorModel`]: a unit-embedding lookup followed by
//! a small convolution stack over time, with the utterance emotion embedding
//! concatenated to every timestep. The duration head regresses the number of
//! frames for each reduced unit; the pitch head emits `d` sigmoid activations
//! per frame that decode through a [`PitchQuantizer`](crate::pitch_analysis::PitchQuantizer).

mod format;
mod gradcheck;
mod model;
mod train;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use format::{read_checkpoint, read_embeddings, write_checkpoint, write_embeddings};
pub use gradcheck::{compare_gradients, grad_check, GradCheckReport};
pub use model::{Architecture, ParamBlock, PredictorKind, PredictorModel};
pub use train::{example_loss, loss_and_gradient, train_predictor, Target, TrainingConfig, TrainingExample};

use crate::error::{Error, Result};
use crate::pitch_analysis::PitchQuantizer;
use crate::unit_codec::{FrameFeatures, ReducedUnitSequence, UnitSequence};

/// Size of the utterance-level emotion embedding.
pub const EMOTION_DIM: usize = 96;

/// Default speaker embedding size.
pub const DEFAULT_SPEAKER_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionEmbedding(Vec<f64>);

impl EmotionEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != EMOTION_DIM {
            return Err(Error::DimensionMismatch {
                expected: EMOTION_DIM,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("emotion embedding must be finite"));
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; EMOTION_DIM])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Affine map from frame features to the emotion space; the utterance
/// embedding is the temporal mean of the per-frame outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionBottleneck {
    input_dim: usize,
    /// `[EMOTION_DIM][input_dim]`, row-major.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl EmotionBottleneck {
    pub fn new(input_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || weight.len() != EMOTION_DIM * input_dim || bias.len() != EMOTION_DIM {
            return Err(Error::invalid(format!(
                "bottleneck needs a {EMOTION_DIM}x{input_dim} weight and {EMOTION_DIM} biases"
            )));
        }
        Ok(Self {
            input_dim,
            weight,
            bias,
        })
    }

    /// Seeded random projection with variance `1 / input_dim`.
    pub fn random(input_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (3.0 / input_dim.max(1) as f64).sqrt();
        let weight = (0..EMOTION_DIM * input_dim).map(|_| rng.random_range(-a..a)).collect();
        Self::new(input_dim, weight, vec![0.0; EMOTION_DIM])
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.input_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(frame).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn encode(&self, features: &FrameFeatures) -> Result<EmotionEmbedding> {
        encode_emotion(features, self)
    }
}

/// Temporal mean pooling of the bottleneck outputs.
pub fn encode_emotion(features: &FrameFeatures, bottleneck: &EmotionBottleneck) -> Result<EmotionEmbedding> {
    if features.is_empty() {
        return Err(Error::invalid("emotion encoder needs at least one frame"));
    }
    if features.dim() != bottleneck.input_dim {
        return Err(Error::DimensionMismatch {
            expected: bottleneck.input_dim,
            actual: features.dim(),
        });
    }
    let mut acc = vec![0.0; EMOTION_DIM];
    for frame in features.frames() {
        for (a, v) in acc.iter_mut().zip(bottleneck.apply(frame)) {
            *a += v;
        }
    }
    let n = features.len() as f64;
    EmotionEmbedding::new(acc.into_iter().map(|a| a / n).collect())
}

/// Trainable lookup table of speaker vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl SpeakerTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("speaker dimension must be positive"));
        }
        Ok(Self {
            dim,
            entries: BTreeMap::new(),
        })
    }

    /// Table with one seeded random vector per id. Vectors depend only on the
    /// seed and the sorted id list.
    pub fn random<'a>(ids: impl IntoIterator<Item = &'a str>, dim: usize, seed: u64) -> Result<Self> {
        let mut table = Self::new(dim)?;
        let mut ids: Vec<&str> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for id in ids {
            let v = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            table.insert(id, v)?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.entries.insert(id.into(), vector);
        Ok(())
    }

    pub fn lookup(&self, id: &str) -> Result<&[f64]> {
        self.entries
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSpeaker(id.to_string()))
    }

    /// Mutable access for training updates.
    pub fn lookup_mut(&mut self, id: &str) -> Result<&mut [f64]> {
        self.entries
            .get_mut(id)
            .map(Vec::as_mut_slice)
            .ok_or_else(|| Error::UnknownSpeaker(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Pretty JSON with ids in sorted order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table of finite numbers serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "speaker table",
            message: e.to_string(),
        })?;
        let mut table = Self::new(raw.dim)?;
        for (id, v) in raw.entries {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("speaker {id:?} has a non-finite value")));
            }
            table.insert(id, v)?;
        }
        Ok(table)
    }
}


pub fn speaker_lookup<'a>(table: &'a SpeakerTable, speaker_id: &str) -> Result<&'a [f64]> {
    table.lookup(speaker_id)
}

/// Maps a raw duration regression output to a frame count: nearest integer,
/// never below one.
pub fn round_duration(raw: f64) -> u32 {
    if raw.is_nan() {
        return 1;
    }
    raw.round().clamp(1.0, u32::MAX as f64) as u32
}

/// One predicted frame count per reduced unit.
pub fn predict_durations(
    reduced: &ReducedUnitSequence,
    emotion: &EmotionEmbedding,
    model: &PredictorModel,
) -> Result<Vec<u32>> {
    if model.kind() != PredictorKind::Duration {
        return Err(Error::invalid("model is not a duration predictor"));
    }
    let raw = model.forward(reduced.units(), emotion)?;
    Ok(raw.into_iter().map(round_duration).collect())
}

/// Per-frame sigmoid activations over the quantizer bins.
pub fn predict_pitch(
    units: &UnitSequence,
    emotion: &EmotionEmbedding,
    model: &PredictorModel,
    quantizer: &PitchQuantizer,
) -> Result<Vec<Vec<f64>>> {
    if model.kind() != PredictorKind::Pitch {
        return Err(Error::invalid("model is not a pitch predictor"));
    }
    let d = model.architecture().out_dim;
    if d != quantizer.bins() {
        return Err(Error::DimensionMismatch {
            expected: quantizer.bins(),
            actual: d,
        });
    }
    let logits = model.forward(&units.units, emotion)?;
    Ok(logits
        .chunks_exact(d)
        .map(|row| row.iter().map(|&z| sigmoid(z)).collect())
        .collect())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emotion_of_identical_frames_is_bottleneck_output() {
        let b = EmotionBottleneck::random(5, 1).unwrap();
        let x = vec![0.3, -1.0, 2.0, 0.0, 0.5];
        let f = FrameFeatures::new(vec![x.clone(); 7], 0.02).unwrap();
        let emb = encode_emotion(&f, &b).unwrap();
        assert_eq!(emb.values().len(), EMOTION_DIM);
        for (a, e) in emb.values().iter().zip(b.apply(&x)) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn emotion_is_order_invariant() {
        let b = EmotionBottleneck::random(3, 2).unwrap();
        let frames: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, (i * i) as f64 * 0.1, -1.0]).collect();
        let mut rev = frames.clone();
        rev.reverse();
        let a = encode_emotion(&FrameFeatures::new(frames, 0.02).unwrap(), &b).unwrap();
        let r = encode_emotion(&FrameFeatures::new(rev, 0.02).unwrap(), &b).unwrap();
        for (x, y) in a.values().iter().zip(r.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn emotion_rejects_wrong_dim() {
        let b = EmotionBottleneck::random(3, 2).unwrap();
        let f = FrameFeatures::new(vec![vec![1.0, 2.0]], 0.02).unwrap();
        assert!(encode_emotion(&f, &b).is_err());
        assert!(EmotionEmbedding::new(vec![0.0; 95]).is_err());
    }

    #[test]
    fn speaker_table_lookup() {
        let mut t = SpeakerTable::new(3).unwrap();
        t.insert("spk1", vec![1.0, 2.0, 3.0]).unwrap();
        t.insert("spk2", vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(speaker_lookup(&t, "spk1").unwrap(), &[1.0, 2.0, 3.0]);
        assert_ne!(t.lookup("spk1").unwrap(), t.lookup("spk2").unwrap());
        let err = t.lookup("ghost").unwrap_err();
        assert!(err.to_string().contains("unknown speaker"));
        assert!(t.insert("bad", vec![1.0]).is_err());
        t.lookup_mut("spk1").unwrap()[0] = 9.0;
        assert_eq!(t.lookup("spk1").unwrap()[0], 9.0);
    }

    #[test]
    fn random_speaker_table_is_order_independent() {
        let a = SpeakerTable::random(["b", "a", "c"], 4, 7).unwrap();
        let b = SpeakerTable::random(["c", "a", "b", "a"], 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn duration_rounding() {
        assert_eq!(round_duration(0.2), 1);
        assert_eq!(round_duration(-3.0), 1);
        assert_eq!(round_duration(2.49), 2);
        assert_eq!(round_duration(2.5), 3);
        assert_eq!(round_duration(f64::NAN), 1);
    }

    #[test]
    fn prediction_shapes() {
        let emo = EmotionEmbedding::zeros();
        let dur = PredictorModel::new(Architecture::duration(10).with_channels(vec![8]), 0).unwrap();
        let reduced = ReducedUnitSequence::from_units(vec![1, 2, 3, 4, 5]).unwrap();
        let d = predict_durations(&reduced, &emo, &dur).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.iter().all(|&x| x >= 1));

        let q = PitchQuantizer::new(6, -3.0, 3.0).unwrap();
        let pitch = PredictorModel::new(Architecture::pitch(10, 6).with_channels(vec![8]), 0).unwrap();
        let frames = UnitSequence::new(vec![0, 0, 9, 3], 0.02);
        let acts = predict_pitch(&frames, &emo, &pitch, &q).unwrap();
        assert_eq!(acts.len(), 4);
        assert!(acts.iter().flatten().all(|&a| a > 0.0 && a < 1.0));

        let wrong_q = PitchQuantizer::new(5, -3.0, 3.0).unwrap();
        assert!(predict_pitch(&frames, &emo, &pitch, &wrong_q).is_err());
        assert!(predict_durations(&reduced, &emo, &pitch).is_err());
        let out_of_range = ReducedUnitSequence::from_units(vec![10]).unwrap();
        assert!(predict_durations(&out_of_range, &emo, &dur).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
