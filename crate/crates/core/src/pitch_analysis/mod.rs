//! F0 tracking, per-speaker normalization, and F0 bin quantization.

mod format;
mod quantizer;
mod tracker;

pub use format::{parse_f0_csv, parse_speaker_stats_csv, read_wav, write_f0_csv, write_speaker_stats_csv, write_wav};
pub use quantizer::{bins_to_f0, f0_to_bins, PitchQuantizer, VOICING_CUTOFF};
pub use tracker::{track_f0, TrackerConfig};

use crate::error::{Error, Result};

/// Lower bound applied to per-speaker F0 standard deviations.
pub const STD_FLOOR: f64 = 1e-5;

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("waveform samples must be finite"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Per-frame F0 in Hz; `f0_hz[i] > 0` exactly when `voiced[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    f0_hz: Vec<f64>,
    voiced: Vec<bool>,
    frame_period: f64,
}

impl PitchTrack {
    pub fn new(f0_hz: Vec<f64>, voiced: Vec<bool>, frame_period: f64) -> Result<Self> {
        if f0_hz.len() != voiced.len() {
            return Err(Error::invalid(format!(
                "{} f0 values but {} voicing flags",
                f0_hz.len(),
                voiced.len()
            )));
        }
        if !(frame_period > 0.0 && frame_period.is_finite()) {
            return Err(Error::invalid("frame period must be positive"));
        }
        for (i, (&f, &v)) in f0_hz.iter().zip(&voiced).enumerate() {
            if !f.is_finite() || f < 0.0 || (f > 0.0) != v {
                return Err(Error::invalid(format!(
                    "frame {i}: f0 {f} inconsistent with voiced={v}"
                )));
            }
        }
        Ok(Self {
            f0_hz,
            voiced,
            frame_period,
        })
    }

    /// Voicing is implied by a positive F0.
    pub fn from_f0(f0_hz: Vec<f64>, frame_period: f64) -> Result<Self> {
        let voiced = f0_hz.iter().map(|&f| f > 0.0).collect();
        Self::new(f0_hz, voiced, frame_period)
    }

    pub fn f0_hz(&self) -> &[f64] {
        &self.f0_hz
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn voiced_f0(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0_hz.iter().copied().filter(|&f| f > 0.0)
    }

    /// Center time of frame `i` in seconds.
    pub fn time(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.frame_period
    }
}

/// Mean and (population) standard deviation of a speaker's voiced F0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerPitchStats {
    pub speaker_id: String,
    pub mean_hz: f64,
    pub std_hz: f64,
    pub n_voiced: usize,
}

impl SpeakerPitchStats {
    pub fn new(speaker_id: impl Into<String>, mean_hz: f64, std_hz: f64, n_voiced: usize) -> Result<Self> {
        if !(mean_hz.is_finite() && std_hz.is_finite()) || std_hz < STD_FLOOR || n_voiced == 0 {
            return Err(Error::invalid(format!(
                "invalid speaker stats: mean {mean_hz}, std {std_hz}, n_voiced {n_voiced}"
            )));
        }
        Ok(Self {
            speaker_id: speaker_id.into(),
            mean_hz,
            std_hz,
            n_voiced,
        })
    }

    pub fn normalize(&self, f0_hz: f64) -> f64 {
        (f0_hz - self.mean_hz) / self.std_hz
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std_hz + self.mean_hz
    }
}

/// Pools the voiced frames of every track. The deviation uses the divide-by-n
/// convention and is floored at [`STD_FLOOR`].
pub fn speaker_stats<'a>(
    tracks: impl IntoIterator<Item = &'a PitchTrack>,
    speaker_id: &str,
) -> Result<SpeakerPitchStats> {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut values = Vec::new();
    for track in tracks {
        for f in track.voiced_f0() {
            n += 1;
            sum += f;
            values.push(f);
        }
    }
    if n == 0 {
        return Err(Error::NoVoicedSpeech(speaker_id.to_string()));
    }
    let mean = sum / n as f64;
    let var = values.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n as f64;
    Ok(SpeakerPitchStats {
        speaker_id: speaker_id.to_string(),
        mean_hz: mean,
        std_hz: var.sqrt().max(STD_FLOOR),
        n_voiced: n,
    })
}

/// Speaker-normalized F0; `None` marks unvoiced frames.
pub fn normalize_f0(track: &PitchTrack, stats: &SpeakerPitchStats) -> Vec<Option<f64>> {
    track
        .f0_hz
        .iter()
        .map(|&f| (f > 0.0).then(|| stats.normalize(f)))
        .collect()
}

/// Inverse of [`normalize_f0`]. Values that denormalize to a non-positive F0
/// become unvoiced.
pub fn denormalize_f0(values: &[Option<f64>], stats: &SpeakerPitchStats, frame_period: f64) -> Result<PitchTrack> {
    let f0 = values
        .iter()
        .map(|v| v.map_or(0.0, |z| stats.denormalize(z).max(0.0)))
        .collect();
    PitchTrack::from_f0(f0, frame_period)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(f0: &[f64]) -> PitchTrack {
        PitchTrack::from_f0(f0.to_vec(), 0.02).unwrap()
    }

    #[test]
    fn constant_pitch_hits_std_floor() {
        let s = speaker_stats([&track(&[200.0, 0.0, 200.0, 200.0])], "a").unwrap();
        assert_eq!(s.mean_hz, 200.0);
        assert_eq!(s.std_hz, STD_FLOOR);
        assert_eq!(s.n_voiced, 3);
    }

    #[test]
    fn two_point_population_std() {
        let s = speaker_stats([&track(&[100.0]), &track(&[0.0, 300.0])], "a").unwrap();
        assert_eq!(s.mean_hz, 200.0);
        assert_eq!(s.std_hz, 100.0);
    }

    #[test]
    fn all_unvoiced_is_an_error() {
        let err = speaker_stats([&track(&[0.0, 0.0])], "quiet").unwrap_err();
        assert!(matches!(err, Error::NoVoicedSpeech(ref id) if id == "quiet"));
        assert!(err.to_string().contains("no voiced speech"));
    }

    #[test]
    fn normalize_examples() {
        let stats = SpeakerPitchStats::new("a", 150.0, 25.0, 10).unwrap();
        let z = normalize_f0(&track(&[150.0, 175.0, 0.0]), &stats);
        assert_eq!(z, vec![Some(0.0), Some(1.0), None]);
    }

    #[test]
    fn normalize_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f0: Vec<f64> = (0..500)
            .map(|_| {
                if rng.random_bool(0.8) {
                    rng.random_range(60.0..400.0)
                } else {
                    0.0
                }
            })
            .collect();
        let t = track(&f0);
        let stats = speaker_stats([&t], "a").unwrap();
        let back = denormalize_f0(&normalize_f0(&t, &stats), &stats, 0.02).unwrap();
        assert_eq!(back.voiced(), t.voiced());
        let worst = back
            .f0_hz()
            .iter()
            .zip(t.f0_hz())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn pitch_track_rejects_inconsistent_voicing() {
        assert!(PitchTrack::new(vec![100.0], vec![false], 0.02).is_err());
        assert!(PitchTrack::new(vec![0.0], vec![true], 0.02).is_err());
        assert!(PitchTrack::new(vec![-1.0], vec![false], 0.02).is_err());
        assert!(PitchTrack::new(vec![1.0, 2.0], vec![true], 0.02).is_err());
    }
}
