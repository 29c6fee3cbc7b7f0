use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitch_analysis::{PitchQuantizer, TrackerConfig};
use crate::prosody::{Architecture, PredictorKind, TrainingConfig};

/// Environment variable that may name the configuration file.
pub const CONFIG_ENV: &str = "PROSODY_UNITS_CONFIG";

/// Pipeline settings. Every field has a default, so an empty file is valid.
///
/// The file is TOML: `key = value` lines under `[units]`, `[pitch]`,
/// `[model]`, `[synth]` and `[eval]` headers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub units: UnitsSection,
    pub pitch: PitchSection,
    pub model: ModelSection,
    pub synth: SynthSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsSection {
    /// Codebook size.
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Seconds per frame for features, units and F0.
    pub frame_period: f64,
    /// Cepstral coefficients per frame when features come from audio.
    pub mfcc: usize,
}

impl Default for UnitsSection {
    fn default() -> Self {
        Self {
            k: 64,
            max_iters: 100,
            seed: 0,
            frame_period: 0.02,
            mfcc: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitchSection {
    pub f_min: f64,
    pub f_max: f64,
    pub voicing_threshold: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for PitchSection {
    fn default() -> Self {
        Self {
            f_min: 60.0,
            f_max: 400.0,
            voicing_threshold: 0.5,
            bins: 32,
            lo: -3.0,
            hi: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub unit_dim: usize,
    pub kernel: usize,
    pub channels: Vec<usize>,
    pub duration_learning_rate: f64,
    pub pitch_learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            unit_dim: Architecture::DEFAULT_UNIT_DIM,
            kernel: Architecture::DEFAULT_KERNEL,
            channels: Architecture::DEFAULT_CHANNELS.to_vec(),
            duration_learning_rate: 0.02,
            pitch_learning_rate: 0.5,
            epochs: 30,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub sample_rate: u32,
    pub speaker_dim: usize,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            speaker_dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Hypothesis text, one segment per line; relative to the manifest.
    pub hypotheses: Option<PathBuf>,
    /// Reference text; defaults to manifest transcripts when unset.
    pub references: Option<PathBuf>,
    pub lowercase: bool,
    pub max_n: Option<usize>,
}

impl PipelineConfig {
    /// Parses TOML, applies `section.key=value` overrides, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let text = match path.map(Path::to_path_buf).or(env_path) {
            Some(p) => std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let u = &self.units;
        if u.k == 0 || u.max_iters == 0 {
            return fail("units.k and units.max_iters must be positive".into());
        }
        if !(u.frame_period > 0.0 && u.frame_period.is_finite()) {
            return fail("units.frame_period must be positive".into());
        }
        if u.mfcc == 0 || u.mfcc > 26 {
            return fail("units.mfcc must lie in 1..=26".into());
        }
        self.tracker()
            .validate(self.synth.sample_rate)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.quantizer().map_err(|e| Error::Config(e.to_string()))?;
        for kind in [PredictorKind::Duration, PredictorKind::Pitch] {
            self.architecture(kind)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            self.training(kind)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.synth.speaker_dim == 0 {
            return fail("synth.speaker_dim must be positive".into());
        }
        if self.eval.max_n == Some(0) {
            return fail("eval.max_n must be positive".into());
        }
        Ok(())
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            f_min: self.pitch.f_min,
            f_max: self.pitch.f_max,
            frame_period: self.units.frame_period,
            voicing_threshold: self.pitch.voicing_threshold,
            ..TrackerConfig::default()
        }
    }

    pub fn quantizer(&self) -> Result<PitchQuantizer> {
        PitchQuantizer::new(self.pitch.bins, self.pitch.lo, self.pitch.hi)
    }

    pub fn architecture(&self, kind: PredictorKind) -> Architecture {
        let base = match kind {
            PredictorKind::Duration => Architecture::duration(self.units.k),
            PredictorKind::Pitch => Architecture::pitch(self.units.k, self.pitch.bins),
        };
        Architecture {
            kernel: self.model.kernel,
            ..base
                .with_unit_dim(self.model.unit_dim)
                .with_channels(self.model.channels.clone())
        }
    }

    pub fn training(&self, kind: PredictorKind) -> TrainingConfig {
        TrainingConfig {
            learning_rate: match kind {
                PredictorKind::Duration => self.model.duration_learning_rate,
                PredictorKind::Pitch => self.model.pitch_learning_rate,
            },
            epochs: self.model.epochs,
            batch_size: self.model.batch_size,
            seed: self.model.seed,
            loss: kind,
        }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not section.key=value")))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| Error::Config(format!("override key {key:?} has no section")))?;
    // TOML literal if it parses as one, bare string otherwise.
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(Error::Config(format!("{section} is not a section"))),
    }
}
