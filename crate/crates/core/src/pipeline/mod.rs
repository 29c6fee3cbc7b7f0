//! Corpus manifests, configuration and the staged batch pipeline.
//!
//! Every stage reads the manifest and writes under one output directory:
//!
//! | stage     | reads                         | writes                                      |
//! |-----------|-------------------------------|---------------------------------------------|
//! | `units`   | audio or feature files        | `units/codebook.txt`, `units/<id>.units`, `units/<id>.reduced` |
//! | `prosody` | audio, unit files             | `prosody/f0/<id>.csv`, `prosody/emotion/<id>.emb`, `prosody/speaker_stats.csv`, `prosody/speakers.json`, `prosody/duration.ppm`, `prosody/pitch.ppm` |
//! | `synth`   | reduced units, prosody files  | `synth/<id>.cnd`, `synth/<id>.wav`          |
//! | `eval`    | audio, synthesized audio, text | `eval/features_source.csv`, `eval/features_synth.csv`, `eval/report.txt` |
//!
//! Each stage also writes `summary_<stage>.txt`. Files are written to a
//! temporary name and renamed into place.

mod config;
mod manifest;

pub use config::{EvalSection, ModelSection, PipelineConfig, PitchSection, SynthSection, UnitsSection, CONFIG_ENV};
pub use manifest::{parse_manifest, parse_manifest_str, Manifest, ManifestRecord};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::conditioning::{assemble_conditioning, toy_synthesize, write_conditioning, EmbeddingTable};
use crate::dsp::mfcc_features;
use crate::error::{Error, Result};
use crate::eval::{bleu, expressivity_report, extract_features, write_feature_table, SystemFeatures, TokenizedCorpus};
use crate::pitch_analysis::{
    bins_to_f0, normalize_f0, parse_speaker_stats_csv, read_wav, speaker_stats, track_f0, write_f0_csv,
    write_speaker_stats_csv, write_wav, PitchQuantizer, PitchTrack, SpeakerPitchStats, Waveform,
};
use crate::prosody::{
    predict_durations, predict_pitch, read_checkpoint, read_embeddings, train_predictor, write_checkpoint,
    write_embeddings, EmotionBottleneck, EmotionEmbedding, PredictorKind, PredictorModel, SpeakerTable, Target,
    TrainingExample,
};
use crate::unit_codec::{
    expand, kmeans_fit, parse_reduced_file, parse_unit_file, reduce, write_codebook, write_reduced_file,
    write_unit_file, FrameFeatures, KMeansConfig, ReducedUnitSequence, UnitSequence,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Units,
    Prosody,
    Synth,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Units, Stage::Prosody, Stage::Synth, Stage::Eval];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Units => "units",
            Stage::Prosody => "prosody",
            Stage::Synth => "synth",
            Stage::Eval => "eval",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-utterance outcome of a stage, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub stage: Stage,
    pub outcomes: Vec<(String, Option<String>)>,
}

impl PipelineSummary {
    pub fn ok(&self) -> usize {
        self.outcomes.iter().filter(|o| o.1.is_none()).count()
    }

    pub fn failed(&self) -> usize {
        self.outcomes.len() - self.ok()
    }

    /// 0 when every utterance succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed() > 0)
    }

    /// `"<ok> ok, <failed> failed"`, then one line per utterance.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} ok, {} failed\n", self.ok(), self.failed());
        for (id, err) in &self.outcomes {
            match err {
                None => out.push_str(&format!("{id} ok\n")),
                Some(e) => out.push_str(&format!("{id} failed: {e}\n")),
            }
        }
        out
    }
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file under `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_wav(path: &Path) -> Result<Waveform> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav(std::io::BufReader::new(file))
}

pub fn wav_bytes(wave: &Waveform) -> Result<Vec<u8>> {
    let mut cur = Cursor::new(Vec::new());
    write_wav(wave, &mut cur)?;
    Ok(cur.into_inner())
}

/// Frame features as text: one frame per line, whitespace-separated reals.
pub fn parse_feature_frames(text: &str, frame_period: f64) -> Result<FrameFeatures> {
    let frames = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        what: "feature file",
                        line: i + 1,
                        message: format!("{t:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    FrameFeatures::new(frames, frame_period)
}

/// Frame features for one utterance: a text feature file (`.txt`, `.feat`)
/// is read as is, anything else is decoded as WAV and analysed to MFCCs.
pub fn load_features(path: &Path, cfg: &PipelineConfig) -> Result<FrameFeatures> {
    let fp = cfg.units.frame_period;
    if matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "feat")) {
        parse_feature_frames(&read_text(path)?, fp)
    } else {
        mfcc_features(&load_wav(path)?, fp, cfg.units.mfcc)
    }
}

/// Runs one stage over the manifest.
///
/// Problems with a single utterance are recorded in the summary and the run
/// continues. Problems that make the whole stage meaningless (an invalid
/// configuration, too few frames for the codebook, training divergence) are
/// returned as errors.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    manifest: &Manifest,
    stage: Stage,
    out_dir: &Path,
) -> Result<PipelineSummary> {
    execute(
        cfg,
        manifest,
        stage,
        out_dir,
        &[PredictorKind::Duration, PredictorKind::Pitch],
    )
}

/// The prosody stage, fitting only the `kind` predictor.
pub fn run_training(
    cfg: &PipelineConfig,
    manifest: &Manifest,
    kind: PredictorKind,
    out_dir: &Path,
) -> Result<PipelineSummary> {
    execute(cfg, manifest, Stage::Prosody, out_dir, &[kind])
}

fn execute(
    cfg: &PipelineConfig,
    manifest: &Manifest,
    stage: Stage,
    out_dir: &Path,
    kinds: &[PredictorKind],
) -> Result<PipelineSummary> {
    cfg.validate()?;
    let mut run = Run {
        cfg,
        manifest,
        out: out_dir.to_path_buf(),
        kinds,
        outcomes: manifest
            .records
            .iter()
            .map(|r| (r.utterance_id.clone(), None))
            .collect(),
    };
    match stage {
        Stage::Units => run.units()?,
        Stage::Prosody => run.prosody()?,
        Stage::Synth => run.synth()?,
        Stage::Eval => run.eval()?,
    }
    let summary = PipelineSummary {
        stage,
        outcomes: run.outcomes,
    };
    write_atomic(
        &out_dir.join(format!("summary_{stage}.txt")),
        summary.to_text().as_bytes(),
    )?;
    Ok(summary)
}

/// Predicts durations, expands the units, then predicts and decodes F0.
///
/// Returns the frame-level units and one F0 value per frame in Hz, 0 where
/// the pitch predictor reports no voicing.
pub fn infer_prosody(
    reduced: &ReducedUnitSequence,
    emotion: &EmotionEmbedding,
    duration: &PredictorModel,
    pitch: &PredictorModel,
    quantizer: &PitchQuantizer,
    stats: &SpeakerPitchStats,
    frame_period: f64,
) -> Result<(UnitSequence, Vec<f64>)> {
    let durations = predict_durations(reduced, emotion, duration)?;
    let inflated = expand(&reduced.with_durations(durations)?, frame_period);
    let f0 = predict_pitch(&inflated, emotion, pitch, quantizer)?
        .iter()
        .map(|a| bins_to_f0(a, quantizer, stats))
        .collect::<Result<Vec<f64>>>()?;
    Ok((inflated, f0))
}

fn model_file(kind: PredictorKind) -> String {
    format!("{}.ppm", kind.as_str())
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    manifest: &'a Manifest,
    out: PathBuf,
    kinds: &'a [PredictorKind],
    outcomes: Vec<(String, Option<String>)>,
}

impl Run<'_> {
    fn fail(&mut self, index: usize, err: impl fmt::Display) {
        if self.outcomes[index].1.is_none() {
            self.outcomes[index].1 = Some(err.to_string());
        }
    }

    fn ok(&self, index: usize) -> bool {
        self.outcomes[index].1.is_none()
    }

    fn path(&self, parts: &[&str]) -> PathBuf {
        parts.iter().fold(self.out.clone(), |p, s| p.join(s))
    }

    fn units(&mut self) -> Result<()> {
        let mut feats: Vec<Option<FrameFeatures>> = Vec::new();
        for (i, rec) in self.manifest.records.iter().enumerate() {
            let path = self.manifest.audio_path(rec);
            match load_features(&path, self.cfg) {
                Ok(f) => feats.push(Some(f)),
                Err(e) => {
                    self.fail(i, e);
                    feats.push(None);
                }
            }
        }
        let usable: Vec<FrameFeatures> = feats.iter().flatten().cloned().collect();
        if usable.is_empty() {
            return Ok(());
        }
        let km = KMeansConfig {
            k: self.cfg.units.k,
            max_iters: self.cfg.units.max_iters,
            seed: self.cfg.units.seed,
        };
        let fit = kmeans_fit(&usable, &km)?;
        write_atomic(
            &self.path(&["units", "codebook.txt"]),
            write_codebook(&fit.codebook).as_bytes(),
        )?;
        for (i, f) in feats.iter().enumerate() {
            let Some(f) = f else { continue };
            let id = &self.manifest.records[i].utterance_id;
            let result = fit.codebook.quantize(f).and_then(|seq| {
                write_atomic(
                    &self.path(&["units", &format!("{id}.units")]),
                    write_unit_file([&seq]).as_bytes(),
                )?;
                let red = reduce(&seq);
                write_atomic(
                    &self.path(&["units", &format!("{id}.reduced")]),
                    write_reduced_file([&red]).as_bytes(),
                )
            });
            if let Err(e) = result {
                self.fail(i, e);
            }
        }
        Ok(())
    }

    fn read_units(&self, id: &str) -> Result<(UnitSequence, ReducedUnitSequence)> {
        let fp = self.cfg.units.frame_period;
        let units = parse_unit_file(&read_text(&self.path(&["units", &format!("{id}.units")]))?, fp)?;
        let reduced = parse_reduced_file(&read_text(&self.path(&["units", &format!("{id}.reduced")]))?)?;
        match (units.into_iter().next(), reduced.into_iter().next()) {
            (Some(u), Some(r)) => Ok((u, r)),
            _ => Err(Error::InsufficientData(format!("empty unit files for {id}"))),
        }
    }

    fn prosody(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let fp = cfg.units.frame_period;
        let bottleneck = EmotionBottleneck::random(cfg.units.mfcc, cfg.model.seed)?;
        let mut items: Vec<Option<(UnitSequence, ReducedUnitSequence, PitchTrack, EmotionEmbedding)>> =
            vec![None; self.manifest.len()];
        for (i, slot) in items.iter_mut().enumerate() {
            let rec = &self.manifest.records[i];
            let id = rec.utterance_id.clone();
            let result = (|| {
                let (units, reduced) = self.read_units(&id)?;
                let wave = load_wav(&self.manifest.audio_path(rec))?;
                let track = track_f0(&wave, &cfg.tracker())?;
                write_atomic(
                    &self.path(&["prosody", "f0", &format!("{id}.csv")]),
                    write_f0_csv(&track).as_bytes(),
                )?;
                let emotion = bottleneck
                    .encode(&mfcc_features(&wave, fp, cfg.units.mfcc)?)?
                    .to_f32_precision();
                write_atomic(
                    &self.path(&["prosody", "emotion", &format!("{id}.emb")]),
                    &write_embeddings(&[emotion.values()])?,
                )?;
                Ok::<_, Error>((units, reduced, track, emotion))
            })();
            match result {
                Ok(item) => *slot = Some(item),
                Err(e) => self.fail(i, e),
            }
        }

        // Speaker statistics over the utterances that made it this far.
        let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, rec) in self.manifest.records.iter().enumerate() {
            if items[i].is_some() {
                by_speaker.entry(rec.speaker_id.as_str()).or_default().push(i);
            }
        }
        let mut stats: BTreeMap<String, SpeakerPitchStats> = BTreeMap::new();
        for (spk, idx) in &by_speaker {
            let tracks: Vec<&PitchTrack> = idx.iter().map(|&i| &items[i].as_ref().expect("present").2).collect();
            match speaker_stats(tracks, spk) {
                Ok(s) => {
                    stats.insert(spk.to_string(), s);
                }
                Err(e) => {
                    let msg = e.to_string();
                    for &i in idx {
                        self.fail(i, &msg);
                    }
                }
            }
        }
        write_atomic(
            &self.path(&["prosody", "speaker_stats.csv"]),
            write_speaker_stats_csv(stats.values()).as_bytes(),
        )?;
        let table = SpeakerTable::random(
            self.manifest.records.iter().map(|r| r.speaker_id.as_str()),
            cfg.synth.speaker_dim,
            cfg.synth.seed,
        )?;
        write_atomic(&self.path(&["prosody", "speakers.json"]), table.to_json().as_bytes())?;

        let quantizer = cfg.quantizer()?;
        let mut dur_data = Vec::new();
        let mut pitch_data = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let Some((units, reduced, track, emotion)) = item else {
                continue;
            };
            if !self.ok(i) {
                continue;
            }
            let st = &stats[&self.manifest.records[i].speaker_id];
            dur_data.push(TrainingExample {
                units: reduced.units().to_vec(),
                emotion: emotion.clone(),
                target: Target::Durations(reduced.durations().iter().map(|&d| d as f64).collect()),
            });
            let t = units.len().min(track.len());
            let rows = normalize_f0(track, st)
                .into_iter()
                .take(t)
                .map(|z| z.map_or_else(|| vec![0.0; quantizer.bins()], |v| quantizer.one_hot(v)))
                .collect();
            pitch_data.push(TrainingExample {
                units: units.units[..t].to_vec(),
                emotion: emotion.clone(),
                target: Target::PitchBins(rows),
            });
        }
        if dur_data.is_empty() {
            return Ok(());
        }
        for (kind, data) in [
            (PredictorKind::Duration, &dur_data),
            (PredictorKind::Pitch, &pitch_data),
        ] {
            if !self.kinds.contains(&kind) {
                continue;
            }
            let mut model = PredictorModel::new(cfg.architecture(kind), cfg.model.seed)?;
            train_predictor(&mut model, data, &cfg.training(kind))?;
            write_atomic(&self.path(&["prosody", &model_file(kind)]), &write_checkpoint(&model))?;
        }
        Ok(())
    }

    fn synth(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let load_model =
            |kind| read_bytes(&self.path(&["prosody", &model_file(kind)])).and_then(|b| read_checkpoint(&b));
        let duration = load_model(PredictorKind::Duration)?;
        let pitch = load_model(PredictorKind::Pitch)?;
        let stats: BTreeMap<String, SpeakerPitchStats> =
            parse_speaker_stats_csv(&read_text(&self.path(&["prosody", "speaker_stats.csv"]))?)?
                .into_iter()
                .map(|s| (s.speaker_id.clone(), s))
                .collect();
        let speakers = SpeakerTable::from_json(&read_text(&self.path(&["prosody", "speakers.json"]))?)?;
        let quantizer = cfg.quantizer()?;
        let vocoder_units = EmbeddingTable::random(cfg.units.k, cfg.model.unit_dim, cfg.synth.seed)?;
        let fp = cfg.units.frame_period;

        for i in 0..self.manifest.len() {
            let rec = &self.manifest.records[i];
            let id = &rec.utterance_id;
            let result = (|| {
                let (_, reduced) = self.read_units(id)?;
                let emb = read_embeddings(&read_bytes(&self.path(&["prosody", "emotion", &format!("{id}.emb")]))?)?;
                let emotion = EmotionEmbedding::new(emb.into_iter().next().unwrap_or_default())?;
                let st = stats
                    .get(&rec.speaker_id)
                    .ok_or_else(|| Error::UnknownSpeaker(rec.speaker_id.clone()))?;
                let (inflated, f0) = infer_prosody(&reduced, &emotion, &duration, &pitch, &quantizer, st, fp)?;
                let m = assemble_conditioning(
                    &inflated,
                    &vocoder_units,
                    &f0,
                    &emotion,
                    speakers.lookup(&rec.speaker_id)?,
                )?;
                write_atomic(&self.path(&["synth", &format!("{id}.cnd")]), &write_conditioning(&m))?;
                let wave = toy_synthesize(&m, cfg.synth.sample_rate)?;
                write_atomic(&self.path(&["synth", &format!("{id}.wav")]), &wav_bytes(&wave)?)
            })();
            if let Err(e) = result {
                self.fail(i, e);
            }
        }
        Ok(())
    }

    fn eval(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let mut report = String::new();
        if let Some(hyp_path) = &cfg.eval.hypotheses {
            let hyp_text = read_text(&self.manifest.base_dir.join(hyp_path))?;
            let hyps: Vec<&str> = hyp_text.lines().collect();
            let ref_text;
            let refs: Vec<&str> = match &cfg.eval.references {
                Some(p) => {
                    ref_text = read_text(&self.manifest.base_dir.join(p))?;
                    ref_text.lines().collect()
                }
                None => self
                    .manifest
                    .records
                    .iter()
                    .map(|r| {
                        r.transcript
                            .as_deref()
                            .ok_or_else(|| Error::Config(format!("no transcript for {}", r.utterance_id)))
                    })
                    .collect::<Result<_>>()?,
            };
            let corpus = TokenizedCorpus::from_lines(hyps, refs, cfg.eval.lowercase)?;
            let score = bleu(&corpus, cfg.eval.max_n.unwrap_or(4))?;
            report.push_str(&format!("BLEU = {:.2}\n", score.score));
            report.push_str(&format!(
                "BLEU detail: bp={:.6} hyp_len={} ref_len={} precisions={}\n",
                score.brevity_penalty,
                score.hyp_len,
                score.ref_len,
                (1..=score.totals.len())
                    .map(|n| format!("{:.6}", score.precision(n)))
                    .collect::<Vec<_>>()
                    .join("/")
            ));
        } else {
            report.push_str("BLEU = n/a (no hypotheses configured)\n");
        }

        let tracker = cfg.tracker();
        let features_of = |path: &Path| -> Result<crate::eval::FeatureVector> {
            let wave = load_wav(path)?;
            extract_features(&wave, &track_f0(&wave, &tracker)?)
        };
        let mut source = Vec::new();
        let mut synth = Vec::new();
        for i in 0..self.manifest.len() {
            let rec = &self.manifest.records[i];
            match features_of(&self.manifest.audio_path(rec)) {
                Ok(f) => source.push((rec.utterance_id.clone(), f)),
                Err(e) => {
                    self.fail(i, e);
                    continue;
                }
            }
            let synth_path = self.path(&["synth", &format!("{}.wav", rec.utterance_id)]);
            if synth_path.exists() {
                match features_of(&synth_path) {
                    Ok(f) => synth.push((rec.utterance_id.clone(), f)),
                    Err(e) => self.fail(i, e),
                }
            }
        }
        let table = |rows: &[(String, crate::eval::FeatureVector)]| {
            write_feature_table(rows.iter().map(|(id, v)| (id.as_str(), v)))
        };
        write_atomic(&self.path(&["eval", "features_source.csv"]), table(&source).as_bytes())?;
        write_atomic(&self.path(&["eval", "features_synth.csv"]), table(&synth).as_bytes())?;
        if !synth.is_empty() && source.len() + synth.len() >= 2 {
            let sys = SystemFeatures {
                name: "synth".into(),
                rows: synth,
            };
            report.push_str(&expressivity_report(&source, &[sys], None)?);
        }
        write_atomic(&self.path(&["eval", "report.txt"]), report.as_bytes())
    }
}
