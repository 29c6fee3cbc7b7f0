//! `unitprosody` command-line tool.
//!
//! Every failure prints `error[<code>]: <message>` on stderr and exits with
//! 1 (partial failure or bad input), 2 (configuration) or 3 (I/O).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unitprosody::conditioning::{
    assemble_conditioning, interpolate_f0, read_conditioning, toy_synthesize, write_conditioning, EmbeddingTable,
};
use unitprosody::eval::{
    bleu, expressivity_report, extract_features, forward_slda, parse_feature_table, parse_labelled_table,
    write_feature_table, FeatureVector, SystemFeatures, TokenizedCorpus,
};
use unitprosody::pipeline::{
    infer_prosody, load_features, load_wav, parse_manifest, run_pipeline, run_training, wav_bytes, write_atomic,
    PipelineConfig, Stage,
};
use unitprosody::pitch_analysis::{
    normalize_f0, parse_f0_csv, parse_speaker_stats_csv, speaker_stats, track_f0, write_f0_csv,
    write_speaker_stats_csv, PitchTrack, SpeakerPitchStats,
};
use unitprosody::prosody::{read_checkpoint, read_embeddings, EmotionEmbedding, PredictorKind, SpeakerTable};
use unitprosody::unit_codec::{
    expand, kmeans_fit, parse_codebook, parse_reduced_file, parse_unit_file, reduce, write_codebook,
    write_reduced_file, write_unit_file, KMeansConfig,
};
use unitprosody::{Error, Result};

#[derive(Parser)]
#[command(name = "unitprosody", version, about = "Prosody-aware unit-to-speech toolkit")]
struct Cli {
    /// Configuration file (TOML); defaults to $PROSODY_UNITS_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `--set units.k=100`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete unit codebook and run-length coding.
    #[command(subcommand)]
    Units(UnitsCmd),
    /// F0 tracking, speaker statistics and bin quantization.
    #[command(subcommand)]
    Pitch(PitchCmd),
    /// Fit one predictor over a manifest (after `run --stage units`).
    Train {
        #[arg(value_parser = parse_kind)]
        kind: PredictorKind,
        #[command(flatten)]
        corpus: Corpus,
    },
    /// Predict durations and F0 for one reduced unit sequence.
    Infer(InferArgs),
    /// Build a conditioning matrix from units, F0, emotion and speaker.
    Assemble(AssembleArgs),
    /// Render a conditioning matrix to WAV with the harmonic-plus-noise synthesizer.
    Synth {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Translation and expressivity metrics.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run pipeline stages over a manifest.
    Run {
        #[command(flatten)]
        corpus: Corpus,
        /// Stages to run, in order; all four when omitted.
        #[arg(long = "stage", value_parser = parse_stage)]
        stages: Vec<Stage>,
    },
}

#[derive(Args)]
struct Corpus {
    /// JSON-lines manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Working directory for stage artifacts.
    #[arg(long)]
    work: PathBuf,
}

#[derive(Subcommand)]
enum UnitsCmd {
    /// Fit a k-means codebook on feature files or WAVs.
    Fit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Map each frame of each input to its nearest centroid.
    Quantize {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Collapse repeated units into (unit, duration) pairs.
    Reduce {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Inverse of `reduce`.
    Expand {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PitchCmd {
    /// Track F0 in a WAV file.
    Track {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Mean and deviation of voiced F0 over one speaker's tracks.
    Stats {
        #[arg(long)]
        speaker: String,
        #[arg(required = true)]
        tracks: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Bin index per frame of a normalized track (`-` when unvoiced).
    Quantize {
        input: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        speaker: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InferArgs {
    /// Reduced unit file; the first sequence is used.
    #[arg(long)]
    reduced: PathBuf,
    /// Emotion embedding file; the first vector is used.
    #[arg(long)]
    emotion: PathBuf,
    #[arg(long)]
    duration_model: PathBuf,
    #[arg(long)]
    pitch_model: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    #[arg(long)]
    speaker: String,
    /// Frame-level units output.
    #[arg(long)]
    out_units: PathBuf,
    /// Predicted F0 track output.
    #[arg(long)]
    out_f0: PathBuf,
}

#[derive(Args)]
struct AssembleArgs {
    #[arg(long)]
    units: PathBuf,
    /// F0 track; resampled to the unit frame rate.
    #[arg(long)]
    f0: PathBuf,
    #[arg(long)]
    emotion: PathBuf,
    /// Speaker table (JSON).
    #[arg(long)]
    speakers: PathBuf,
    #[arg(long)]
    speaker: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Corpus BLEU of hypothesis lines against reference lines.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        lowercase: bool,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
    },
    /// Six acoustic features per WAV, keyed by file stem.
    Features {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Forward stepwise discriminant feature selection.
    Slda {
        /// CSV with header `utterance_id,label,<features>`.
        table: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Distance-to-reference statistics across systems.
    Report {
        #[arg(long = "ref")]
        reference: PathBuf,
        /// `NAME=features.csv`, repeatable.
        #[arg(long = "system", required = true, value_parser = parse_system)]
        systems: Vec<(String, PathBuf)>,
        /// CSV of `system,utterance_id,score` listener ratings.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<PredictorKind, String> {
    match s {
        "duration" => Ok(PredictorKind::Duration),
        "pitch" => Ok(PredictorKind::Pitch),
        _ => Err(format!("expected duration or pitch, got {s:?}")),
    }
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_system(s: &str) -> std::result::Result<(String, PathBuf), String> {
    s.split_once('=')
        .map(|(n, p)| (n.to_string(), PathBuf::from(p)))
        .ok_or_else(|| format!("expected NAME=PATH, got {s:?}"))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_err(path, e))
}

/// Writes to `out` atomically, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn first_emotion(path: &Path) -> Result<EmotionEmbedding> {
    let vectors = read_embeddings(&read_bytes(path)?)?;
    EmotionEmbedding::new(vectors.into_iter().next().unwrap_or_default())
}

fn speaker_stats_for(path: &Path, speaker: &str) -> Result<SpeakerPitchStats> {
    parse_speaker_stats_csv(&read_text(path)?)?
        .into_iter()
        .find(|s| s.speaker_id == speaker)
        .ok_or_else(|| Error::UnknownSpeaker(speaker.to_string()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    PipelineConfig::load(cli.config.as_deref(), &cli.overrides)
}

/// Runs the command; the returned code is 0 or 1 for partial failures.
fn run(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    let fp = cfg.units.frame_period;
    match &cli.command {
        Command::Units(cmd) => match cmd {
            UnitsCmd::Fit { inputs, out } => {
                let feats = inputs
                    .iter()
                    .map(|p| load_features(p, &cfg))
                    .collect::<Result<Vec<_>>>()?;
                let km = KMeansConfig {
                    k: cfg.units.k,
                    max_iters: cfg.units.max_iters,
                    seed: cfg.units.seed,
                };
                let fit = kmeans_fit(&feats, &km)?;
                emit(out.as_deref(), write_codebook(&fit.codebook).as_bytes())?;
                eprintln!(
                    "k={} iterations={} inertia={:.6}",
                    fit.codebook.k(),
                    fit.iterations,
                    fit.inertia()
                );
            }
            UnitsCmd::Quantize { codebook, inputs, out } => {
                let book = parse_codebook(&read_text(codebook)?)?;
                let seqs = inputs
                    .iter()
                    .map(|p| book.quantize(&load_features(p, &cfg)?))
                    .collect::<Result<Vec<_>>>()?;
                emit(out.as_deref(), write_unit_file(&seqs).as_bytes())?;
            }
            UnitsCmd::Reduce { input, out } => {
                let seqs = parse_unit_file(&read_text(input)?, fp)?;
                let reduced: Vec<_> = seqs.iter().map(reduce).collect();
                emit(out.as_deref(), write_reduced_file(&reduced).as_bytes())?;
            }
            UnitsCmd::Expand { input, out } => {
                let reduced = parse_reduced_file(&read_text(input)?)?;
                let seqs: Vec<_> = reduced.iter().map(|r| expand(r, fp)).collect();
                emit(out.as_deref(), write_unit_file(&seqs).as_bytes())?;
            }
        },
        Command::Pitch(cmd) => match cmd {
            PitchCmd::Track { input, out } => {
                let track = track_f0(&load_wav(input)?, &cfg.tracker())?;
                emit(out.as_deref(), write_f0_csv(&track).as_bytes())?;
            }
            PitchCmd::Stats { speaker, tracks, out } => {
                let tracks = tracks
                    .iter()
                    .map(|p| parse_f0_csv(&read_text(p)?))
                    .collect::<Result<Vec<_>>>()?;
                let stats = speaker_stats(&tracks, speaker)?;
                emit(out.as_deref(), write_speaker_stats_csv([&stats]).as_bytes())?;
            }
            PitchCmd::Quantize {
                input,
                stats,
                speaker,
                out,
            } => {
                let track = parse_f0_csv(&read_text(input)?)?;
                let st = speaker_stats_for(stats, speaker)?;
                let q = cfg.quantizer()?;
                let mut text = String::from("frame,bin\n");
                for (i, z) in normalize_f0(&track, &st).into_iter().enumerate() {
                    match z {
                        Some(z) => text.push_str(&format!("{i},{}\n", q.bin_index(z))),
                        None => text.push_str(&format!("{i},-\n")),
                    }
                }
                emit(out.as_deref(), text.as_bytes())?;
            }
        },
        Command::Train { kind, corpus } => {
            let manifest = parse_manifest(&corpus.manifest)?;
            let summary = run_training(&cfg, &manifest, *kind, &corpus.work)?;
            eprint!("{}", summary.to_text());
            return Ok(summary.exit_code() as u8);
        }
        Command::Infer(a) => {
            let reduced = parse_reduced_file(&read_text(&a.reduced)?)?
                .into_iter()
                .next()
                .ok_or_else(|| Error::InsufficientData("empty reduced unit file".into()))?;
            let duration = read_checkpoint(&read_bytes(&a.duration_model)?)?;
            let pitch = read_checkpoint(&read_bytes(&a.pitch_model)?)?;
            let st = speaker_stats_for(&a.stats, &a.speaker)?;
            let emotion = first_emotion(&a.emotion)?;
            let (units, f0) = infer_prosody(&reduced, &emotion, &duration, &pitch, &cfg.quantizer()?, &st, fp)?;
            write_atomic(&a.out_units, write_unit_file([&units]).as_bytes())?;
            write_atomic(&a.out_f0, write_f0_csv(&PitchTrack::from_f0(f0, fp)?).as_bytes())?;
        }
        Command::Assemble(a) => {
            let units = parse_unit_file(&read_text(&a.units)?, fp)?
                .into_iter()
                .next()
                .ok_or_else(|| Error::InsufficientData("empty unit file".into()))?;
            let f0 = interpolate_f0(&parse_f0_csv(&read_text(&a.f0)?)?, 1.0 / fp)?;
            let speakers = SpeakerTable::from_json(&read_text(&a.speakers)?)?;
            let table = EmbeddingTable::random(cfg.units.k, cfg.model.unit_dim, cfg.synth.seed)?;
            let m = assemble_conditioning(
                &units,
                &table,
                &f0,
                &first_emotion(&a.emotion)?,
                speakers.lookup(&a.speaker)?,
            )?;
            write_atomic(&a.out, &write_conditioning(&m))?;
        }
        Command::Synth { input, out } => {
            let m = read_conditioning(&read_bytes(input)?)?;
            write_atomic(out, &wav_bytes(&toy_synthesize(&m, cfg.synth.sample_rate)?)?)?;
        }
        Command::Eval(cmd) => return eval(cmd, &cfg),
        Command::Run { corpus, stages } => {
            let manifest = parse_manifest(&corpus.manifest)?;
            let stages = if stages.is_empty() {
                Stage::ALL.to_vec()
            } else {
                stages.clone()
            };
            let mut code = 0;
            for stage in stages {
                let summary = run_pipeline(&cfg, &manifest, stage, &corpus.work)?;
                eprint!("{stage}: {}", summary.to_text());
                code = code.max(summary.exit_code() as u8);
            }
            return Ok(code);
        }
    }
    Ok(0)
}

fn eval(cmd: &EvalCmd, cfg: &PipelineConfig) -> Result<u8> {
    match cmd {
        EvalCmd::Bleu {
            hyp,
            reference,
            lowercase,
            max_n,
        } => {
            let (h, r) = (read_text(hyp)?, read_text(reference)?);
            let corpus = TokenizedCorpus::from_lines(h.lines(), r.lines(), *lowercase)?;
            let score = bleu(&corpus, *max_n)?;
            println!("BLEU = {:.2}", score.score);
        }
        EvalCmd::Features { inputs, out } => {
            let rows = inputs
                .iter()
                .map(|p| {
                    let wave = load_wav(p)?;
                    Ok((stem(p), extract_features(&wave, &track_f0(&wave, &cfg.tracker())?)?))
                })
                .collect::<Result<Vec<(String, FeatureVector)>>>()?;
            let text = write_feature_table(rows.iter().map(|(id, v)| (id.as_str(), v)));
            emit(out.as_deref(), text.as_bytes())?;
        }
        EvalCmd::Slda { table, alpha } => {
            let t = parse_labelled_table(&read_text(table)?)?;
            let mut codes = BTreeMap::new();
            let labels: Vec<u32> = t
                .labels
                .iter()
                .map(|l| {
                    let next = codes.len() as u32;
                    *codes.entry(l.clone()).or_insert(next)
                })
                .collect();
            let result = forward_slda(&t.rows, &labels, *alpha)?;
            for s in &result.steps {
                println!(
                    "enter {} lambda={:.6} F={:.6} df=({}, {}) p={:.6e}",
                    t.feature_names[s.feature], s.wilks_lambda, s.f_stat, s.df.0, s.df.1, s.p_value
                );
            }
            match &result.rejected {
                Some(s) => println!(
                    "stop: best remaining {} F={:.6} p={:.6e}",
                    t.feature_names[s.feature], s.f_stat, s.p_value
                ),
                None => println!("stop: no features left"),
            }
        }
        EvalCmd::Report {
            reference,
            systems,
            scores,
        } => {
            let reference = parse_feature_table(&read_text(reference)?)?;
            let systems = systems
                .iter()
                .map(|(name, p)| {
                    Ok(SystemFeatures {
                        name: name.clone(),
                        rows: parse_feature_table(&read_text(p)?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let scores = scores.as_deref().map(|p| parse_scores(&read_text(p)?)).transpose()?;
            print!("{}", expressivity_report(&reference, &systems, scores.as_deref())?);
        }
    }
    Ok(0)
}

/// `system,utterance_id,score` lines; a header line is allowed.
fn parse_scores(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("system,")) {
            continue;
        }
        let bad = |message: String| Error::Parse {
            what: "score table",
            line: i + 1,
            message,
        };
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let [sys, id, score] = parts[..] else {
            return Err(bad(format!("expected 3 fields, found {}", parts.len())));
        };
        let score = score.parse().map_err(|e| bad(format!("{score:?}: {e}")))?;
        out.push((sys.to_string(), id.to_string(), score));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let msg = msg.trim_start_matches("error: ").trim_end();
            eprintln!("error[usage]: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
