//! F0 tables, speaker statistics tables, and 16-bit PCM WAV I/O.

use std::fmt::Write as _;
use std::io::{Read, Seek, Write};

use super::{PitchTrack, SpeakerPitchStats, Waveform};
use crate::error::{Error, Result};

pub const F0_HEADER: &str = "time_s,f0_hz,voiced";
pub const STATS_HEADER: &str = "speaker_id,mean_hz,std_hz,n_voiced";

pub fn write_f0_csv(track: &PitchTrack) -> String {
    let mut out = String::from(F0_HEADER);
    out.push('\n');
    for (i, (&f, &v)) in track.f0_hz().iter().zip(track.voiced()).enumerate() {
        let _ = writeln!(out, "{},{},{}", track.time(i), f, u8::from(v));
    }
    out
}

/// The frame period is recovered from the first timestamp, which sits at half
/// a frame.
pub fn parse_f0_csv(text: &str) -> Result<PitchTrack> {
    let mut lines = text.lines();
    expect_header(lines.next(), F0_HEADER, "f0 table")?;
    let mut first_time = None;
    let mut f0 = Vec::new();
    let mut voiced = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [t, f, v] = fields[..] else {
            return Err(parse_err("f0 table", line_no, "expected 3 fields"));
        };
        let t: f64 = t.trim().parse().map_err(|e| parse_err("f0 table", line_no, e))?;
        first_time.get_or_insert(t);
        f0.push(f.trim().parse::<f64>().map_err(|e| parse_err("f0 table", line_no, e))?);
        voiced.push(match v.trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err("f0 table", line_no, format!("voiced flag {other:?}"))),
        });
    }
    let period = first_time.map_or(0.0, |t| 2.0 * t);
    if f0.is_empty() || period <= 0.0 {
        return Err(Error::Format {
            what: "f0 table",
            message: "no frames".into(),
        });
    }
    PitchTrack::new(f0, voiced, period)
}

pub fn write_speaker_stats_csv<'a>(stats: impl IntoIterator<Item = &'a SpeakerPitchStats>) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for s in stats {
        let _ = writeln!(out, "{},{},{},{}", s.speaker_id, s.mean_hz, s.std_hz, s.n_voiced);
    }
    out
}

pub fn parse_speaker_stats_csv(text: &str) -> Result<Vec<SpeakerPitchStats>> {
    let mut lines = text.lines();
    expect_header(lines.next(), STATS_HEADER, "speaker stats")?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [id, mean, std, n] = fields[..] else {
            return Err(parse_err("speaker stats", line_no, "expected 4 fields"));
        };
        let mean: f64 = mean
            .trim()
            .parse()
            .map_err(|e| parse_err("speaker stats", line_no, e))?;
        let std: f64 = std.trim().parse().map_err(|e| parse_err("speaker stats", line_no, e))?;
        let n: usize = n.trim().parse().map_err(|e| parse_err("speaker stats", line_no, e))?;
        out.push(SpeakerPitchStats::new(id.trim(), mean, std, n).map_err(|e| parse_err("speaker stats", line_no, e))?);
    }
    Ok(out)
}

/// Reads a mono 16-bit PCM WAV file.
pub fn read_wav<R: Read>(reader: R) -> Result<Waveform> {
    let mut wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Format {
            what: "wav",
            message: format!(
                "expected mono 16-bit PCM, got {} channel(s) of {}-bit {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let samples = wav
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    Waveform::new(samples, spec.sample_rate)
}

/// Writes mono 16-bit PCM; samples are clipped to `[-1, 1]`.
pub fn write_wav<W: Write + Seek>(wave: &Waveform, writer: W) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec)?;
    for &s in &wave.samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}

fn expect_header(line: Option<&str>, header: &str, what: &'static str) -> Result<()> {
    match line {
        Some(l) if l.trim() == header => Ok(()),
        other => Err(parse_err(
            what,
            1,
            format!("expected header {header:?}, found {:?}", other.unwrap_or("")),
        )),
    }
}

fn parse_err(what: &'static str, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        what,
        line,
        message: e.to_string(),
    }
}
