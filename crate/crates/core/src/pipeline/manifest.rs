use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One utterance of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub utterance_id: String,
    /// WAV file, or a text feature file (`.txt`/`.feat`: one frame per line).
    pub audio_path: String,
    pub speaker_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion_label: Option<String>,
}

/// Records in file order; relative audio paths resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn audio_path(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.audio_path)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parses JSON lines; blank lines are skipped.
pub fn parse_manifest_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            what: "manifest",
            line: i + 1,
            message,
        };
        let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if rec.utterance_id.is_empty() || rec.audio_path.is_empty() {
            return Err(bad("utterance_id and audio_path must be non-empty".into()));
        }
        if !seen.insert(rec.utterance_id.clone()) {
            return Err(bad(format!("duplicate utterance_id {:?}", rec.utterance_id)));
        }
        records.push(rec);
    }
    Ok(Manifest {
        records,
        base_dir: base_dir.into(),
    })
}

pub fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest_str(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_record() {
        let m = parse_manifest_str(
            r#"{"utterance_id":"a","audio_path":"a.wav","speaker_id":"s1","transcript":"hi"}"#,
            "/data",
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.records[0].transcript.as_deref(), Some("hi"));
        assert_eq!(m.audio_path(&m.records[0]), PathBuf::from("/data/a.wav"));
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = "{\"utterance_id\":\"x\",\"audio_path\":\"1.wav\",\"speaker_id\":\"s\"}\n\n\
                    {\"utterance_id\":\"x\",\"audio_path\":\"2.wav\",\"speaker_id\":\"s\"}\n";
        let err = parse_manifest_str(text, ".").unwrap_err().to_string();
        assert!(err.contains("\"x\"") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn missing_field_names_field_and_line() {
        let text = "{\"utterance_id\":\"a\",\"audio_path\":\"a.wav\",\"speaker_id\":\"s\"}\n\
                    {\"utterance_id\":\"b\",\"speaker_id\":\"s\"}\n";
        let err = parse_manifest_str(text, ".").unwrap_err().to_string();
        assert!(err.contains("audio_path") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_empty_paths_and_garbage() {
        assert!(parse_manifest_str(r#"{"utterance_id":"a","audio_path":"","speaker_id":"s"}"#, ".").is_err());
        assert!(parse_manifest_str("not json", ".").is_err());
    }
}
