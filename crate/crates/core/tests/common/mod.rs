//! Synthetic corpus shared by the pipeline and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use unitprosody::pipeline::{wav_bytes, PipelineConfig};
use unitprosody::pitch_analysis::Waveform;

pub const SR: u32 = 16_000;

/// Voiced glide, a noise burst, then a second glide.
fn utterance(f0: f64, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut phase = 0.0;
    for i in 0..SR as usize {
        let t = i as f64 / SR as f64;
        let v = if (0.3..0.45).contains(&t) {
            rng.random_range(-0.05..0.05)
        } else {
            phase += 2.0 * PI * f0 * (1.0 + 0.2 * t) / SR as f64;
            (1..=4).map(|h| 0.3 / h as f64 * (h as f64 * phase).sin()).sum()
        };
        x.push(v);
    }
    Waveform::new(x, SR).unwrap()
}

pub fn write_corpus(dir: &Path) {
    let rows = [
        ("u1", "s1", 120.0, "the cat sat on the warm mat"),
        ("u2", "s1", 140.0, "we walked home after the rain"),
        ("u3", "s2", 210.0, "a small dog ran across the park"),
        ("u4", "s2", 230.0, "she is reading a long book"),
    ];
    let mut manifest = String::new();
    for (i, (id, spk, f0, text)) in rows.iter().enumerate() {
        std::fs::write(
            dir.join(format!("{id}.wav")),
            wav_bytes(&utterance(*f0, i as u64)).unwrap(),
        )
        .unwrap();
        manifest.push_str(&format!(
            "{{\"utterance_id\":\"{id}\",\"audio_path\":\"{id}.wav\",\"speaker_id\":\"{spk}\",\"transcript\":\"{text}\"}}\n"
        ));
    }
    std::fs::write(dir.join("manifest.jsonl"), manifest).unwrap();
    std::fs::write(
        dir.join("hyp.txt"),
        "the cat sat on the mat\nwe walked home after the rain\na dog ran across the big park\nshe reads a long book\n",
    )
    .unwrap();
}

pub fn small_config() -> PipelineConfig {
    let text =
        "[units]\nk = 8\n[model]\nchannels = [8]\nepochs = 2\nbatch_size = 2\n[eval]\nhypotheses = \"hyp.txt\"\n";
    PipelineConfig::from_toml(text, &[]).unwrap()
}

pub fn digest_tree(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                let hash = Sha256::digest(std::fs::read(&path).unwrap());
                out.insert(rel, hash.iter().map(|b| format!("{b:02x}")).collect::<String>());
            }
        }
    }
    out
}
