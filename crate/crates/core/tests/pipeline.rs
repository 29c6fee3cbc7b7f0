mod common;

use std::path::Path;

use common::{digest_tree, small_config, write_corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitprosody::pipeline::{parse_manifest, run_pipeline, PipelineConfig, Stage};

fn run_all(corpus: &Path, out: &Path) {
    let cfg = small_config();
    let manifest = parse_manifest(&corpus.join("manifest.jsonl")).unwrap();
    for stage in Stage::ALL {
        let summary = run_pipeline(&cfg, &manifest, stage, out).unwrap();
        assert_eq!(summary.failed(), 0, "{stage}: {}", summary.to_text());
    }
}

#[test]
fn feature_files_quantize_in_one_batch() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for id in ["a", "b", "c"] {
        let frames: String = (0..40)
            .map(|_| {
                format!(
                    "{} {} {}\n",
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>()
                )
            })
            .collect();
        std::fs::write(dir.path().join(format!("{id}.txt")), frames).unwrap();
        manifest.push_str(&format!(
            "{{\"utterance_id\":\"{id}\",\"audio_path\":\"{id}.txt\",\"speaker_id\":\"s\"}}\n"
        ));
    }
    let path = dir.path().join("m.jsonl");
    std::fs::write(&path, &manifest).unwrap();
    let out = dir.path().join("out");
    let cfg = PipelineConfig::from_toml("[units]\nk = 5\n", &[]).unwrap();

    let summary = run_pipeline(&cfg, &parse_manifest(&path).unwrap(), Stage::Units, &out).unwrap();
    let text = std::fs::read_to_string(out.join("summary_units.txt")).unwrap();
    assert!(text.starts_with("3 ok, 0 failed"), "{text}");
    assert_eq!(summary.exit_code(), 0);
    for id in ["a", "b", "c"] {
        let units = std::fs::read_to_string(out.join("units").join(format!("{id}.units"))).unwrap();
        assert_eq!(units.split_whitespace().count(), 40);
    }

    // One missing input is recorded, the rest still run.
    std::fs::remove_file(dir.path().join("b.txt")).unwrap();
    let summary = run_pipeline(&cfg, &parse_manifest(&path).unwrap(), Stage::Units, &out).unwrap();
    let text = summary.to_text();
    assert!(text.starts_with("2 ok, 1 failed"), "{text}");
    assert!(text.contains("b failed:"), "{text}");
    assert_ne!(summary.exit_code(), 0);
}

#[test]
fn full_run_is_deterministic_and_reports_bleu() {
    let corpus = tempfile::tempdir().unwrap();
    write_corpus(corpus.path());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(corpus.path(), a.path());
    run_all(corpus.path(), b.path());

    let (da, db) = (digest_tree(a.path()), digest_tree(b.path()));
    assert_eq!(da, db);
    for f in ["synth/u1.wav", "synth/u4.cnd", "prosody/pitch.ppm", "eval/report.txt"] {
        assert!(da.contains_key(f), "missing {f}");
    }

    let report = std::fs::read_to_string(a.path().join("eval/report.txt")).unwrap();
    let line = report.lines().find(|l| l.starts_with("BLEU = ")).unwrap();
    let score: f64 = line["BLEU = ".len()..].parse().unwrap();
    assert!(score > 0.0 && score < 100.0, "{line}");
    assert!(report.contains("system synth n=4"), "{report}");
}

#[test]
fn config_violation_aborts_the_stage() {
    let corpus = tempfile::tempdir().unwrap();
    write_corpus(corpus.path());
    let mut cfg = small_config();
    cfg.units.k = 0;
    let manifest = parse_manifest(&corpus.path().join("manifest.jsonl")).unwrap();
    let err = run_pipeline(&cfg, &manifest, Stage::Units, corpus.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
