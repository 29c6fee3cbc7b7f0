use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use unitprosody::eval::{anova_oneway, bleu, extract_features, forward_slda, pearson, TokenizedCorpus};
use unitprosody::pitch_analysis::{track_f0, PitchTrack, TrackerConfig, Waveform};

const SR: u32 = 16_000;

fn sine(f: f64, secs: f64, amp: f64) -> Waveform {
    let n = (secs * SR as f64) as usize;
    Waveform::new(
        (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / SR as f64).sin())
            .collect(),
        SR,
    )
    .unwrap()
}

#[test]
fn pure_sine_has_a_large_h1_h2() {
    let w = sine(200.0, 1.0, 0.5);
    let track = track_f0(&w, &TrackerConfig::default()).unwrap();
    let f = extract_features(&w, &track).unwrap();
    assert!(f.0[4] >= 20.0, "H1-H2 {}", f.0[4]);
    assert!(f.0.iter().all(|v| v.is_finite()));
}

#[test]
fn silence_gives_zeros() {
    let w = Waveform::new(vec![0.0; SR as usize], SR).unwrap();
    let track = track_f0(&w, &TrackerConfig::default()).unwrap();
    assert_eq!(extract_features(&w, &track).unwrap().0, [0.0; 6]);
}

#[test]
fn misaligned_track_is_rejected() {
    let w = sine(200.0, 1.0, 0.5);
    let short = PitchTrack::from_f0(vec![200.0; 20], 0.02).unwrap();
    assert!(extract_features(&w, &short).is_err());
}

#[test]
fn features_of_a_mixed_signal_are_finite() {
    // Vibrato tone, a noise burst, then a glide.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut phase = 0.0;
    let mut s = Vec::new();
    for i in 0..(1.5 * SR as f64) as usize {
        let t = i as f64 / SR as f64;
        let f0 = if t < 0.6 {
            180.0 + 15.0 * (2.0 * PI * 5.0 * t).sin()
        } else {
            120.0 + 100.0 * (t - 0.9)
        };
        phase += 2.0 * PI * f0 / SR as f64;
        let v = if (0.6..0.9).contains(&t) {
            0.05 * rng.random_range(-1.0..1.0)
        } else {
            0.4 * phase.sin() + 0.2 * (2.0 * phase).sin() + 0.1 * (3.0 * phase).sin()
        };
        s.push(v);
    }
    let w = Waveform::new(s, SR).unwrap();
    let track = track_f0(&w, &TrackerConfig::default()).unwrap();
    let f = extract_features(&w, &track).unwrap();
    assert!(f.0.iter().all(|v| v.is_finite()), "{f:?}");
    // Noise frames feed the unvoiced slope; the vibrato feeds the rising
    // slopes; the 0-500 Hz band climbs from below f0 up to the harmonics.
    assert!(f.0[0] != 0.0 && f.0[2] > 0.0 && f.0[1] > 0.0, "{f:?}");
    assert!(f.0[3] > 0.0 && f.0[4] > 0.0, "{f:?}");
}

#[test]
fn anova_under_the_null_rarely_rejects() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut keep = 0;
    for _ in 0..1000 {
        let groups: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..30).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        if anova_oneway(&groups).unwrap().p > 0.001 {
            keep += 1;
        }
    }
    assert!(keep >= 990, "{keep}");
}

#[test]
fn slda_selects_informative_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for i in 0..300 {
        let c = (i % 3) as u32;
        let mut row: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
        row[0] += 5.0 * c as f64;
        row[1] += 5.0 * [0.0, 1.0, 0.0][c as usize];
        x.push(row);
        labels.push(c);
    }
    let r = forward_slda(&x, &labels, 0.01).unwrap();
    let sel = r.selected();
    assert_eq!(sel.len(), 2, "{r:?}");
    assert!(sel.contains(&0) && sel.contains(&1));
    assert!(r.steps.windows(2).all(|w| w[1].wilks_lambda <= w[0].wilks_lambda));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pearson_ignores_positive_affine_maps(
        xs in prop::collection::vec(-100.0f64..100.0, 3..40),
        a in 0.01f64..50.0,
        b in -1e3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|x| x + rng.random_range(-30.0..30.0)).collect();
        prop_assume!(xs.iter().any(|v| (v - xs[0]).abs() > 1e-3));
        let base = pearson(&xs, &ys).unwrap().rho;
        let moved: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        prop_assert!((pearson(&xs, &moved).unwrap().rho - base).abs() < 1e-12);
    }

    #[test]
    fn bleu_ignores_segment_order(
        pairs in prop::collection::vec(("[a-d]( [a-d]){0,6}", "[a-d]( [a-d]){0,6}"), 1..12),
        seed in any::<u64>(),
    ) {
        let hyp: Vec<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
        let refs: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
        let base = bleu(&TokenizedCorpus::from_lines(hyp.clone(), refs.clone(), false).unwrap(), 4).unwrap();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let corpus = TokenizedCorpus::from_lines(order.iter().map(|&i| hyp[i]), order.iter().map(|&i| refs[i]), false).unwrap();
        let shuffled = bleu(&corpus, 4).unwrap();
        prop_assert_eq!(shuffled.matches, base.matches);
        prop_assert_eq!(shuffled.score.to_bits(), base.score.to_bits());
    }
}

#[test]
fn bleu_lowercase_flag() {
    let c = TokenizedCorpus::from_lines(["The Cat sat ."], ["the cat sat ."], true).unwrap();
    assert!((bleu(&c, 4).unwrap().score - 100.0).abs() < 1e-12);
    let c = TokenizedCorpus::from_lines(["The Cat sat ."], ["the cat sat ."], false).unwrap();
    assert!(bleu(&c, 4).unwrap().score < 100.0);
}
