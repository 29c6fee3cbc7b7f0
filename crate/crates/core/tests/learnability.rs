use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use unitprosody::pitch_analysis::PitchQuantizer;
use unitprosody::prosody::{
    predict_pitch, train_predictor, Architecture, EmotionEmbedding, PredictorKind, PredictorModel, Target,
    TrainingConfig, TrainingExample, EMOTION_DIM,
};
use unitprosody::unit_codec::UnitSequence;

const K: u32 = 64;
const D: usize = 32;

/// Target bin = unit id mod d, under a random emotion vector per sequence.
fn pitch_rule_data(n: usize, rng: &mut ChaCha8Rng) -> Vec<TrainingExample> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(20..40);
            let units: Vec<u32> = (0..len).map(|_| rng.random_range(0..K)).collect();
            let emotion = (0..EMOTION_DIM).map(|_| StandardNormal.sample(rng)).collect();
            let rows = units
                .iter()
                .map(|u| {
                    let mut r = vec![0.0; D];
                    r[*u as usize % D] = 1.0;
                    r
                })
                .collect();
            TrainingExample {
                units,
                emotion: EmotionEmbedding::new(emotion).unwrap(),
                target: Target::PitchBins(rows),
            }
        })
        .collect()
}

#[test]
fn pitch_predictor_learns_unit_mod_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let train = pitch_rule_data(500, &mut rng);
    let held_out = pitch_rule_data(30, &mut rng);
    let mut model = PredictorModel::new(Architecture::pitch(K as usize, D), 7).unwrap();
    let cfg = TrainingConfig {
        learning_rate: 0.5,
        epochs: 15,
        batch_size: 8,
        seed: 3,
        loss: PredictorKind::Pitch,
    };
    let history = train_predictor(&mut model, &train, &cfg).unwrap();
    assert!(history.last() < history.first());

    let q = PitchQuantizer::default();
    let (mut hits, mut total) = (0, 0);
    for ex in &held_out {
        let acts = predict_pitch(&UnitSequence::new(ex.units.clone(), 0.02), &ex.emotion, &model, &q).unwrap();
        for (a, u) in acts.iter().zip(&ex.units) {
            total += 1;
            hits += usize::from(PitchQuantizer::argmax(a) == *u as usize % D);
        }
    }
    let acc = hits as f64 / total as f64;
    assert!(acc >= 0.9, "held-out bin accuracy {acc}");
}
