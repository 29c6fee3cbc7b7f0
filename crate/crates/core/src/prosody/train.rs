use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmotionEmbedding, PredictorKind, PredictorModel};
use crate::error::{Error, Result};

/// Supervision for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Frame count of every reduced unit, before rounding.
    Durations(Vec<f64>),
    /// Per-frame bin targets in `[0, 1]^d`; one-hot for voiced frames, all
    /// zeros for unvoiced ones.
    PitchBins(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub units: Vec<u32>,
    pub emotion: EmotionEmbedding,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Loss family; must match the model head.
    pub loss: PredictorKind,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        Ok(())
    }
}

fn check_example(model: &PredictorModel, ex: &TrainingExample) -> Result<()> {
    model.check_inputs(&ex.units)?;
    let out = model.architecture().out_dim;
    match (&ex.target, model.kind()) {
        (Target::Durations(d), PredictorKind::Duration) if d.len() == ex.units.len() => Ok(()),
        (Target::PitchBins(rows), PredictorKind::Pitch)
            if rows.len() == ex.units.len() && rows.iter().all(|r| r.len() == out) =>
        {
            Ok(())
        }
        _ => Err(Error::invalid(format!(
            "target shape does not fit a {} model over {} units",
            model.kind().as_str(),
            ex.units.len()
        ))),
    }
}

/// Loss of one example: mean squared error of raw durations, or per-bin
/// binary cross-entropy of pitch logits summed over bins and averaged over
/// frames.
pub fn example_loss(model: &PredictorModel, ex: &TrainingExample) -> Result<f64> {
    check_example(model, ex)?;
    let out = model.trace(&ex.units, &ex.emotion).out;
    Ok(loss_from_outputs(&out, &ex.target).0)
}

/// Loss of one example, with its gradient added into `grad`.
pub fn loss_and_gradient(model: &PredictorModel, ex: &TrainingExample, grad: &mut [f64]) -> Result<f64> {
    check_example(model, ex)?;
    if grad.len() != model.num_params() {
        return Err(Error::DimensionMismatch {
            expected: model.num_params(),
            actual: grad.len(),
        });
    }
    let trace = model.trace(&ex.units, &ex.emotion);
    let (loss, d_out) = loss_from_outputs(&trace.out, &ex.target);
    model.backward(&ex.units, &trace, &d_out, grad);
    Ok(loss)
}

fn loss_from_outputs(out: &[f64], target: &Target) -> (f64, Vec<f64>) {
    if out.is_empty() {
        return (0.0, Vec::new());
    }
    let n = out.len() as f64;
    match target {
        Target::Durations(d) => {
            let mut loss = 0.0;
            let grad = out
                .iter()
                .zip(d)
                .map(|(y, t)| {
                    let e = y - t;
                    loss += e * e;
                    2.0 * e / n
                })
                .collect();
            (loss / n, grad)
        }
        Target::PitchBins(rows) => {
            // Summed over bins, averaged over frames.
            let n = rows.len() as f64;
            let mut loss = 0.0;
            let grad = out
                .iter()
                .zip(rows.iter().flatten())
                .map(|(&z, &y)| {
                    // softplus(z) - y z, computed without overflow
                    loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
                    (super::sigmoid(z) - y) / n
                })
                .collect();
            (loss / n, grad)
        }
    }
}

/// Mean example loss over the whole dataset, in dataset order.
fn dataset_loss(model: &PredictorModel, data: &[TrainingExample]) -> f64 {
    let total: f64 = data
        .iter()
        .map(|ex| loss_from_outputs(&model.trace(&ex.units, &ex.emotion).out, &ex.target).0)
        .sum();
    total / data.len() as f64
}

/// Minibatch SGD with a fixed learning rate.
///
/// Batches are drawn from a ChaCha shuffle keyed by `cfg.seed`; the returned
/// history holds the full-dataset loss after each epoch. A fixed seed makes the
/// history and the final parameters bit-for-bit reproducible.
pub fn train_predictor(model: &mut PredictorModel, data: &[TrainingExample], cfg: &TrainingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if cfg.loss != model.kind() {
        return Err(Error::invalid(format!(
            "{} loss cannot train a {} model",
            cfg.loss.as_str(),
            model.kind().as_str()
        )));
    }
    for ex in data {
        check_example(model, ex)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; model.num_params()];
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let trace = model.trace(&data[i].units, &data[i].emotion);
                let (_, d_out) = loss_from_outputs(&trace.out, &data[i].target);
                model.backward(&data[i].units, &trace, &d_out, &mut grad);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        let loss = dataset_loss(model, data);
        if !loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        history.push(loss);
    }
    Ok(history)
}
