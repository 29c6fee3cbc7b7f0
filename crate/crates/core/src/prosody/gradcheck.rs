use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{example_loss, loss_and_gradient, PredictorModel, TrainingExample};
use crate::error::{Error, Result};

/// Models up to this size are checked exhaustively.
const EXHAUSTIVE_LIMIT: usize = 2_000;
/// Parameters sampled per block for larger models.
const PER_BLOCK: usize = 120;
/// Gradients smaller than this are compared on an absolute scale.
const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter index where the worst error occurred.
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Compares backpropagated gradients against central finite differences.
///
/// Small models are checked on every parameter. Larger ones use a seeded
/// sample from every parameter block; embedding rows are drawn only from the
/// units that occur in the sample, since the rest have zero gradient.
pub fn grad_check(model: &PredictorModel, sample: &TrainingExample, epsilon: f64) -> Result<GradCheckReport> {
    let mut analytic = vec![0.0; model.num_params()];
    loss_and_gradient(model, sample, &mut analytic)?;
    compare_gradients(model, sample, &analytic, epsilon)
}

/// Checks a caller-supplied gradient; lets tests confirm that a corrupted
/// gradient is caught.
pub fn compare_gradients(
    model: &PredictorModel,
    sample: &TrainingExample,
    analytic: &[f64],
    epsilon: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    if analytic.len() != model.num_params() {
        return Err(Error::DimensionMismatch {
            expected: model.num_params(),
            actual: analytic.len(),
        });
    }
    let indices = check_indices(model, sample);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        checked: indices.len(),
    };
    for i in indices {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + epsilon;
        let plus = example_loss(&probe, sample)?;
        probe.params_mut()[i] = original - epsilon;
        let minus = example_loss(&probe, sample)?;
        probe.params_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
        if !err.is_finite() || err > report.max_relative_error {
            report.max_relative_error = if err.is_finite() { err } else { f64::INFINITY };
            report.worst_index = i;
        }
    }
    Ok(report)
}

fn check_indices(model: &PredictorModel, sample: &TrainingExample) -> Vec<usize> {
    if model.num_params() <= EXHAUSTIVE_LIMIT {
        return (0..model.num_params()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let unit_dim = model.architecture().unit_dim;
    let mut out = Vec::new();
    for block in model.param_blocks() {
        if block.name == "unit_embedding" {
            let mut used: Vec<u32> = sample.units.clone();
            used.sort_unstable();
            used.dedup();
            let pool: Vec<usize> = used
                .iter()
                .flat_map(|&u| (0..unit_dim).map(move |e| u as usize * unit_dim + e))
                .collect();
            let n = pool.len().min(PER_BLOCK);
            out.extend(index::sample(&mut rng, pool.len(), n).into_iter().map(|j| pool[j]));
        } else {
            let len = block.range.len();
            let n = len.min(PER_BLOCK);
            out.extend(
                index::sample(&mut rng, len, n)
                    .into_iter()
                    .map(|j| block.range.start + j),
            );
        }
    }
    out.sort_unstable();
    out
}
