use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ConditioningMatrix;
use crate::error::{Error, Result};
use crate::pitch_analysis::Waveform;

/// Harmonics in the voiced stack.
pub const HARMONICS: usize = 8;
/// Peak-ish level of voiced frames; the harmonic amplitudes have unit energy.
pub const VOICED_GAIN: f64 = 0.3;
/// Half-width of the uniform noise emitted on unvoiced frames.
pub const NOISE_LEVEL: f64 = 0.003;
const NOISE_SEED: u64 = 0x006e_6f69_7365;

/// Renders a conditioning matrix as audio with `rows * hop` samples.
///
/// Each frame contributes a grain of two hops under a periodic Hann window,
/// starting half a hop before the frame, so neighbouring grains overlap by
/// half and the windows sum to one. A single phase is integrated over the
/// whole utterance from the window-blended F0 contour, so voiced grains add
/// coherently and the output has no phase resets. Voiced grains hold eight
/// harmonics whose relative levels come from a fixed affine map of the unit
/// embedding; unvoiced grains hold low-level seeded noise.
pub fn toy_synthesize(cond: &ConditioningMatrix, sample_rate: u32) -> Result<Waveform> {
    let sr = sample_rate as f64;
    let exact_hop = cond.frame_period() * sr;
    let hop = exact_hop.round() as usize;
    if hop < 2 || (exact_hop - hop as f64).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "frame period {} s is not a whole number of samples at {sample_rate} Hz",
            cond.frame_period()
        )));
    }
    let nyquist = sr / 2.0;
    for t in 0..cond.rows() {
        if f64::from(cond.f0(t)) >= nyquist {
            return Err(Error::invalid(format!(
                "f0 {} Hz at frame {t} is not below the Nyquist frequency {nyquist} Hz",
                cond.f0(t)
            )));
        }
    }

    let n = cond.rows() * hop;
    let grain = 2 * hop;
    let window: Vec<f64> = (0..grain)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / grain as f64).cos())
        .collect();
    let grain_start = |t: usize| (t * hop) as isize - (hop / 2) as isize;

    // Window-blended F0 and window mass per sample.
    let mut f0_acc = vec![0.0; n];
    let mut mass = vec![0.0; n];
    for t in 0..cond.rows() {
        let f0 = f64::from(cond.f0(t));
        for_grain(grain_start(t), grain, n, |i, k| {
            f0_acc[i] += window[k] * f0;
            mass[i] += window[k];
        });
    }
    let mut phase = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        phase[i] = acc;
        acc += 2.0 * PI * f0_acc[i] / mass[i] / sr;
        // Harmonics are integer multiples, so wrapping by 2 pi is exact.
        acc %= 2.0 * PI;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED);
    let mut out = vec![0.0; n];
    for t in 0..cond.rows() {
        let f0 = f64::from(cond.f0(t));
        let start = grain_start(t);
        if f0 > 0.0 {
            let amps = harmonic_amplitudes(cond.unit_block(t), f0, nyquist);
            for_grain(start, grain, n, |i, k| {
                let s: f64 = amps
                    .iter()
                    .enumerate()
                    .map(|(h, a)| a * ((h + 1) as f64 * phase[i]).sin())
                    .sum();
                out[i] += window[k] * VOICED_GAIN * s;
            });
        } else {
            for_grain(start, grain, n, |i, k| {
                out[i] += window[k] * rng.random_range(-NOISE_LEVEL..NOISE_LEVEL);
            });
        }
    }
    for (o, m) in out.iter_mut().zip(&mass) {
        *o /= m;
    }
    Waveform::new(out, sample_rate)
}

/// Calls `f(sample, window_index)` for the part of a grain inside `[0, n)`.
fn for_grain(start: isize, grain: usize, n: usize, mut f: impl FnMut(usize, usize)) {
    for k in 0..grain {
        let i = start + k as isize;
        if i >= 0 && (i as usize) < n {
            f(i as usize, k);
        }
    }
}

/// `a_h = (1/h) (1 + 0.5 tanh(m_h . e))` over a fixed cosine basis `m_h`,
/// zeroed above Nyquist and scaled to unit energy.
pub(crate) fn harmonic_amplitudes(embedding: &[f32], f0: f64, nyquist: f64) -> Vec<f64> {
    let e = embedding.len().max(1) as f64;
    let mut amps: Vec<f64> = (1..=HARMONICS)
        .map(|h| {
            if h as f64 * f0 >= nyquist {
                return 0.0;
            }
            let proj: f64 = embedding
                .iter()
                .enumerate()
                .map(|(j, &v)| (PI * h as f64 * (j as f64 + 0.5) / e).cos() * f64::from(v))
                .sum::<f64>()
                / e.sqrt();
            (1.0 + 0.5 * proj.tanh()) / h as f64
        })
        .collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        amps.iter_mut().for_each(|a| *a /= norm);
    }
    amps
}
