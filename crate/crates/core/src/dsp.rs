//! Shared short-time spectral helpers.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::pitch_analysis::Waveform;
use crate::unit_codec::FrameFeatures;

pub(crate) const MAG_FLOOR: f64 = 1e-10;

/// Periodic Hann window.
pub(crate) fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos())
        .collect()
}

/// Triangular filters on the mel scale from 20 Hz to Nyquist.
pub(crate) struct MelBank {
    filters: Vec<Vec<(usize, f64)>>,
}

impl MelBank {
    pub(crate) fn new(nfft: usize, sr: f64, count: usize) -> Self {
        let to_mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let from_mel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let (lo, hi) = (to_mel(20.0), to_mel(sr / 2.0));
        let edges: Vec<f64> = (0..count + 2)
            .map(|i| from_mel(lo + (hi - lo) * i as f64 / (count + 1) as f64))
            .collect();
        let bin_hz = sr / nfft as f64;
        let filters = (0..count)
            .map(|m| {
                let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..=nfft / 2)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > l && f <= c {
                            (f - l) / (c - l)
                        } else if f > c && f < r {
                            (r - f) / (r - c)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        Self { filters }
    }

    fn log_energies(&self, mag: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|f| {
                let e: f64 = f.iter().map(|&(k, w)| w * mag[k] * mag[k]).sum();
                e.max(MAG_FLOOR).ln()
            })
            .collect()
    }

    /// Cepstral coefficient `index` (DCT-II of the log mel energies).
    pub(crate) fn cepstrum(&self, mag: &[f64], index: usize) -> f64 {
        dct_coefficient(&self.log_energies(mag), index)
    }
}

fn dct_coefficient(x: &[f64], index: usize) -> f64 {
    let m = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(j, v)| v * (PI * index as f64 * (j as f64 + 0.5) / m).cos())
        .sum()
}

/// Mel-cepstral frame features, one frame per `frame_period`.
///
/// Frame `i` is centred at `(i + 0.5) * frame_period` and analysed over two
/// frame periods under a Hann window, the same grid the pitch tracker uses.
/// Each frame holds coefficients `0..n_coeffs` over 26 mel filters.
pub fn mfcc_features(wave: &Waveform, frame_period: f64, n_coeffs: usize) -> Result<FrameFeatures> {
    let sr = wave.sample_rate as f64;
    let exact_hop = frame_period * sr;
    let hop = exact_hop.round() as usize;
    if hop < 2 || (exact_hop - hop as f64).abs() > 1e-6 {
        return Err(Error::invalid("frame period must be a whole number of samples"));
    }
    if n_coeffs == 0 || n_coeffs > 26 {
        return Err(Error::invalid("coefficient count must lie in 1..=26"));
    }
    let n_frames = wave.len() / hop;
    if n_frames == 0 {
        return Err(Error::InsufficientData("audio shorter than one frame".into()));
    }
    let win_len = 2 * hop;
    let nfft = win_len.next_power_of_two();
    let window = hann(win_len);
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mel = MelBank::new(nfft, sr, 26);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut data = Vec::with_capacity(n_frames * n_coeffs);
    for i in 0..n_frames {
        let start = (i * hop) as isize - (hop / 2) as isize;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for k in 0..win_len {
            let s = start + k as isize;
            if s >= 0 && (s as usize) < wave.len() {
                buf[k].re = wave.samples[s as usize] * window[k];
            }
        }
        fft.process(&mut buf);
        let mag: Vec<f64> = buf[..=nfft / 2].iter().map(|c| c.norm()).collect();
        let log_e = mel.log_energies(&mag);
        data.extend((0..n_coeffs).map(|c| dct_coefficient(&log_e, c)));
    }
    FrameFeatures::from_flat(data, n_coeffs, frame_period)
}
