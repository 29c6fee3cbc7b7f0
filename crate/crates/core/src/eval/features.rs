use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::FeatureVector;
use crate::dsp::{hann, MelBank, MAG_FLOOR};
use crate::error::{Error, Result};
use crate::pitch_analysis::{PitchTrack, Waveform};

/// Frames quieter than this RMS are ignored by every feature.
pub const SILENCE_RMS: f64 = 1e-4;
pub const LPC_ORDER: usize = 12;
const PRE_EMPHASIS: f64 = 0.97;

/// Computes the six expressivity features.
///
/// Frames follow the track: frame `i` is centred at `(i + 0.5) * period` and
/// analysed over two frame periods with a Hann window. Each per-frame value is
/// smoothed by a 3-frame moving average over its valid neighbours before the
/// utterance-level statistic is taken. A statistic over no valid frames is 0.
pub fn extract_features(wave: &Waveform, track: &PitchTrack) -> Result<FeatureVector> {
    let sr = wave.sample_rate as f64;
    let exact_hop = track.frame_period() * sr;
    let hop = exact_hop.round() as usize;
    if hop < 2 || (exact_hop - hop as f64).abs() > 1e-6 {
        return Err(Error::invalid("frame period must be a whole number of samples"));
    }
    let expected = wave.len() / hop;
    if track.len().abs_diff(expected) > 1 {
        return Err(Error::UnalignedStreams {
            left: expected,
            right: track.len(),
        });
    }

    let win_len = 2 * hop;
    let nfft = (2 * win_len).next_power_of_two();
    let window = hann(win_len);
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let bin_hz = sr / nfft as f64;
    let mel = MelBank::new(nfft, sr, 26);

    let t_len = track.len();
    let mut slope_uv = vec![None; t_len];
    let mut slope_v = vec![None; t_len];
    let mut semitones = vec![None; t_len];
    let mut f1_bw = vec![None; t_len];
    let mut h1_h2 = vec![None; t_len];
    let mut mfcc4 = vec![None; t_len];

    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for i in 0..t_len {
        let start = (i * hop) as isize + (hop / 2) as isize - hop as isize;
        let raw: Vec<f64> = (0..win_len)
            .map(|k| {
                let s = start + k as isize;
                if s >= 0 && (s as usize) < wave.len() {
                    wave.samples[s as usize]
                } else {
                    0.0
                }
            })
            .collect();
        let rms = (raw.iter().map(|v| v * v).sum::<f64>() / win_len as f64).sqrt();
        if rms < SILENCE_RMS {
            continue;
        }
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for k in 0..win_len {
            buf[k].re = raw[k] * window[k];
        }
        fft.process(&mut buf);
        let mag: Vec<f64> = buf[..=nfft / 2].iter().map(|c| c.norm()).collect();

        let voiced = track.voiced()[i];
        if voiced {
            let f0 = track.f0_hz()[i];
            semitones[i] = Some(12.0 * (f0 / 27.5).log2());
            slope_v[i] = spectral_slope(&mag, bin_hz, 0.0, 500.0, false);
            h1_h2[i] = harmonic_difference(&mag, bin_hz, f0, sr / 2.0);
            f1_bw[i] = first_formant_bandwidth(&raw, &window, sr);
            mfcc4[i] = Some(mel.cepstrum(&mag, 4));
        } else {
            slope_uv[i] = spectral_slope(&mag, bin_hz, 500.0, 1500.0, true);
        }
    }

    let fp = track.frame_period();
    let semitones = smooth3(&semitones);
    let mfcc4 = smooth3(&mfcc4);
    Ok(FeatureVector([
        mean_or_zero(&smooth3(&slope_uv)),
        mean_or_zero(&smooth3(&slope_v)),
        rising_slope_std(&semitones, fp),
        mean_or_zero(&smooth3(&f1_bw)),
        mean_or_zero(&smooth3(&h1_h2)),
        std_norm(&mfcc4),
    ]))
}

/// Least-squares slope of the dB magnitude over bins in the band, in dB/Hz.
/// The lower edge is inclusive only when `include_lo`; DC is always skipped.
fn spectral_slope(mag: &[f64], bin_hz: f64, lo: f64, hi: f64, include_lo: bool) -> Option<f64> {
    let pts: Vec<(f64, f64)> = mag
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &m)| (k as f64 * bin_hz, m))
        .filter(|&(f, _)| (f > lo || (include_lo && f == lo)) && f <= hi)
        .map(|(f, m)| (f, 20.0 * m.max(MAG_FLOOR).log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mf = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mf) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mf).powi(2)).sum();
    Some(sxy / sxx)
}

/// dB level of the strongest bin within 10% of `f0` minus that near `2 f0`.
fn harmonic_difference(mag: &[f64], bin_hz: f64, f0: f64, nyquist: f64) -> Option<f64> {
    if 2.2 * f0 >= nyquist {
        return None;
    }
    let peak = |centre: f64| {
        let lo = ((0.9 * centre) / bin_hz).floor() as usize;
        let hi = ((1.1 * centre) / bin_hz).ceil() as usize;
        mag[lo.max(1)..=hi.min(mag.len() - 1)]
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    };
    Some(20.0 * (peak(f0).max(MAG_FLOOR) / peak(2.0 * f0).max(MAG_FLOOR)).log10())
}

/// Bandwidth in Hz of the lowest-frequency LPC pole above 50 Hz.
fn first_formant_bandwidth(raw: &[f64], window: &[f64], sr: f64) -> Option<f64> {
    let x: Vec<f64> = (0..raw.len())
        .map(|k| {
            let prev = if k > 0 { raw[k - 1] } else { 0.0 };
            (raw[k] - PRE_EMPHASIS * prev) * window[k]
        })
        .collect();
    let r: Vec<f64> = (0..=LPC_ORDER)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
        .collect();
    let a = levinson_durbin(&r)?;
    let mut companion = DMatrix::<f64>::zeros(LPC_ORDER, LPC_ORDER);
    for k in 0..LPC_ORDER {
        companion[(0, k)] = -a[k + 1];
        if k + 1 < LPC_ORDER {
            companion[(k + 1, k)] = 1.0;
        }
    }
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| (z.arg() * sr / (2.0 * PI), -z.norm().ln() * sr / PI))
        .filter(|&(f, bw)| f > 50.0 && f < sr / 2.0 - 50.0 && bw.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, bw)| bw.max(0.0))
}

/// Prediction polynomial `[1, a1, ..., ap]` from autocorrelation `r[0..=p]`.
pub(crate) fn levinson_durbin(r: &[f64]) -> Option<Vec<f64>> {
    let p = r.len() - 1;
    if r[0] <= 0.0 {
        return None;
    }
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=p {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            // Perfectly predictable signal; the lower order is exact.
            break;
        }
    }
    Some(a)
}

/// Centred 3-point average over neighbours that are also valid.
fn smooth3(v: &[Option<f64>]) -> Vec<Option<f64>> {
    (0..v.len())
        .map(|i| {
            v[i]?;
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(v.len() - 1);
            let vals: Vec<f64> = v[lo..=hi].iter().flatten().copied().collect();
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

fn mean_or_zero(v: &[Option<f64>]) -> f64 {
    let vals: Vec<f64> = v.iter().flatten().copied().collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

fn population_std(vals: &[f64]) -> f64 {
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
}

/// Standard deviation over |mean|; 0 when empty or the mean vanishes.
fn std_norm(v: &[Option<f64>]) -> f64 {
    let vals: Vec<f64> = v.iter().flatten().copied().collect();
    if vals.is_empty() {
        return 0.0;
    }
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    if m.abs() < 1e-12 {
        return 0.0;
    }
    population_std(&vals) / m.abs()
}

/// Standard deviation of the slopes (semitones per second) of every maximal
/// rising run inside each voiced stretch.
fn rising_slope_std(semitones: &[Option<f64>], frame_period: f64) -> f64 {
    let mut slopes = Vec::new();
    let mut run_start: Option<(usize, f64)> = None;
    let mut prev: Option<(usize, f64)> = None;
    for (i, v) in semitones.iter().enumerate() {
        match (*v, prev) {
            (Some(x), Some((pi, px))) if pi + 1 == i && x > px => {
                run_start.get_or_insert((pi, px));
            }
            _ => {
                if let (Some((si, sx)), Some((pi, px))) = (run_start.take(), prev) {
                    slopes.push((px - sx) / ((pi - si) as f64 * frame_period));
                }
            }
        }
        prev = v.map(|x| (i, x));
    }
    if let (Some((si, sx)), Some((pi, px))) = (run_start, prev) {
        slopes.push((px - sx) / ((pi - si) as f64 * frame_period));
    }
    if slopes.is_empty() {
        0.0
    } else {
        population_std(&slopes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levinson_recovers_an_ar2_process() {
        // Autocorrelation of x[n] = 0.5 x[n-1] - 0.3 x[n-2] + e[n] from the
        // Yule-Walker equations with r0 = 1.
        let (a1, a2) = (0.5, -0.3);
        let r1 = a1 / (1.0 - a2);
        let r2 = a1 * r1 + a2;
        let a = levinson_durbin(&[1.0, r1, r2]).unwrap();
        assert!((a[1] + a1).abs() < 1e-12 && (a[2] + a2).abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn smoothing_respects_gaps() {
        let s = smooth3(&[Some(1.0), Some(4.0), None, Some(10.0)]);
        assert_eq!(s, vec![Some(2.5), Some(2.5), None, Some(10.0)]);
    }

    #[test]
    fn rising_runs() {
        let v = [Some(0.0), Some(1.0), Some(3.0), Some(2.0), None, Some(5.0), Some(6.0)];
        // Runs: 0 -> 3 over 2 frames (150 st/s), 5 -> 6 over 1 frame (100 st/s).
        let s = rising_slope_std(&v, 0.01);
        assert!((s - 25.0).abs() < 1e-9, "{s}");
        assert_eq!(rising_slope_std(&[Some(3.0), Some(2.0)], 0.01), 0.0);
    }

    #[test]
    fn slope_of_a_known_line() {
        let bin_hz = 10.0;
        // 20 log10(m) = -0.01 f  =>  m = 10^(-f / 2000)
        let mag: Vec<f64> = (0..200).map(|k| 10f64.powf(-(k as f64 * bin_hz) / 2000.0)).collect();
        let s = spectral_slope(&mag, bin_hz, 500.0, 1500.0, true).unwrap();
        assert!((s + 0.01).abs() < 1e-12);
    }
}
