//! NCCF candidate generation with dynamic-programming path selection.
//!
//! Every frame gets a handful of period candidates from peaks of the normalized
//! cross-correlation function, each scored by its peak height. A Viterbi pass
//! then picks one candidate per frame (or the unvoiced state), trading local
//! merit against the log-frequency jump between neighbouring frames.

use super::{PitchTrack, Waveform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub f_min: f64,
    pub f_max: f64,
    /// Hop between frames in seconds.
    pub frame_period: f64,
    /// Lag-weighted merit a candidate needs before voicing beats silence.
    pub voicing_threshold: f64,
    /// Correlation window length in seconds.
    pub window: f64,
    pub max_candidates: usize,
    /// Relative merit penalty at the longest lag; breaks ties between a period
    /// and its multiples in favour of the shortest.
    pub lag_weight: f64,
    /// Transition cost per unit of |ln(f_prev / f_next)|.
    pub jump_cost: f64,
    /// Cost of switching between voiced and unvoiced.
    pub voicing_change_cost: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            f_min: 60.0,
            f_max: 400.0,
            frame_period: 0.020,
            voicing_threshold: 0.5,
            window: 0.035,
            max_candidates: 6,
            lag_weight: 0.3,
            jump_cost: 0.5,
            voicing_change_cost: 0.2,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max < nyquist) {
            return Err(Error::invalid(format!(
                "pitch range [{}, {}] must satisfy 0 < f_min < f_max < {nyquist}",
                self.f_min, self.f_max
            )));
        }
        if !(self.frame_period > 0.0 && self.window > 0.0) {
            return Err(Error::invalid("frame period and window must be positive"));
        }
        if self.max_candidates == 0 {
            return Err(Error::invalid("max_candidates must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    f0: f64,
    /// Local cost, `1 - lag-weighted merit`.
    cost: f64,
}

/// Tracks F0 with one output frame per `cfg.frame_period`.
///
/// Frame `i` is centred at `(i + 0.5) * frame_period`. Voiced frames carry an
/// F0 inside `[f_min, f_max]`; unvoiced frames carry 0.
pub fn track_f0(wave: &Waveform, cfg: &TrackerConfig) -> Result<PitchTrack> {
    if wave.sample_rate < 8000 {
        return Err(Error::invalid(format!(
            "sample rate {} is below 8000 Hz",
            wave.sample_rate
        )));
    }
    cfg.validate(wave.sample_rate)?;
    let sr = wave.sample_rate as f64;
    let hop = cfg.frame_period * sr;
    let n_frames = (wave.len() as f64 / hop).floor() as usize;
    if n_frames < 2 {
        return Err(Error::invalid(format!(
            "waveform of {} samples is shorter than two frames",
            wave.len()
        )));
    }

    let min_lag = ((sr / cfg.f_max).floor() as usize).max(2);
    let max_lag = (sr / cfg.f_min).ceil() as usize;
    let win = ((cfg.window * sr).round() as usize).max(max_lag);

    let candidates: Vec<Vec<Candidate>> = (0..n_frames)
        .map(|i| {
            let center = (i as f64 + 0.5) * hop;
            frame_candidates(wave, center, win, min_lag, max_lag, cfg)
        })
        .collect();

    let path = viterbi(&candidates, cfg);
    let f0: Vec<f64> = path
        .iter()
        .zip(&candidates)
        .map(|(choice, cands)| choice.map_or(0.0, |j| cands[j].f0))
        .collect();
    PitchTrack::from_f0(f0, cfg.frame_period)
}

fn frame_candidates(
    wave: &Waveform,
    center: f64,
    win: usize,
    min_lag: usize,
    max_lag: usize,
    cfg: &TrackerConfig,
) -> Vec<Candidate> {
    let span = win + max_lag + 2;
    let start = center.round() as isize - (span / 2) as isize;
    let mut seg = vec![0.0; span];
    let mut valid = 0usize;
    let mut sum = 0.0;
    for (n, s) in seg.iter_mut().enumerate() {
        let idx = start + n as isize;
        if idx >= 0 && (idx as usize) < wave.samples.len() {
            *s = wave.samples[idx as usize];
            sum += *s;
            valid += 1;
        }
    }
    if valid == 0 {
        return Vec::new();
    }
    let mean = sum / valid as f64;
    for (n, s) in seg.iter_mut().enumerate() {
        let idx = start + n as isize;
        if idx >= 0 && (idx as usize) < wave.samples.len() {
            *s -= mean;
        }
    }

    let e0: f64 = seg[..win].iter().map(|x| x * x).sum();
    if e0 < 1e-10 * win as f64 {
        return Vec::new();
    }

    // r[k] for k in [min_lag - 1, max_lag + 1]
    let lo = min_lag - 1;
    let hi = max_lag + 1;
    let mut ek: f64 = seg[lo..lo + win].iter().map(|x| x * x).sum();
    let mut nccf = Vec::with_capacity(hi - lo + 1);
    for k in lo..=hi {
        if k > lo {
            ek += seg[k + win - 1] * seg[k + win - 1] - seg[k - 1] * seg[k - 1];
        }
        let cross: f64 = seg[..win].iter().zip(&seg[k..k + win]).map(|(a, b)| a * b).sum();
        let denom = (e0 * ek.max(0.0)).sqrt();
        nccf.push(if denom > 1e-12 { cross / denom } else { 0.0 });
    }

    let sr = wave.sample_rate as f64;
    let mut peaks = Vec::new();
    for k in min_lag..=max_lag {
        let (prev, cur, next) = (nccf[k - 1 - lo], nccf[k - lo], nccf[k + 1 - lo]);
        if cur <= 0.0 || cur < prev || cur < next || (cur == prev && cur == next) {
            continue;
        }
        let curvature = prev - 2.0 * cur + next;
        let (offset, height) = if curvature < 0.0 {
            let d = 0.5 * (prev - next) / curvature;
            (d, cur - 0.25 * (prev - next) * d)
        } else {
            (0.0, cur)
        };
        let lag = k as f64 + offset;
        let f0 = (sr / lag).clamp(cfg.f_min, cfg.f_max);
        let merit = height.min(1.0) * (1.0 - cfg.lag_weight * lag / max_lag as f64);
        peaks.push(Candidate { f0, cost: 1.0 - merit });
    }
    peaks.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    peaks.truncate(cfg.max_candidates);
    peaks
}

/// Returns, per frame, the index of the chosen candidate or `None` for unvoiced.
fn viterbi(candidates: &[Vec<Candidate>], cfg: &TrackerConfig) -> Vec<Option<usize>> {
    let unvoiced_cost = 1.0 - cfg.voicing_threshold;
    // State 0 is unvoiced; state j + 1 is candidate j.
    let mut cost: Vec<f64> = std::iter::once(unvoiced_cost)
        .chain(candidates[0].iter().map(|c| c.cost))
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(candidates.len());
    back.push(vec![0; cost.len()]);

    for t in 1..candidates.len() {
        let prev = &candidates[t - 1];
        let cur = &candidates[t];
        let mut next_cost = Vec::with_capacity(cur.len() + 1);
        let mut next_back = Vec::with_capacity(cur.len() + 1);
        for s in 0..=cur.len() {
            let local = if s == 0 { unvoiced_cost } else { cur[s - 1].cost };
            let mut best = (0usize, f64::INFINITY);
            for (p, &pc) in cost.iter().enumerate() {
                let trans = match (p, s) {
                    (0, 0) => 0.0,
                    (0, _) | (_, 0) => cfg.voicing_change_cost,
                    (p, s) => cfg.jump_cost * (prev[p - 1].f0 / cur[s - 1].f0).ln().abs(),
                };
                let total = pc + trans;
                if total < best.1 {
                    best = (p, total);
                }
            }
            next_cost.push(best.1 + local);
            next_back.push(best.0);
        }
        cost = next_cost;
        back.push(next_back);
    }

    let mut state = cost
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc })
        .0;
    let mut path = vec![None; candidates.len()];
    for t in (0..candidates.len()).rev() {
        path[t] = state.checked_sub(1);
        state = back[t][state];
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    fn sine(freq: f64, secs: f64, sr: u32) -> Waveform {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    #[test]
    fn sine_220() {
        let track = track_f0(&sine(220.0, 1.0, 16000), &TrackerConfig::default()).unwrap();
        assert_eq!(track.len(), 50);
        let voiced: Vec<f64> = track.voiced_f0().collect();
        assert!(voiced.len() as f64 >= 0.9 * track.len() as f64);
        assert!((median(voiced) - 220.0).abs() <= 4.0);
    }

    #[test]
    fn sawtooth_110() {
        let sr = 16000;
        let s: Vec<f64> = (0..sr)
            .map(|i| {
                let phase = (110.0 * i as f64 / sr as f64).fract();
                0.8 * (phase - 0.5)
            })
            .collect();
        let track = track_f0(&Waveform::new(s, sr).unwrap(), &TrackerConfig::default()).unwrap();
        let m = median(track.voiced_f0().collect());
        assert!((m - 110.0).abs() / 110.0 <= 0.02, "{m}");
    }

    #[test]
    fn silence_is_unvoiced() {
        let w = Waveform::new(vec![0.0; 16000], 16000).unwrap();
        let track = track_f0(&w, &TrackerConfig::default()).unwrap();
        assert!(track.voiced().iter().all(|v| !v));
        assert!(track.f0_hz().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn rejects_short_or_invalid() {
        let cfg = TrackerConfig::default();
        assert!(track_f0(&Waveform::new(vec![], 16000).unwrap(), &cfg).is_err());
        assert!(track_f0(&Waveform::new(vec![0.0; 500], 16000).unwrap(), &cfg).is_err());
        let bad = TrackerConfig {
            f_min: 500.0,
            ..cfg.clone()
        };
        assert!(track_f0(&sine(200.0, 0.5, 16000), &bad).is_err());
        let above_nyquist = TrackerConfig { f_max: 9000.0, ..cfg };
        assert!(track_f0(&sine(200.0, 0.5, 16000), &above_nyquist).is_err());
    }
}
