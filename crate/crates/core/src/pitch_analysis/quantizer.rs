use super::SpeakerPitchStats;
use crate::error::{Error, Result};

/// Activations below this value count as silence when decoding.
pub const VOICING_CUTOFF: f64 = 0.1;

/// `d` equal-width bins over the speaker-normalized range `[lo, hi]`.
///
/// Bin `j` covers the half-open interval `[lo + j*w, lo + (j+1)*w)` with
/// `w = (hi - lo) / d`; its center is `lo + (j + 0.5) * w`. Values outside the
/// range fall into the first or last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchQuantizer {
    d: usize,
    lo: f64,
    hi: f64,
    centers: Vec<f64>,
}

impl Default for PitchQuantizer {
    fn default() -> Self {
        Self::new(32, -3.0, 3.0).expect("default quantizer is valid")
    }
}

impl PitchQuantizer {
    pub fn new(d: usize, lo: f64, hi: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("quantizer needs at least 2 bins"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("invalid quantizer range [{lo}, {hi}]")));
        }
        let w = (hi - lo) / d as f64;
        let centers = (0..d).map(|j| lo + (j as f64 + 0.5) * w).collect();
        Ok(Self { d, lo, hi, centers })
    }

    pub fn bins(&self) -> usize {
        self.d
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.d as f64
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    fn edge(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.bin_width()
    }

    /// Bin containing `value`, after clamping to the quantizer range.
    pub fn bin_index(&self, value: f64) -> usize {
        if value.is_nan() || value < self.lo {
            return 0;
        }
        let guess = ((value - self.lo) / self.bin_width()).floor();
        if guess >= self.d as f64 {
            return self.d - 1;
        }
        let mut j = guess as usize;
        // Correct for rounding at bin edges so the intervals stay half-open.
        if j + 1 < self.d && value >= self.edge(j + 1) {
            j += 1;
        } else if j > 0 && value < self.edge(j) {
            j -= 1;
        }
        j
    }

    pub fn one_hot(&self, value: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        v[self.bin_index(value)] = 1.0;
        v
    }

    /// Weighted average of bin centers over activations at or above
    /// [`VOICING_CUTOFF`]; `None` when every activation is below it.
    pub fn decode_normalized(&self, activation: &[f64]) -> Result<Option<f64>> {
        if activation.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: activation.len(),
            });
        }
        if let Some(a) = activation.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::invalid(format!("activation {a} outside [0, 1]")));
        }
        let (num, den) = activation
            .iter()
            .zip(&self.centers)
            .filter(|(&a, _)| a >= VOICING_CUTOFF)
            .fold((0.0, 0.0), |(n, d), (&a, &c)| (n + a * c, d + a));
        Ok((den > 0.0).then(|| num / den))
    }

    /// Index of the largest activation; ties go to the lowest index.
    pub fn argmax(activation: &[f64]) -> usize {
        activation
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &a)| if a > acc.1 { (i, a) } else { acc },
            )
            .0
    }
}

/// One-hot encoding of a speaker-normalized F0 value.
pub fn f0_to_bins(value: f64, q: &PitchQuantizer) -> Vec<f64> {
    q.one_hot(value)
}

/// Decodes an activation vector to Hz; 0 means unvoiced.
pub fn bins_to_f0(activation: &[f64], q: &PitchQuantizer, stats: &SpeakerPitchStats) -> Result<f64> {
    Ok(q.decode_normalized(activation)?
        .map_or(0.0, |z| stats.denormalize(z).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q8() -> PitchQuantizer {
        PitchQuantizer::new(8, -3.0, 3.0).unwrap()
    }

    #[test]
    fn centers_follow_formula() {
        let q = q8();
        assert_eq!(q.centers()[0], -2.625);
        assert_eq!(q.centers()[3], -0.375);
        assert!(q.centers().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn one_hot_examples() {
        let q = q8();
        assert_eq!(PitchQuantizer::argmax(&f0_to_bins(q.centers()[3], &q)), 3);
        assert_eq!(f0_to_bins(q.centers()[3], &q).iter().sum::<f64>(), 1.0);
        assert_eq!(q.bin_index(-100.0), 0);
        assert_eq!(q.bin_index(100.0), 7);
        // Edge between bins 3 and 4 belongs to the upper bin.
        assert_eq!(q.bin_index(0.0), 4);
        assert_eq!(q.bin_index(-3.0), 0);
        assert_eq!(q.bin_index(3.0), 7);
    }

    #[test]
    fn decode_examples() {
        let q = q8();
        let stats = SpeakerPitchStats::new("s", 180.0, 20.0, 1).unwrap();
        let hot = f0_to_bins(q.centers()[5], &q);
        assert_eq!(bins_to_f0(&hot, &q, &stats).unwrap(), stats.denormalize(q.centers()[5]));

        let mut pair = vec![0.0; 8];
        pair[2] = 0.5;
        pair[3] = 0.5;
        let mid = 0.5 * (q.centers()[2] + q.centers()[3]);
        let got = bins_to_f0(&pair, &q, &stats).unwrap();
        assert!((got - stats.denormalize(mid)).abs() < 1e-9);

        assert_eq!(bins_to_f0(&[0.05; 8], &q, &stats).unwrap(), 0.0);
        assert!(bins_to_f0(&[1.5; 8], &q, &stats).is_err());
        assert!(bins_to_f0(&[0.5; 7], &q, &stats).is_err());
    }

    #[test]
    fn too_few_bins() {
        assert!(PitchQuantizer::new(1, -3.0, 3.0).is_err());
        assert!(PitchQuantizer::new(4, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_bin(v in -3.0f64..3.0) {
            let q = PitchQuantizer::default();
            let z = q.decode_normalized(&q.one_hot(v)).unwrap().unwrap();
            prop_assert!((z - v).abs() <= q.bin_width() / 2.0 + 1e-12);
        }

        #[test]
        fn decoding_is_scale_invariant(
            acts in prop::collection::vec(0.2f64..0.5, 32),
            c in 1.0f64..2.0,
        ) {
            let q = PitchQuantizer::default();
            let scaled: Vec<f64> = acts.iter().map(|a| a * c).collect();
            let a = q.decode_normalized(&acts).unwrap().unwrap();
            let b = q.decode_normalized(&scaled).unwrap().unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
