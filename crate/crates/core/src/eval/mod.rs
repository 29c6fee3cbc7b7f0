//! Evaluation: corpus BLEU, acoustic expressivity features and the
//! statistics used to compare systems.

mod bleu;
mod features;
mod report;
mod slda;
mod stats;

pub use bleu::{bleu, tokenize, BleuScore, TokenizedCorpus};
pub use features::{extract_features, LPC_ORDER, SILENCE_RMS};
pub use report::{
    expressivity_report, parse_feature_table, parse_labelled_table, write_feature_table, LabelledTable, SystemFeatures,
};
pub use slda::{forward_slda, scatter, wilks_lambda, SldaResult, SldaStep, RIDGE};
pub use stats::{
    anova_oneway, f_sf, pairwise_comparisons, pearson, t_two_sided, AnovaResult, PairwiseComparison, PearsonResult,
};

use crate::error::{Error, Result};

pub const FEATURE_NAMES: [&str; 6] = [
    "slopeUV_500_1500_mean",
    "slopeV_0_500_mean",
    "f0_semitone_risingslope_std",
    "f1_bandwidth_mean",
    "h1_h2_mean",
    "mfcc4_voiced_stdnorm",
];

/// Scales below this are raised to it before dividing.
pub const SCALE_FLOOR: f64 = 1e-8;

/// The six utterance-level features, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; 6]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; 6] {
        &self.0
    }
}

/// `sqrt(sum(((a_i - b_i) / scale_i)^2))` with each scale floored at
/// [`SCALE_FLOOR`].
pub fn standardized_euclidean(a: &FeatureVector, b: &FeatureVector, scale: &[f64; 6]) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .zip(scale)
        .map(|((x, y), s)| ((x - y) / s.max(SCALE_FLOOR)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Per-feature sample standard deviation (n - 1 denominator) over a pool,
/// floored at [`SCALE_FLOOR`].
pub fn feature_scale(pool: &[FeatureVector]) -> Result<[f64; 6]> {
    if pool.len() < 2 {
        return Err(Error::InsufficientData(
            "feature scale needs at least two vectors".into(),
        ));
    }
    let n = pool.len() as f64;
    let mut out = [0.0; 6];
    for (k, o) in out.iter_mut().enumerate() {
        let m = pool.iter().map(|v| v.0[k]).sum::<f64>() / n;
        let var = pool.iter().map(|v| (v.0[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
        *o = var.sqrt().max(SCALE_FLOOR);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_cases() {
        let ones = [1.0; 6];
        let a = FeatureVector([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(standardized_euclidean(&a, &a, &ones), 0.0);
        let mut b = a;
        b.0[3] += 1.0;
        assert_eq!(standardized_euclidean(&a, &b, &ones), 1.0);
        let z = FeatureVector([0.0; 6]);
        let c = FeatureVector([1.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(standardized_euclidean(&c, &z, &ones), 3.0);
        assert_eq!(standardized_euclidean(&z, &c, &ones), 3.0);
    }

    #[test]
    fn zero_scale_is_floored() {
        let a = FeatureVector([0.0; 6]);
        let mut b = a;
        b.0[0] = 1e-8;
        assert!((standardized_euclidean(&a, &b, &[0.0; 6]) - 1.0).abs() < 1e-12);
        let s = feature_scale(&[a, a]).unwrap();
        assert_eq!(s, [SCALE_FLOOR; 6]);
    }
}
