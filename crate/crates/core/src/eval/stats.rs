use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Upper tail `P(F > f)` of an F distribution with `(d1, d2)` degrees of
/// freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided `P(|T| > |t|)` for Student's t with `nu` degrees of freedom.
pub fn t_two_sided(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(nu / 2.0, 0.5, nu / (nu + t * t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_between: f64,
    pub ms_within: f64,
}

/// One-way ANOVA across `groups`.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData("ANOVA needs at least two groups".into()));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::InsufficientData(format!("group {i} has fewer than two samples")));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("ANOVA samples must be finite"));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let (df_between, df_within) = (k - 1, n - k);
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;

    // Relative to the data scale, so shifting or scaling the samples does not
    // change which branch is taken.
    let scale = groups.iter().flatten().map(|v| (v - grand).powi(2)).sum::<f64>();
    let tiny = 1e-24 * scale.max(f64::MIN_POSITIVE);
    let (f, p) = if ss_between <= tiny {
        (0.0, 1.0)
    } else if ss_within <= tiny {
        return Err(Error::DegenerateGroups(
            "zero within-group variance with unequal means".into(),
        ));
    } else {
        let f = ms_between / ms_within;
        (f, f_sf(f, df_between as f64, df_within as f64))
    };
    Ok(AnovaResult {
        f,
        p,
        df_between,
        df_within,
        ms_between,
        ms_within,
    })
}

/// Difference of two group means tested against the pooled ANOVA error term.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseComparison {
    pub first: usize,
    pub second: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub p: f64,
    /// Bonferroni-adjusted over all pairs.
    pub p_adjusted: f64,
}

/// All pairwise mean comparisons after a one-way ANOVA, using the pooled
/// within-group mean square and its degrees of freedom.
pub fn pairwise_comparisons(groups: &[Vec<f64>]) -> Result<Vec<PairwiseComparison>> {
    let anova = anova_oneway(groups)?;
    let pairs = groups.len() * (groups.len() - 1) / 2;
    let mut out = Vec::with_capacity(pairs);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let diff = mean(&groups[i]) - mean(&groups[j]);
            let se = (anova.ms_within * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64)).sqrt();
            let (t, p) = if se > 0.0 {
                let t = diff / se;
                (t, t_two_sided(t, anova.df_within as f64))
            } else {
                (0.0, 1.0)
            };
            out.push(PairwiseComparison {
                first: i,
                second: j,
                mean_difference: diff,
                t,
                p,
                p_adjusted: (p * pairs as f64).min(1.0),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PearsonResult {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

/// Sample correlation with a two-sided p-value from
/// `t = rho sqrt((n - 2) / (1 - rho^2))` on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(Error::UnalignedStreams {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(
            "Pearson correlation needs at least three pairs".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation inputs must be finite"));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let nu = (x.len() - 2) as f64;
    let p = if rho.abs() == 1.0 {
        0.0
    } else {
        t_two_sided(rho * (nu / (1.0 - rho * rho)).sqrt(), nu)
    };
    Ok(PearsonResult { rho, p, n: x.len() })
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anova_textbook_case() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.f - 13.5).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        // F(1, 4) = 13.5 is t(4)^2 with t = sqrt(13.5).
        assert!((r.p - t_two_sided(13.5f64.sqrt(), 4.0)).abs() < 1e-14);
    }

    #[test]
    fn anova_identical_groups() {
        let r = anova_oneway(&[vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 4.0]]).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
    }

    #[test]
    fn anova_degenerate() {
        let err = anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap_err();
        assert!(err.to_string().contains("degenerate groups"));
        assert!(anova_oneway(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap().f == 0.0);
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn anova_shift_and_scale_invariant() {
        let g = vec![vec![0.3, 1.9, 2.2, 0.1], vec![2.5, 3.1, 4.0], vec![1.0, 1.1, 0.7]];
        let base = anova_oneway(&g).unwrap().f;
        let moved: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| 7.5 * x - 120.0).collect()).collect();
        assert!((anova_oneway(&moved).unwrap().f - base).abs() < 1e-9 * base);
    }

    #[test]
    fn pairwise_with_two_groups_matches_anova() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let pw = pairwise_comparisons(&g).unwrap();
        assert_eq!(pw.len(), 1);
        assert!((pw[0].t.powi(2) - 13.5).abs() < 1e-12);
        assert!((pw[0].p - anova_oneway(&g).unwrap().p).abs() < 1e-12);
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap().rho - 0.8).abs() < 1e-12);
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_eq!(pearson(&x, &up).unwrap().rho, 1.0);
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &down).unwrap().rho, -1.0);
        let err = pearson(&x, &[2.0; 4]).unwrap_err();
        assert!(err.to_string().contains("zero variance"));
        assert!(pearson(&x[..2], &x[..2]).is_err());
    }

    #[test]
    fn tails_at_known_points() {
        // t(1) is Cauchy: P(|T| > 1) = 1/2.
        assert!((t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-12);
        // F(2, d2) has a closed-form tail (1 + 2f/d2)^(-d2/2).
        for (f, d2) in [(0.5f64, 3.0f64), (3.0, 10.0), (10.0, 7.0)] {
            let exact = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
            assert!((f_sf(f, 2.0, d2) - exact).abs() < 1e-12, "{f} {d2}");
        }
        assert_eq!(f_sf(0.0, 3.0, 4.0), 1.0);
    }
}
