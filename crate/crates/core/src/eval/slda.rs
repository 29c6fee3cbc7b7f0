use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::stats::f_sf;
use crate::error::{Error, Result};

/// Diagonal ridge tried once when a scatter matrix is not positive definite.
pub const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SldaStep {
    pub feature: usize,
    /// Wilks' lambda of all features selected so far, this one included.
    pub wilks_lambda: f64,
    /// Partial F for adding this feature to the previous set.
    pub f_stat: f64,
    pub df: (usize, usize),
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SldaResult {
    /// Accepted steps in selection order.
    pub steps: Vec<SldaStep>,
    /// The best remaining candidate when selection stopped on the p-value
    /// rule; `None` when every feature was selected or no degrees of freedom
    /// were left.
    pub rejected: Option<SldaStep>,
}

impl SldaResult {
    pub fn selected(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }
}

/// Forward stepwise discriminant analysis with Wilks' lambda.
///
/// Each round evaluates every unselected feature `j` by
/// `Lambda(S + j) = det W / det T` over the within-class and total scatter of
/// the selected set plus `j`, and takes the smallest. The partial lambda
/// `Lambda(S + j) / Lambda(S)` becomes
/// `F = ((1 - l) / l) * ((n - g - q) / (g - 1))` on `(g - 1, n - g - q)`
/// degrees of freedom, `q = |S|`. The feature enters when its p-value is at
/// most `alpha`; otherwise selection stops.
pub fn forward_slda(x: &[Vec<f64>], labels: &[u32], alpha: f64) -> Result<SldaResult> {
    let n = x.len();
    if labels.len() != n {
        return Err(Error::UnalignedStreams {
            left: n,
            right: labels.len(),
        });
    }
    let p = x.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::InsufficientData("SLDA needs at least one feature".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: row.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("SLDA features must be finite"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha must lie in [0, 1]"));
    }
    let mut class_of: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        let next = class_of.len();
        class_of.entry(l).or_insert(next);
    }
    let g = class_of.len();
    if g < 2 {
        return Err(Error::InsufficientData("SLDA needs at least two classes".into()));
    }
    if n <= g {
        return Err(Error::InsufficientData(format!(
            "{n} samples cannot separate {g} classes"
        )));
    }
    let class: Vec<usize> = labels.iter().map(|l| class_of[l]).collect();
    let (within, total) = scatter(x, &class, g, p);

    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut lambda_prev = 1.0;
    loop {
        let q = selected.len();
        if q == p || n <= g + q {
            return Ok(SldaResult { steps, rejected: None });
        }
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|j| !selected.contains(j)) {
            let mut idx = selected.clone();
            idx.push(j);
            let lambda = wilks_lambda(&within, &total, &idx)?;
            if best.is_none_or(|(_, b)| lambda < b) {
                best = Some((j, lambda));
            }
        }
        let (feature, lambda) = best.expect("at least one candidate");
        let partial = (lambda / lambda_prev).min(1.0);
        let df = (g - 1, n - g - q);
        let f_stat = ((1.0 - partial) / partial) * (df.1 as f64 / df.0 as f64);
        let step = SldaStep {
            feature,
            wilks_lambda: lambda,
            f_stat,
            df,
            p_value: f_sf(f_stat, df.0 as f64, df.1 as f64),
        };
        if step.p_value > alpha {
            return Ok(SldaResult {
                steps,
                rejected: Some(step),
            });
        }
        selected.push(feature);
        lambda_prev = lambda;
        steps.push(step);
    }
}

/// Wilks' lambda of a feature subset given full scatter matrices.
pub fn wilks_lambda(within: &DMatrix<f64>, total: &DMatrix<f64>, subset: &[usize]) -> Result<f64> {
    let w = within.select_rows(subset).select_columns(subset);
    let t = total.select_rows(subset).select_columns(subset);
    let (lw, lt) = match (ln_det(&w), ln_det(&t)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let ridge = DMatrix::identity(subset.len(), subset.len()) * RIDGE;
            match (ln_det(&(w + &ridge)), ln_det(&(t + &ridge))) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::DegenerateDesign(format!(
                        "scatter of features {subset:?} is singular even with a {RIDGE:e} ridge"
                    )))
                }
            }
        }
    };
    Ok((lw - lt).exp().min(1.0))
}

fn ln_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let ld: f64 = (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    ld.is_finite().then_some(ld)
}

/// Within-class and total scatter (sums of centred cross-products).
pub fn scatter(x: &[Vec<f64>], class: &[usize], g: usize, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = x.len();
    let mut grand = vec![0.0; p];
    let mut means = vec![vec![0.0; p]; g];
    let mut counts = vec![0usize; g];
    for (row, &c) in x.iter().zip(class) {
        counts[c] += 1;
        for k in 0..p {
            grand[k] += row[k];
            means[c][k] += row[k];
        }
    }
    grand.iter_mut().for_each(|v| *v /= n as f64);
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c as f64);
    }
    let mut within = DMatrix::zeros(p, p);
    let mut total = DMatrix::zeros(p, p);
    for (row, &c) in x.iter().zip(class) {
        for a in 0..p {
            let (wa, ta) = (row[a] - means[c][a], row[a] - grand[a]);
            for b in 0..p {
                within[(a, b)] += wa * (row[b] - means[c][b]);
                total[(a, b)] += ta * (row[b] - grand[b]);
            }
        }
    }
    (within, total)
}
