//! Feature tables and the plain-text expressivity report.
//!
//! A feature table is CSV with the header `utterance_id` followed by the six
//! feature names. A labelled table adds a `label` column after the id and may
//! carry any set of numeric feature columns.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{
    anova_oneway, feature_scale, pairwise_comparisons, pearson, standardized_euclidean, FeatureVector, FEATURE_NAMES,
};
use crate::error::{Error, Result};

pub fn write_feature_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a FeatureVector)>) -> String {
    let mut out = format!("utterance_id,{}\n", FEATURE_NAMES.join(","));
    for (id, v) in rows {
        out.push_str(id);
        for x in v.values() {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        what: "feature table",
        line,
        message: message.into(),
    }
}

fn parse_row(line: &str, lineno: usize, skip: usize) -> Result<(Vec<String>, Vec<f64>)> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() <= skip {
        return Err(parse_err(lineno, "too few columns"));
    }
    let keys = fields[..skip].iter().map(|s| s.to_string()).collect();
    let values = fields[skip..]
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("not a finite number: {f:?}")))
        })
        .collect::<Result<_>>()?;
    Ok((keys, values))
}

pub fn parse_feature_table(text: &str) -> Result<Vec<(String, FeatureVector)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let expected = format!("utterance_id,{}", FEATURE_NAMES.join(","));
    if header.trim().replace(' ', "") != expected {
        return Err(parse_err(1, format!("header must be {expected:?}")));
    }
    lines
        .map(|(i, line)| {
            let (keys, values) = parse_row(line, i + 1, 1)?;
            let arr: [f64; 6] = values
                .try_into()
                .map_err(|v: Vec<f64>| parse_err(i + 1, format!("expected 6 features, found {}", v.len())))?;
            Ok((keys[0].clone(), FeatureVector(arr)))
        })
        .collect()
}

/// A table of `utterance_id,label,feature...` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledTable {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_labelled_table(text: &str) -> Result<LabelledTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "utterance_id" || cols[1] != "label" {
        return Err(parse_err(
            1,
            "header must start with utterance_id,label and name at least one feature",
        ));
    }
    let mut table = LabelledTable {
        feature_names: cols[2..].iter().map(|s| s.to_string()).collect(),
        ids: Vec::new(),
        labels: Vec::new(),
        rows: Vec::new(),
    };
    for (i, line) in lines {
        let (keys, values) = parse_row(line, i + 1, 2)?;
        if values.len() != table.feature_names.len() {
            return Err(parse_err(
                i + 1,
                format!(
                    "expected {} features, found {}",
                    table.feature_names.len(),
                    values.len()
                ),
            ));
        }
        table.ids.push(keys[0].clone());
        table.labels.push(keys[1].clone());
        table.rows.push(values);
    }
    Ok(table)
}

/// Features of one synthesis system, keyed by utterance id.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFeatures {
    pub name: String,
    pub rows: Vec<(String, FeatureVector)>,
}

/// Distances from each system's outputs to the reference recordings, compared
/// across systems and optionally correlated with listener scores.
///
/// Feature scales come from the pooled reference and system vectors. `scores`
/// holds `(system, utterance_id, score)` triples; every triple must name a
/// scored utterance. All numbers are printed with six decimals.
pub fn expressivity_report(
    reference: &[(String, FeatureVector)],
    systems: &[SystemFeatures],
    scores: Option<&[(String, String, f64)]>,
) -> Result<String> {
    if systems.is_empty() {
        return Err(Error::InsufficientData("report needs at least one system".into()));
    }
    let refs: HashMap<&str, &FeatureVector> = reference.iter().map(|(id, v)| (id.as_str(), v)).collect();
    let pool: Vec<FeatureVector> = reference
        .iter()
        .map(|r| r.1)
        .chain(systems.iter().flat_map(|s| s.rows.iter().map(|r| r.1)))
        .collect();
    let scale = feature_scale(&pool)?;

    let mut distances: Vec<Vec<f64>> = Vec::new();
    let mut by_key: HashMap<(&str, &str), f64> = HashMap::new();
    for sys in systems {
        let mut d = Vec::with_capacity(sys.rows.len());
        for (id, v) in &sys.rows {
            let r = refs
                .get(id.as_str())
                .ok_or_else(|| Error::invalid(format!("system {} has no reference for {id}", sys.name)))?;
            let dist = standardized_euclidean(v, r, &scale);
            by_key.insert((sys.name.as_str(), id.as_str()), dist);
            d.push(dist);
        }
        distances.push(d);
    }

    let mut out = String::from("expressivity distance report\n");
    let _ = writeln!(
        out,
        "scale {}",
        scale.iter().map(|s| format!("{s:.6}")).collect::<Vec<_>>().join(" ")
    );
    for (sys, d) in systems.iter().zip(&distances) {
        let (mean, sd) = mean_sd(d);
        let _ = writeln!(
            out,
            "system {} n={} mean_distance={mean:.6} sd={sd:.6}",
            sys.name,
            d.len()
        );
    }
    if systems.len() >= 2 {
        let a = anova_oneway(&distances)?;
        let _ = writeln!(
            out,
            "anova F={:.6} df=({}, {}) p={:.6}",
            a.f, a.df_between, a.df_within, a.p
        );
        for pw in pairwise_comparisons(&distances)? {
            let _ = writeln!(
                out,
                "pair {} vs {} diff={:.6} t={:.6} p={:.6} p_bonferroni={:.6}",
                systems[pw.first].name, systems[pw.second].name, pw.mean_difference, pw.t, pw.p, pw.p_adjusted
            );
        }
    } else {
        out.push_str("anova skipped: fewer than two systems\n");
    }
    if let Some(scores) = scores {
        let mut xs = Vec::with_capacity(scores.len());
        let mut ys = Vec::with_capacity(scores.len());
        for (sys, id, score) in scores {
            let d = by_key
                .get(&(sys.as_str(), id.as_str()))
                .ok_or_else(|| Error::invalid(format!("score for unknown pair {sys}/{id}")))?;
            xs.push(*score);
            ys.push(*d);
        }
        let p = pearson(&xs, &ys)?;
        let _ = writeln!(out, "pearson score~distance rho={:.6} p={:.6} n={}", p.rho, p.p, p.n);
    }
    Ok(out)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(x: f64) -> FeatureVector {
        FeatureVector([x, 2.0 * x, 0.5, x * x, 1.0 - x, 3.0])
    }

    #[test]
    fn feature_table_round_trip() {
        let rows = vec![("u1".to_string(), fv(0.25)), ("u2".to_string(), fv(-1.5))];
        let text = write_feature_table(rows.iter().map(|(i, v)| (i.as_str(), v)));
        assert!(text.starts_with("utterance_id,slopeUV_500_1500_mean,"));
        assert_eq!(parse_feature_table(&text).unwrap(), rows);
    }

    #[test]
    fn feature_table_errors_name_the_line() {
        let text = format!("utterance_id,{}\nu1,1,2,3,4,5\n", FEATURE_NAMES.join(","));
        let err = parse_feature_table(&text).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_feature_table("id,a\n").is_err());
    }

    #[test]
    fn labelled_table() {
        let t = parse_labelled_table("utterance_id,label,a,b\nx,happy,1,2\ny,sad,3,4.5\n").unwrap();
        assert_eq!(t.feature_names, ["a", "b"]);
        assert_eq!(t.labels, ["happy", "sad"]);
        assert_eq!(t.rows[1], [3.0, 4.5]);
        assert!(parse_labelled_table("utterance_id,label,a\nx,happy,nan\n").is_err());
    }

    #[test]
    fn report_lines() {
        let reference: Vec<(String, FeatureVector)> = (0..4).map(|i| (format!("u{i}"), fv(i as f64))).collect();
        let near = SystemFeatures {
            name: "near".into(),
            rows: (0..4)
                .map(|i| (format!("u{i}"), fv(i as f64 + 0.1 * (i % 2) as f64 + 0.05)))
                .collect(),
        };
        let far = SystemFeatures {
            name: "far".into(),
            rows: (0..4)
                .map(|i| (format!("u{i}"), fv(i as f64 + 1.0 + 0.1 * (i % 3) as f64)))
                .collect(),
        };
        let scores: Vec<(String, String, f64)> = (0..4)
            .flat_map(|i| {
                [
                    ("near".into(), format!("u{i}"), 4.0 + 0.1 * i as f64),
                    ("far".into(), format!("u{i}"), 2.0 - 0.2 * i as f64),
                ]
            })
            .collect();
        let text = expressivity_report(&reference, &[near, far], Some(&scores)).unwrap();
        assert!(text.contains("system near n=4"));
        assert!(text.contains("anova F="));
        assert!(text.contains("pair near vs far"));
        assert!(text.contains("pearson score~distance rho=-"), "{text}");
        let again = expressivity_report(&reference, &[], None);
        assert!(again.is_err());
    }
}
