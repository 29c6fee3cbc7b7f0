//! Text formats for units, reduced units, and codebooks.
//!
//! * unit file: one utterance per line, space-separated decimal unit ids.
//! * reduced file: one utterance per line, space-separated `unit:duration` tokens.
//! * codebook: a `K D` header line followed by K lines of D reals.

use std::fmt::Write as _;

use super::{Codebook, ReducedUnitSequence, UnitSequence};
use crate::error::{Error, Result};

pub fn write_unit_file<'a>(utterances: impl IntoIterator<Item = &'a UnitSequence>) -> String {
    let mut out = String::new();
    for seq in utterances {
        push_joined(&mut out, seq.units.iter());
        out.push('\n');
    }
    out
}

pub fn parse_unit_file(text: &str, frame_period: f64) -> Result<Vec<UnitSequence>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let units = line
                .split_whitespace()
                .map(|tok| parse_u32(tok, "unit file", i + 1))
                .collect::<Result<Vec<_>>>()?;
            Ok(UnitSequence::new(units, frame_period))
        })
        .collect()
}

pub fn write_reduced_file<'a>(utterances: impl IntoIterator<Item = &'a ReducedUnitSequence>) -> String {
    let mut out = String::new();
    for seq in utterances {
        for (i, (u, d)) in seq.units().iter().zip(seq.durations()).enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{u}:{d}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_reduced_file(text: &str) -> Result<Vec<ReducedUnitSequence>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 1;
            let mut units = Vec::new();
            let mut durations = Vec::new();
            for tok in line.split_whitespace() {
                let (u, d) = tok.split_once(':').ok_or_else(|| Error::Parse {
                    what: "reduced file",
                    line: line_no,
                    message: format!("expected unit:duration, got {tok:?}"),
                })?;
                units.push(parse_u32(u, "reduced file", line_no)?);
                durations.push(parse_u32(d, "reduced file", line_no)?);
            }
            ReducedUnitSequence::new(units, durations).map_err(|e| Error::Parse {
                what: "reduced file",
                line: line_no,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reals are written with Rust's shortest round-trip formatting, so parsing the
/// output reproduces every centroid bit for bit.
pub fn write_codebook(book: &Codebook) -> String {
    let mut out = format!("{} {}\n", book.k(), book.dim());
    for c in book.centroids() {
        push_joined(&mut out, c.iter());
        out.push('\n');
    }
    out
}

pub fn parse_codebook(text: &str) -> Result<Codebook> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Parse {
            what: "codebook",
            line: 1,
            message: e.to_string(),
        })?;
    let [k, d] = dims[..] else {
        return Err(Error::Parse {
            what: "codebook",
            line: 1,
            message: "header must be \"K D\"".into(),
        });
    };
    let mut flat = Vec::with_capacity(k * d);
    let mut rows = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    what: "codebook",
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != d {
            return Err(Error::Parse {
                what: "codebook",
                line: i + 1,
                message: format!("expected {d} values, found {}", row.len()),
            });
        }
        flat.extend(row);
        rows += 1;
    }
    if rows != k {
        return Err(Error::Format {
            what: "codebook",
            message: format!("header declares {k} centroids, found {rows}"),
        });
    }
    Codebook::from_flat(flat, d)
}

fn push_joined<T: std::fmt::Display>(out: &mut String, items: impl Iterator<Item = T>) {
    for (i, v) in items.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
}

fn parse_u32(tok: &str, what: &'static str, line: usize) -> Result<u32> {
    tok.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
        what,
        line,
        message: format!("{tok:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_file_round_trip_keeps_empty_lines() {
        let seqs = vec![
            UnitSequence::new(vec![0, 0, 1], 0.02),
            UnitSequence::new(vec![], 0.02),
            UnitSequence::new(vec![999], 0.02),
        ];
        let text = write_unit_file(&seqs);
        assert_eq!(text, "0 0 1\n\n999\n");
        assert_eq!(parse_unit_file(&text, 0.02).unwrap(), seqs);
    }

    #[test]
    fn reduced_file_format() {
        let r = ReducedUnitSequence::new(vec![0, 1, 2], vec![2, 3, 1]).unwrap();
        let text = write_reduced_file([&r]);
        assert_eq!(text, "0:2 1:3 2:1\n");
        assert_eq!(parse_reduced_file(&text).unwrap(), vec![r]);
    }

    #[test]
    fn reduced_file_rejects_zero_duration() {
        let err = parse_reduced_file("1:2\n3:0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_reduced_file("1-2").is_err());
    }

    #[test]
    fn codebook_round_trip_is_exact() {
        let book = Codebook::new(vec![vec![0.1, -1.0 / 3.0], vec![1e-300, 12345.678]]).unwrap();
        let text = write_codebook(&book);
        assert!(text.starts_with("2 2\n"));
        assert_eq!(parse_codebook(&text).unwrap(), book);
    }

    #[test]
    fn codebook_header_mismatch() {
        assert!(parse_codebook("3 1\n0\n1\n").is_err());
        assert!(parse_codebook("2\n0\n1\n").is_err());
        assert!(parse_codebook("2 2\n0 1\n1\n").is_err());
    }
}
