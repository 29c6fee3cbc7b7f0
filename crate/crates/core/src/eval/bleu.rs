use std::collections::HashMap;

use crate::error::{Error, Result};

/// Splits a line into tokens.
///
/// Every character that is neither alphanumeric nor whitespace becomes a token
/// of its own, then the line is split on whitespace. With `lowercase` the line
/// is lowercased first, so `"Hello, World!"` gives `hello , world !`.
pub fn tokenize(line: &str, lowercase: bool) -> Vec<String> {
    let line = if lowercase {
        line.to_lowercase()
    } else {
        line.to_string()
    };
    let mut spaced = String::with_capacity(line.len() + 8);
    for c in line.chars() {
        if c.is_alphanumeric() || c.is_whitespace() {
            spaced.push(c);
        } else {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

/// Parallel hypothesis and reference token sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    hypotheses: Vec<Vec<String>>,
    references: Vec<Vec<String>>,
}

impl TokenizedCorpus {
    pub fn new(hypotheses: Vec<Vec<String>>, references: Vec<Vec<String>>) -> Result<Self> {
        if hypotheses.len() != references.len() {
            return Err(Error::UnalignedStreams {
                left: hypotheses.len(),
                right: references.len(),
            });
        }
        if hypotheses.iter().chain(&references).flatten().any(|t| t.is_empty()) {
            return Err(Error::invalid("tokens must be non-empty"));
        }
        Ok(Self { hypotheses, references })
    }

    /// Tokenizes parallel lines with [`tokenize`].
    pub fn from_lines<'a>(
        hypotheses: impl IntoIterator<Item = &'a str>,
        references: impl IntoIterator<Item = &'a str>,
        lowercase: bool,
    ) -> Result<Self> {
        Self::new(
            hypotheses.into_iter().map(|l| tokenize(l, lowercase)).collect(),
            references.into_iter().map(|l| tokenize(l, lowercase)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (&[String], &[String])> {
        self.hypotheses
            .iter()
            .zip(&self.references)
            .map(|(h, r)| (h.as_slice(), r.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// In `[0, 100]`.
    pub score: f64,
    /// Clipped n-gram matches for n = 1..=max_n, summed over the corpus.
    pub matches: Vec<u64>,
    /// Hypothesis n-gram counts for n = 1..=max_n.
    pub totals: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuScore {
    /// Modified n-gram precision for `n` (1-based); zero when the hypothesis
    /// side has no n-grams of that order.
    pub fn precision(&self, n: usize) -> f64 {
        match self.totals[n - 1] {
            0 => 0.0,
            t => self.matches[n - 1] as f64 / t as f64,
        }
    }
}

/// Corpus BLEU with a single reference per segment.
///
/// Clipped n-gram counts and lengths are summed over all segments before any
/// ratio is taken. The score is `100 * BP * exp(mean_n ln p_n)` with
/// `BP = exp(min(0, 1 - ref_len / hyp_len))`; any zero precision, or an empty
/// hypothesis side, gives 0.
pub fn bleu(corpus: &TokenizedCorpus, max_n: usize) -> Result<BleuScore> {
    if corpus.is_empty() {
        return Err(Error::InsufficientData("BLEU needs at least one segment".into()));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n must be positive"));
    }
    let mut matches = vec![0u64; max_n];
    let mut totals = vec![0u64; max_n];
    let (mut hyp_len, mut ref_len) = (0u64, 0u64);
    for (hyp, reference) in corpus.segments() {
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=max_n {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                totals[n - 1] += count;
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp()
    };
    let mut out = BleuScore {
        score: 0.0,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    };
    if (1..=max_n).all(|n| out.precision(n) > 0.0) && brevity_penalty > 0.0 {
        let log_mean = (1..=max_n).map(|n| out.precision(n).ln()).sum::<f64>() / max_n as f64;
        out.score = 100.0 * brevity_penalty * log_mean.exp();
    }
    Ok(out)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(h: &[&str], r: &[&str]) -> TokenizedCorpus {
        TokenizedCorpus::from_lines(h.iter().copied(), r.iter().copied(), false).unwrap()
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Hello, World!", true), ["hello", ",", "world", "!"]);
        assert_eq!(tokenize("  a\tb  ", false), ["a", "b"]);
        assert_eq!(tokenize("It's", false), ["It", "'", "s"]);
    }

    #[test]
    fn identical_is_100() {
        let c = corpus(
            &["the cat sat on the mat", "a b c d e"],
            &["the cat sat on the mat", "a b c d e"],
        );
        let s = bleu(&c, 4).unwrap();
        assert!((s.score - 100.0).abs() < 1e-12);
        assert_eq!(s.brevity_penalty, 1.0);
    }

    #[test]
    fn clipping() {
        let s = bleu(&corpus(&["the the the the"], &["the cat"]), 1).unwrap();
        assert_eq!((s.matches[0], s.totals[0]), (1, 4));
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        let s = bleu(&corpus(&[""], &["a b c d"]), 4).unwrap();
        assert_eq!(s.score, 0.0);
        assert_eq!(s.hyp_len, 0);
    }

    #[test]
    fn short_hypothesis_is_penalized() {
        let s = bleu(&corpus(&["a b c d"], &["a b c d e f g h"]), 4).unwrap();
        assert!((s.brevity_penalty - (-1.0f64).exp()).abs() < 1e-15);
        assert!((s.score - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rejects_empty_and_unaligned() {
        assert!(bleu(&corpus(&[], &[]), 4).is_err());
        assert!(TokenizedCorpus::from_lines(["a"], ["a", "b"], false).is_err());
    }
}
