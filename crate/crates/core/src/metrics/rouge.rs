use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;

use super::{tokenize, Prf};
use crate::error::{Error, Result};

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap plus candidate and reference n-gram totals.
pub(crate) fn clipped_overlap(cand: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let overlap = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    (overlap, cand.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

pub fn rouge_n_tokens(cand: &[String], reference: &[String], n: usize) -> Prf {
    if n == 0 || cand.len() < n || reference.len() < n {
        return Prf::ZERO;
    }
    let (overlap, nc, nr) = clipped_overlap(cand, reference, n);
    Prf::harmonic(overlap as f64 / nc as f64, overlap as f64 / nr as f64)
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<Prf> {
    if n == 0 {
        return Err(Error::InvalidNGramOrder);
    }
    Ok(rouge_n_tokens(&tokenize(candidate), &tokenize(reference), n))
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Sentence-level ROUGE-L.
pub fn rouge_l_tokens(cand: &[String], reference: &[String]) -> Prf {
    if cand.is_empty() || reference.is_empty() {
        return Prf::ZERO;
    }
    let lcs = lcs_len(cand, reference) as f64;
    Prf::harmonic(lcs / cand.len() as f64, lcs / reference.len() as f64)
}

pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}
