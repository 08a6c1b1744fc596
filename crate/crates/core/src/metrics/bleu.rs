use alloc::string::String;
use alloc::vec::Vec;

use super::rouge::clipped_overlap;
use super::tokenize;
use crate::error::{Error, Result};

/// Single-reference corpus BLEU without smoothing.
///
/// The n-gram order is clamped to the shortest non-empty candidate, so short
/// outputs are not zeroed by orders they cannot contain. Empty candidates
/// still count toward the brevity penalty.
pub fn bleu_tokens(candidates: &[Vec<String>], references: &[Vec<String>], max_n: usize) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(Error::LengthMismatch { predictions: candidates.len(), references: references.len() });
    }
    let shortest = match candidates.iter().map(Vec::len).filter(|&l| l > 0).min() {
        Some(l) => l,
        None => return Ok(0.0),
    };
    let order = max_n.min(shortest);
    if order == 0 {
        return Ok(0.0);
    }

    let mut log_sum = 0.0;
    for n in 1..=order {
        let (mut matched, mut total) = (0usize, 0usize);
        for (c, r) in candidates.iter().zip(references) {
            let (overlap, nc, _) = clipped_overlap(c, r, n);
            matched += overlap;
            total += nc;
        }
        if matched == 0 {
            return Ok(0.0);
        }
        log_sum += libm::log(matched as f64 / total as f64);
    }

    let c: usize = candidates.iter().map(Vec::len).sum();
    let r: usize = references.iter().map(Vec::len).sum();
    let brevity = if c < r { libm::exp(1.0 - r as f64 / c as f64) } else { 1.0 };
    Ok(brevity * libm::exp(log_sum / order as f64))
}

pub fn bleu<S: AsRef<str>, R: AsRef<str>>(candidates: &[S], references: &[R], max_n: usize) -> Result<f64> {
    let c: Vec<Vec<String>> = candidates.iter().map(|s| tokenize(s.as_ref())).collect();
    let r: Vec<Vec<String>> = references.iter().map(|s| tokenize(s.as_ref())).collect();
    bleu_tokens(&c, &r, max_n)
}
