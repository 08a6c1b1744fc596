use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::Prf;
use crate::error::{Error, Result};

const UNIT_TOLERANCE: f64 = 1e-6;

/// Tokens paired with unit-normalized contextual embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedTokens {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

impl EmbeddedTokens {
    /// Checks shape and that every vector has unit L2 norm (within 1e-6).
    pub fn new(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if tokens.len() != vectors.len() {
            return Err(Error::TokenVectorMismatch { tokens: tokens.len(), vectors: vectors.len() });
        }
        let dim = vectors.first().map_or(0, Vec::len);
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(dim, v.len()));
            }
            let n = norm(v);
            if libm::fabs(n - 1.0) > UNIT_TOLERANCE {
                return Err(Error::NotUnitNorm { index, norm: n });
            }
        }
        Ok(Self { tokens, vectors })
    }

    /// Scales every vector to unit length first; zero vectors are rejected.
    pub fn normalized(tokens: Vec<String>, mut vectors: Vec<Vec<f64>>) -> Result<Self> {
        for (index, v) in vectors.iter_mut().enumerate() {
            let n = norm(v);
            if n == 0.0 {
                return Err(Error::NotUnitNorm { index, norm: 0.0 });
            }
            v.iter_mut().for_each(|x| *x /= n);
        }
        Self::new(tokens, vectors)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Maps tokens to embeddings. Implementations may call out to a model
/// in-process or in another process.
pub trait Embedder {
    fn embed(&self, tokens: &[String]) -> Result<EmbeddedTokens>;
}

/// Greedy BERTScore: every token takes its best cosine counterpart on the other
/// side independently (no one-to-one constraint). Raw cosines, no rescaling.
pub fn bertscore_greedy(cand: &EmbeddedTokens, reference: &EmbeddedTokens) -> Result<Prf> {
    if cand.is_empty() || reference.is_empty() {
        return Err(Error::EmptyTokens);
    }
    if cand.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(cand.dim(), reference.dim()));
    }
    let mut col_max = vec![f64::NEG_INFINITY; reference.len()];
    let mut precision = 0.0;
    for c in &cand.vectors {
        let mut row_max = f64::NEG_INFINITY;
        for (j, r) in reference.vectors.iter().enumerate() {
            let cos: f64 = c.iter().zip(r).map(|(a, b)| a * b).sum();
            row_max = row_max.max(cos);
            col_max[j] = col_max[j].max(cos);
        }
        precision += row_max;
    }
    precision /= cand.len() as f64;
    let recall = col_max.iter().sum::<f64>() / reference.len() as f64;
    Ok(Prf::harmonic(precision, recall))
}

/// Deterministic model-free embedder: hashed character trigrams of each token
/// (with boundary markers) into a fixed number of dimensions. Identical tokens
/// get identical vectors, which is enough to exercise the matching end to end.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 64 }
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, tokens: &[String]) -> Result<EmbeddedTokens> {
        let vectors = tokens
            .iter()
            .map(|t| {
                let dim = self.dim.max(1);
                let mut v = vec![0.0; dim];
                let chars: Vec<char> = core::iter::once('^').chain(t.chars()).chain(core::iter::once('$')).collect();
                for w in chars.windows(3.min(chars.len())) {
                    // FNV-1a
                    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                    for c in w {
                        h ^= *c as u64;
                        h = h.wrapping_mul(0x0000_0100_0000_01b3);
                    }
                    v[(h % dim as u64) as usize] += 1.0;
                }
                v
            })
            .collect();
        EmbeddedTokens::normalized(tokens.to_vec(), vectors)
    }
}
