//! Summary scoring: ROUGE-1/2/L, corpus BLEU, METEOR (exact-match stage) and
//! greedy BERTScore matching over externally supplied token embeddings.
//!
//! Count-based metrics share one tokenization: lowercase, split on whitespace,
//! no stemming.

mod bertscore;
mod bleu;
mod meteor;
mod rouge;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bertscore::{bertscore_greedy, EmbeddedTokens, Embedder, HashingEmbedder};
pub use bleu::{bleu, bleu_tokens};
pub use meteor::{meteor, meteor_alignment, meteor_tokens, Alignment};
pub use rouge::{rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens};

use crate::error::{Error, Result};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf { precision: 0.0, recall: 0.0, f_score: 0.0 };

    /// F1 of `precision` and `recall`; zero when they sum to zero. Raw
    /// cosine-based scores may be negative and are passed through unclamped.
    pub fn harmonic(precision: f64, recall: f64) -> Self {
        let f_score = if precision + recall != 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f_score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `None` when no embedding provider was supplied.
    pub bertscore_f: Option<f64>,
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
}

impl MetricReport {
    pub fn get(&self, field: MetricField) -> Option<f64> {
        match field {
            MetricField::BertScore => self.bertscore_f,
            MetricField::Bleu => Some(self.bleu),
            MetricField::Meteor => Some(self.meteor),
            MetricField::Rouge1 => Some(self.rouge1_f),
            MetricField::Rouge2 => Some(self.rouge2_f),
            MetricField::RougeL => Some(self.rouge_l_f),
        }
    }

    fn clamped(mut self) -> Self {
        let c = |v: f64| v.clamp(0.0, 1.0);
        self.bertscore_f = self.bertscore_f.map(c);
        self.bleu = c(self.bleu);
        self.meteor = c(self.meteor);
        self.rouge1_f = c(self.rouge1_f);
        self.rouge2_f = c(self.rouge2_f);
        self.rouge_l_f = c(self.rouge_l_f);
        self
    }
}

/// Column of a [`MetricReport`], in the order result tables list them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricField {
    #[serde(rename = "bertscore")]
    BertScore,
    Bleu,
    Meteor,
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
}

impl MetricField {
    pub const ALL: [MetricField; 6] = [
        MetricField::BertScore,
        MetricField::Bleu,
        MetricField::Meteor,
        MetricField::Rouge1,
        MetricField::Rouge2,
        MetricField::RougeL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricField::BertScore => "bertscore",
            MetricField::Bleu => "bleu",
            MetricField::Meteor => "meteor",
            MetricField::Rouge1 => "rouge1",
            MetricField::Rouge2 => "rouge2",
            MetricField::RougeL => "rougeL",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            MetricField::BertScore => "BERTScore",
            MetricField::Bleu => "BLEU",
            MetricField::Meteor => "METEOR",
            MetricField::Rouge1 => "ROUGE-1",
            MetricField::Rouge2 => "ROUGE-2",
            MetricField::RougeL => "ROUGE-L",
        }
    }
}

impl fmt::Display for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricField {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "bertscore" | "bertscoref" => Ok(MetricField::BertScore),
            "bleu" => Ok(MetricField::Bleu),
            "meteor" => Ok(MetricField::Meteor),
            "rouge1" | "rouge1f" => Ok(MetricField::Rouge1),
            "rouge2" | "rouge2f" => Ok(MetricField::Rouge2),
            "rougel" | "rougelf" => Ok(MetricField::RougeL),
            _ => Err(alloc::format!("unknown metric `{s}`")),
        }
    }
}

/// Scores line-aligned predictions against references.
///
/// ROUGE, METEOR and BERTScore are averaged over pairs; BLEU is corpus level.
/// A pair with an empty side contributes a BERTScore of zero.
pub fn evaluate_corpus<S: AsRef<str>, R: AsRef<str>>(
    predictions: &[S],
    references: &[R],
    embedder: Option<&dyn Embedder>,
) -> Result<MetricReport> {
    if predictions.len() != references.len() {
        return Err(Error::LengthMismatch { predictions: predictions.len(), references: references.len() });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let cands: Vec<Vec<String>> = predictions.iter().map(|p| tokenize(p.as_ref())).collect();
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();
    let n = cands.len() as f64;

    let mut sums = [0.0f64; 4];
    let mut bert = 0.0;
    for (c, r) in cands.iter().zip(&refs) {
        sums[0] += rouge_n_tokens(c, r, 1).f_score;
        sums[1] += rouge_n_tokens(c, r, 2).f_score;
        sums[2] += rouge_l_tokens(c, r).f_score;
        sums[3] += meteor_tokens(c, r);
        if let Some(e) = embedder {
            if !c.is_empty() && !r.is_empty() {
                bert += bertscore_greedy(&e.embed(c)?, &e.embed(r)?)?.f_score;
            }
        }
    }
    Ok(MetricReport {
        bertscore_f: embedder.map(|_| bert / n),
        bleu: bleu_tokens(&cands, &refs, 4)?,
        meteor: sums[3] / n,
        rouge1_f: sums[0] / n,
        rouge2_f: sums[1] / n,
        rouge_l_f: sums[2] / n,
    }
    .clamped())
}
