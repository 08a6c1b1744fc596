//! Research-question plan matrices, the trainer interface, and result
//! tabulation with per-scheme (bold) and per-dataset (underline) maxima.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricField, MetricReport};
use crate::mixing::MixingStrategy;
use crate::registry::{FamilyId, Registry};
use crate::schedule::{default_budget, Batch, LoopOrder, SchemeConfig, SchemeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RqTag {
    Rq1,
    Rq2,
    Rq3,
    Rq4,
    Custom,
}

impl fmt::Display for RqTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RqTag::Rq1 => "rq1",
            RqTag::Rq2 => "rq2",
            RqTag::Rq3 => "rq3",
            RqTag::Rq4 => "rq4",
            RqTag::Custom => "custom",
        })
    }
}

impl FromStr for RqTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rq1" => Ok(RqTag::Rq1),
            "rq2" => Ok(RqTag::Rq2),
            "rq3" => Ok(RqTag::Rq3),
            "rq4" => Ok(RqTag::Rq4),
            "custom" => Ok(RqTag::Custom),
            _ => Err(Error::UnknownRq(s.to_string())),
        }
    }
}

/// Row label used in result tables: `ALL` for the full set, SUM listed first
/// in mixed combinations (`SUM+CLS+RC`).
pub fn combination_label(families: &[FamilyId]) -> String {
    let set: BTreeSet<FamilyId> = families.iter().copied().collect();
    if set.len() == FamilyId::ALL.len() {
        return "ALL".into();
    }
    let mut parts: Vec<&str> = Vec::new();
    if set.len() > 1 && set.contains(&FamilyId::Sum) {
        parts.push(FamilyId::Sum.label());
    }
    parts.extend(set.iter().filter(|f| set.len() == 1 || **f != FamilyId::Sum).map(|f| f.label()));
    parts.join("+")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub rq: RqTag,
    /// Sorted and de-duplicated.
    pub families: Vec<FamilyId>,
    pub scheme: SchemeConfig,
    pub downstream: String,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn new(
        rq: RqTag,
        families: &[FamilyId],
        scheme: SchemeConfig,
        downstream: impl Into<String>,
    ) -> Result<Self> {
        let families: Vec<FamilyId> = families.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if families.is_empty() {
            return Err(Error::EmptySelection);
        }
        scheme.validate()?;
        Ok(Self { rq, families, seed: scheme.seed, scheme, downstream: downstream.into() })
    }

    pub fn label(&self) -> String {
        combination_label(&self.families)
    }

    /// Filesystem-friendly identifier, e.g. `rq2-sum+cls-seq-reddit_tifu`.
    pub fn id(&self) -> String {
        let fams: Vec<String> = self.families.iter().map(|f| f.symbol().to_ascii_lowercase()).collect();
        format!(
            "{}-{}-{}-{}",
            self.rq,
            fams.join("+"),
            self.scheme.kind.short().to_ascii_lowercase(),
            self.downstream
        )
    }
}

/// Family combinations of each research question, in table row order.
pub fn family_combinations(rq: RqTag) -> Result<Vec<Vec<FamilyId>>> {
    use FamilyId::*;
    let others = [Cls, Cmns, Nli, Rc, RcPlus];
    let pairs = || {
        let mut v = Vec::new();
        for i in 0..others.len() {
            for j in i + 1..others.len() {
                v.push(alloc::vec![others[i], others[j]]);
            }
        }
        v
    };
    Ok(match rq {
        RqTag::Rq1 => {
            let mut v: Vec<Vec<FamilyId>> = FamilyId::ALL.iter().map(|f| alloc::vec![*f]).collect();
            v.push(FamilyId::ALL.to_vec());
            v
        }
        RqTag::Rq2 => others.iter().map(|f| alloc::vec![*f, Sum]).collect(),
        RqTag::Rq3 => pairs(),
        RqTag::Rq4 => {
            let mut v: Vec<Vec<FamilyId>> = pairs()
                .into_iter()
                .map(|mut p| {
                    p.push(Sum);
                    p
                })
                .collect();
            for i in 0..others.len() {
                for j in i + 1..others.len() {
                    for k in j + 1..others.len() {
                        v.push(alloc::vec![others[i], others[j], others[k]]);
                    }
                }
            }
            v
        }
        RqTag::Custom => return Err(Error::UnknownRq("custom".into())),
    })
}

/// Knobs shared by every plan of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanOptions {
    pub schemes: Vec<SchemeKind>,
    pub downstream: String,
    pub seed: u64,
    pub batch_size: u32,
    /// `None` uses the per-family default budget.
    pub budget: Option<u64>,
    pub quantum: u64,
    pub order: LoopOrder,
    /// Within-family mixing for seq/sim; cMTL always mixes equally.
    pub mixing: Option<MixingStrategy>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            schemes: SchemeKind::ALL.to_vec(),
            downstream: "reddit_tifu".into(),
            seed: 0,
            batch_size: crate::schedule::DEFAULT_BATCH_SIZE,
            budget: None,
            quantum: crate::schedule::DEFAULT_QUANTUM,
            order: LoopOrder::Ascending,
            mixing: None,
        }
    }
}

/// Every combination of `rq` crossed with the requested schemes
/// (combination-major order).
pub fn plan_rq(rq: RqTag, registry: &Registry, options: &PlanOptions) -> Result<Vec<ExperimentPlan>> {
    let combos = family_combinations(rq)?;
    for f in FamilyId::ALL {
        if registry.tasks_in(f).next().is_none() {
            return Err(Error::MissingFamily(f));
        }
    }
    let mut plans = Vec::with_capacity(combos.len() * options.schemes.len());
    for combo in &combos {
        for &kind in &options.schemes {
            let mut cfg = SchemeConfig::new(kind, combo.len());
            cfg.batch_size = options.batch_size;
            cfg.budget_steps = options.budget.unwrap_or_else(|| default_budget(combo.len()));
            cfg.quantum = options.quantum;
            cfg.order = options.order;
            cfg.seed = options.seed;
            if kind != SchemeKind::Cmtl {
                if let Some(m) = options.mixing {
                    cfg.mixing = m;
                }
            }
            plans.push(ExperimentPlan::new(rq, combo, cfg, options.downstream.clone())?);
        }
    }
    Ok(plans)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreFinetune,
    Finetune,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::PreFinetune => "pre_finetune",
            Phase::Finetune => "finetune",
        }
    }
}

/// A model (or stand-in) driven by batch streams and asked for predictions.
pub trait Trainer {
    fn id(&self) -> String;

    /// Called before the batches of a phase; `total_batches` is the manifest
    /// total and `manifest_digest` identifies the manifest being streamed.
    fn begin_phase(&mut self, _phase: Phase, _total_batches: u64, _manifest_digest: &str) -> Result<()> {
        Ok(())
    }

    fn consume(&mut self, batch: &Batch) -> Result<()>;

    fn end_phase(&mut self) -> Result<()> {
        Ok(())
    }

    /// One prediction per input, in order.
    fn predict(&mut self, inputs: &[String]) -> Result<Vec<String>>;

    fn batches_seen(&self, phase: Phase) -> u64;
}

/// Non-learning baseline: counts the batches it is fed and predicts the
/// first `n` sentences of each input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeadTrainer {
    n: usize,
    phase: Phase,
    seen: [u64; 2],
}

pub fn lead_n_trainer(n: usize) -> Result<LeadTrainer> {
    if n == 0 {
        return Err(Error::Trainer("lead-N trainer needs n >= 1".into()));
    }
    Ok(LeadTrainer { n, phase: Phase::PreFinetune, seen: [0; 2] })
}

fn strip_prompt_label(text: &str) -> &str {
    let trimmed = text.trim_start();
    match trimmed.split_once(' ') {
        Some((head, rest))
            if head.len() > 1
                && head.ends_with(':')
                && head[..head.len() - 1].bytes().all(|b| b.is_ascii_lowercase()) =>
        {
            rest
        }
        _ => trimmed,
    }
}

/// The first `n` sentences of `text`. A sentence ends at a run of `.`, `!` or
/// `?` followed by whitespace or the end of the text.
pub fn lead_sentences(text: &str, n: usize) -> &str {
    let text = text.trim();
    let bytes = text.as_bytes();
    let mut found = 0;
    let mut i = 0;
    while i < bytes.len() {
        if matches!(bytes[i], b'.' | b'!' | b'?') {
            let mut end = i + 1;
            while end < bytes.len() && matches!(bytes[end], b'.' | b'!' | b'?') {
                end += 1;
            }
            if end == bytes.len() || bytes[end].is_ascii_whitespace() {
                found += 1;
                if found == n {
                    return &text[..end];
                }
            }
            i = end;
        } else {
            i += 1;
        }
    }
    text
}

impl Trainer for LeadTrainer {
    fn id(&self) -> String {
        format!("lead-{}", self.n)
    }

    fn begin_phase(&mut self, phase: Phase, _total_batches: u64, _manifest_digest: &str) -> Result<()> {
        self.phase = phase;
        Ok(())
    }

    fn consume(&mut self, _batch: &Batch) -> Result<()> {
        self.seen[self.phase as usize] += 1;
        Ok(())
    }

    fn predict(&mut self, inputs: &[String]) -> Result<Vec<String>> {
        Ok(inputs.iter().map(|s| lead_sentences(strip_prompt_label(s), self.n).to_string()).collect())
    }

    fn batches_seen(&self, phase: Phase) -> u64 {
        self.seen[phase as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub plan: ExperimentPlan,
    pub report: MetricReport,
    /// Seconds; left out of run logs unless timing is requested so that logs
    /// stay byte-identical across invocations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    pub manifest_digest: String,
    pub trainer: String,
    pub prefinetune_batches: u64,
    pub finetune_batches: u64,
}

/// Reference scores for one downstream dataset (the model without pre-finetuning).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub dataset: String,
    pub report: MetricReport,
}

/// A result grid for one metric.
///
/// Columns are `(dataset, scheme)` pairs, dataset-major. Bold marks the
/// maximum of each column and underline the maximum of each dataset; ties go
/// to the first row (row-major order for underline) and the other tied cells
/// are listed alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub metric: MetricField,
    pub rows: Vec<String>,
    pub row_families: Vec<Vec<FamilyId>>,
    pub datasets: Vec<String>,
    pub schemes: Vec<SchemeKind>,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Per column: winning row.
    pub bold: Vec<Option<usize>>,
    pub bold_ties: Vec<Vec<usize>>,
    /// Per dataset: winning `(row, column)`.
    pub underline: Vec<Option<(usize, usize)>>,
    pub underline_ties: Vec<Vec<(usize, usize)>>,
    /// Per column; the dataset's baseline repeated under every scheme.
    pub baseline: Vec<Option<f64>>,
}

impl ResultsTable {
    pub fn column(&self, dataset: &str, scheme: SchemeKind) -> Option<usize> {
        let d = self.datasets.iter().position(|x| x == dataset)?;
        let s = self.schemes.iter().position(|x| *x == scheme)?;
        Some(d * self.schemes.len() + s)
    }

    pub fn row(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == label)
    }

    pub fn column_count(&self) -> usize {
        self.datasets.len() * self.schemes.len()
    }

    /// Whether the cell is a column maximum (winner or tie).
    pub fn is_bold(&self, row: usize, col: usize) -> bool {
        self.bold[col] == Some(row) || self.bold_ties[col].contains(&row)
    }

    /// Whether the cell is a dataset maximum (winner or tie).
    pub fn is_underlined(&self, row: usize, col: usize) -> bool {
        let d = col / self.schemes.len();
        self.underline[d] == Some((row, col)) || self.underline_ties[d].contains(&(row, col))
    }
}

fn max_with_ties(cells: impl Iterator<Item = (usize, Option<f64>)>) -> (Option<usize>, Vec<usize>) {
    let mut best: Option<(usize, f64)> = None;
    let mut ties = Vec::new();
    for (i, v) in cells {
        let Some(v) = v else { continue };
        match best {
            None => best = Some((i, v)),
            Some((_, b)) if v > b => {
                best = Some((i, v));
                ties.clear();
            }
            Some((_, b)) if v == b => ties.push(i),
            _ => {}
        }
    }
    (best.map(|(i, _)| i), ties)
}

/// Rows sort by size; among mixed combinations those including SUM come first.
fn row_key(families: &[FamilyId]) -> (usize, bool, Vec<FamilyId>) {
    let without_sum = families.len() > 1 && !families.contains(&FamilyId::Sum);
    (families.len(), without_sum, families.to_vec())
}

pub fn tabulate(records: &[RunRecord], metric: MetricField, baselines: &[Baseline]) -> Result<ResultsTable> {
    let row_set: BTreeSet<(usize, bool, Vec<FamilyId>)> = records.iter().map(|r| row_key(&r.plan.families)).collect();
    let row_families: Vec<Vec<FamilyId>> = row_set.into_iter().map(|(_, _, f)| f).collect();
    let schemes: Vec<SchemeKind> =
        records.iter().map(|r| r.plan.scheme.kind).collect::<BTreeSet<_>>().into_iter().collect();
    let present: BTreeSet<&str> = records.iter().map(|r| r.plan.downstream.as_str()).collect();
    let mut datasets: Vec<String> = Vec::new();
    for b in baselines {
        if present.contains(b.dataset.as_str()) && !datasets.contains(&b.dataset) {
            datasets.push(b.dataset.clone());
        }
    }
    for d in &present {
        if !datasets.iter().any(|x| x == d) {
            datasets.push((*d).to_string());
        }
    }

    let ns = schemes.len();
    let ncols = datasets.len() * ns;
    let mut cells: Vec<Vec<Option<Option<f64>>>> = alloc::vec![alloc::vec![None; ncols]; row_families.len()];
    let row_of: BTreeMap<&[FamilyId], usize> =
        row_families.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
    let rows: Vec<String> = row_families.iter().map(|f| combination_label(f)).collect();
    let cell_name = |row: usize, col: usize| {
        format!("{}/{}/{}", rows[row], schemes[col % ns], datasets[col / ns])
    };

    for r in records {
        let row = row_of[r.plan.families.as_slice()];
        let d = datasets.iter().position(|x| *x == r.plan.downstream).expect("dataset collected above");
        let s = schemes.iter().position(|x| *x == r.plan.scheme.kind).expect("scheme collected above");
        let col = d * ns + s;
        if cells[row][col].is_some() {
            return Err(Error::DuplicateCell(cell_name(row, col)));
        }
        cells[row][col] = Some(r.report.get(metric));
    }
    let missing: Vec<String> = (0..rows.len())
        .flat_map(|row| (0..ncols).map(move |col| (row, col)))
        .filter(|&(row, col)| cells[row][col].is_none())
        .map(|(row, col)| cell_name(row, col))
        .collect();
    if !missing.is_empty() {
        return Err(Error::RaggedGrid(missing));
    }
    let cells: Vec<Vec<Option<f64>>> =
        cells.into_iter().map(|row| row.into_iter().map(|c| c.flatten()).collect()).collect();

    let mut bold = Vec::with_capacity(ncols);
    let mut bold_ties = Vec::with_capacity(ncols);
    for col in 0..ncols {
        let (b, t) = max_with_ties(cells.iter().enumerate().map(|(row, r)| (row, r[col])));
        bold.push(b);
        bold_ties.push(t);
    }
    let mut underline = Vec::with_capacity(datasets.len());
    let mut underline_ties = Vec::with_capacity(datasets.len());
    for d in 0..datasets.len() {
        let flat = |i: usize| (i / ns, d * ns + i % ns);
        let (b, t) = max_with_ties(
            (0..rows.len() * ns).map(|i| {
                let (row, col) = flat(i);
                (i, cells[row][col])
            }),
        );
        underline.push(b.map(flat));
        underline_ties.push(t.into_iter().map(flat).collect());
    }
    let baseline = (0..ncols)
        .map(|col| {
            baselines.iter().find(|b| b.dataset == datasets[col / ns]).and_then(|b| b.report.get(metric))
        })
        .collect();

    Ok(ResultsTable {
        metric,
        rows,
        row_families,
        datasets,
        schemes,
        cells,
        bold,
        bold_ties,
        underline,
        underline_ties,
        baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub label: String,
    pub scheme: SchemeKind,
    pub dataset: String,
    pub value: f64,
    pub baseline: f64,
    pub delta: f64,
}

/// `record - baseline` for every record, in record order. Records without a
/// value for `metric` are skipped.
pub fn compare_to_baseline(records: &[RunRecord], baselines: &[Baseline], metric: MetricField) -> Result<Vec<Delta>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let base = baselines
            .iter()
            .find(|b| b.dataset == r.plan.downstream)
            .and_then(|b| b.report.get(metric))
            .ok_or_else(|| Error::MissingBaseline(r.plan.downstream.clone()))?;
        if let Some(value) = r.report.get(metric) {
            out.push(Delta {
                label: r.plan.label(),
                scheme: r.plan.scheme.kind,
                dataset: r.plan.downstream.clone(),
                value,
                baseline: base,
                delta: value - base,
            });
        }
    }
    Ok(out)
}
