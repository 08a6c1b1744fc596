//! Schedule manifests for the three training schemes and their
//! materialization into batches of formatted examples.
//!
//! A manifest is a list of stages; each stage is an ordered list of entries,
//! and each entry is either a homogeneous block of batches from one task or
//! a block of pooled batches whose every example slot is an independent draw
//! from the sampling distribution.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::{task_distribution, task_shares, MixingStrategy, SamplingDistribution, Share};
use crate::registry::{truncate_pair, FamilyId, Registry, SequenceLimits, TextPair, WhitespaceTokenizer};
use crate::rng::{Rng, RNG_ALGORITHM};

const STREAM_ORDER: u64 = 0x0bde;
const STREAM_POOL: u64 = 0x9001;
const STREAM_SAMPLE: u64 = 0x5a3e;

pub const DEFAULT_BATCH_SIZE: u32 = 8;
pub const DEFAULT_QUANTUM: u64 = 500;
pub const BUDGET_PER_FAMILY: u64 = 10_000;
pub const MAX_BUDGET: u64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchemeKind {
    Sequential,
    Simultaneous,
    Cmtl,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Sequential, SchemeKind::Simultaneous, SchemeKind::Cmtl];

    pub fn short(self) -> &'static str {
        match self {
            SchemeKind::Sequential => "seq",
            SchemeKind::Simultaneous => "sim",
            SchemeKind::Cmtl => "cMTL",
        }
    }

    /// Mixing used with this scheme in the experiment matrices.
    pub fn default_mixing(self) -> MixingStrategy {
        match self {
            SchemeKind::Cmtl => MixingStrategy::Equal,
            _ => MixingStrategy::Proportional,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "seq" | "sequential" => Ok(SchemeKind::Sequential),
            "sim" | "simultaneous" => Ok(SchemeKind::Simultaneous),
            "cmtl" | "continual" => Ok(SchemeKind::Cmtl),
            other => Err(alloc::format!("unknown scheme `{other}`")),
        }
    }
}

/// Within-stage execution order of the continual queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LoopOrder {
    /// New task first, then oldest to newest.
    #[default]
    Ascending,
    /// New task first, then newest to oldest.
    Descending,
}

impl FromStr for LoopOrder {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "asc" | "ascending" => Ok(LoopOrder::Ascending),
            "desc" | "descending" => Ok(LoopOrder::Descending),
            other => Err(alloc::format!("unknown loop order `{other}`")),
        }
    }
}

/// Steps for SEQUENTIAL/SIMULTANEOUS: 10k per family, capped at 60k.
pub fn default_budget(n_families: usize) -> u64 {
    (BUDGET_PER_FAMILY * n_families as u64).min(MAX_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub mixing: MixingStrategy,
    pub batch_size: u32,
    pub budget_steps: u64,
    pub quantum: u64,
    pub order: LoopOrder,
    pub seed: u64,
    /// Number of sequential passes, each with a fresh task permutation.
    /// `1` runs every task as a single contiguous block.
    #[serde(default = "one")]
    pub sequential_epochs: u32,
}

fn one() -> u32 {
    1
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, n_families: usize) -> Self {
        Self {
            kind,
            mixing: kind.default_mixing(),
            batch_size: DEFAULT_BATCH_SIZE,
            budget_steps: default_budget(n_families),
            quantum: DEFAULT_QUANTUM,
            order: LoopOrder::Ascending,
            seed: 0,
            sequential_epochs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidBatchSize);
        }
        if self.kind == SchemeKind::Cmtl {
            if self.mixing != MixingStrategy::Equal {
                return Err(Error::CmtlRequiresEqual);
            }
            if self.quantum == 0 {
                return Err(Error::InvalidQuantum);
            }
        }
        Ok(())
    }

    fn expect_kind(&self, expected: SchemeKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::SchemeMismatch { expected, found: self.kind });
        }
        self.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    /// `None` marks pooled batches drawn from the manifest's distribution.
    pub task: Option<String>,
    pub batches: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stage: u32,
    pub entries: Vec<StageEntry>,
}

impl StagePlan {
    pub fn total_batches(&self) -> u64 {
        self.entries.iter().map(|e| e.batches).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub registry_digest: String,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleManifest {
    pub config: SchemeConfig,
    pub families: Vec<FamilyId>,
    pub distribution: SamplingDistribution,
    pub provenance: Provenance,
    pub stages: Vec<StagePlan>,
}

impl ScheduleManifest {
    pub fn total_batches(&self) -> u64 {
        self.stages.iter().map(StagePlan::total_batches).sum()
    }

    /// Batches per task over homogeneous entries; pooled batches are not attributed.
    pub fn batches_per_task(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for stage in &self.stages {
            for e in &stage.entries {
                if let Some(t) = &e.task {
                    *out.entry(t.clone()).or_insert(0) += e.batches;
                }
            }
        }
        out
    }

    pub fn pooled_batches(&self) -> u64 {
        self.stages.iter().flat_map(|s| &s.entries).filter(|e| e.task.is_none()).map(|e| e.batches).sum()
    }
}

/// Largest-remainder apportionment of `total` over exact rational weights
/// `(numerator, denominator)`; remainders are handed out largest first, ties
/// to the lower index.
pub fn largest_remainder(weights: &[(u64, u64)], total: u64) -> Vec<u64> {
    largest_remainder_exact(weights, total).unwrap_or_else(|| largest_remainder_f64(weights, total))
}

/// Integer version; `None` when the common denominator overflows.
fn largest_remainder_exact(weights: &[(u64, u64)], total: u64) -> Option<Vec<u64>> {
    let mut common = 1u128;
    for &(_, d) in weights {
        let d = d.max(1) as u128;
        common = common / gcd(common, d) * d;
        if common > u64::MAX as u128 {
            return None;
        }
    }
    // quota_i = total * scaled_i / sum, so the weights need not sum to one
    let scaled: Vec<u128> = weights.iter().map(|&(n, d)| n as u128 * (common / d.max(1) as u128)).collect();
    let sum: u128 = scaled.iter().sum();
    if sum == 0 {
        return Some(alloc::vec![0; weights.len()]);
    }
    let mut counts = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    for &w in &scaled {
        let p = w.checked_mul(total as u128)?;
        counts.push((p / sum) as u64);
        rems.push(p % sum);
    }
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &i in order.iter().cycle().take((total - assigned) as usize) {
        counts[i] += 1;
    }
    Some(counts)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn largest_remainder_f64(weights: &[(u64, u64)], total: u64) -> Vec<u64> {
    let w: Vec<f64> = weights.iter().map(|&(n, d)| n as f64 / d as f64).collect();
    let sum: f64 = w.iter().sum();
    let quotas: Vec<f64> = w.iter().map(|x| total as f64 * x / sum).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| libm::floor(*q) as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - libm::floor(quotas[a]);
        let fb = quotas[b] - libm::floor(quotas[b]);
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Smallest budget from which every larger budget gives each task a batch.
/// Largest-remainder rounding is not monotone, so this scans down from a
/// budget where every quota is at least one; scans longer than a million
/// steps report that sufficient budget instead.
fn minimum_budget(weights: &[(u64, u64)]) -> u64 {
    let sum: f64 = weights.iter().map(|&(n, d)| n as f64 / d as f64).sum();
    let sufficient = weights
        .iter()
        .map(|&(n, d)| libm::ceil(sum * d as f64 / n.max(1) as f64) as u64)
        .max()
        .unwrap_or(0)
        .max(weights.len() as u64);
    let floor = sufficient.saturating_sub(1_000_000).max(weights.len() as u64);
    let mut b = sufficient;
    while b > floor && largest_remainder(weights, b - 1).iter().all(|&c| c > 0) {
        b -= 1;
    }
    b
}

fn allocate(shares: &[Share], budget: u64) -> Result<Vec<u64>> {
    let weights: Vec<(u64, u64)> = shares.iter().map(|s| (s.numerator, s.denominator)).collect();
    let counts = largest_remainder(&weights, budget);
    if counts.contains(&0) {
        return Err(Error::BudgetTooSmall { budget, minimum: minimum_budget(&weights) });
    }
    Ok(counts)
}

fn provenance(config: &SchemeConfig, registry: &Registry) -> Provenance {
    Provenance { seed: config.seed, registry_digest: registry.digest(), rng: RNG_ALGORITHM.to_string() }
}

pub fn build_sequential(
    registry: &Registry,
    families: &[FamilyId],
    config: &SchemeConfig,
) -> Result<ScheduleManifest> {
    config.expect_kind(SchemeKind::Sequential)?;
    let distribution = task_distribution(families, registry, config.mixing)?;
    let (_, shares) = task_shares(families, registry, config.mixing)?;
    let counts = allocate(&shares, config.budget_steps)?;
    let epochs = config.sequential_epochs.max(1);

    // per-task batch counts split evenly over epochs
    let even = alloc::vec![(1, 1); epochs as usize];
    let per_epoch: Vec<Vec<u64>> = counts.iter().map(|&c| largest_remainder(&even, c)).collect();

    let root = Rng::new(config.seed).split(STREAM_ORDER);
    let stages = (0..epochs)
        .map(|epoch| {
            let mut rng = root.split(epoch as u64);
            let order = rng.permutation(distribution.len());
            StagePlan {
                stage: epoch + 1,
                entries: order
                    .into_iter()
                    .filter(|&i| per_epoch[i][epoch as usize] > 0)
                    .map(|i| StageEntry {
                        task: Some(distribution.entries[i].task.clone()),
                        batches: per_epoch[i][epoch as usize],
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(ScheduleManifest {
        config: config.clone(),
        families: distribution.families.clone(),
        provenance: provenance(config, registry),
        distribution,
        stages,
    })
}

pub fn build_simultaneous(
    registry: &Registry,
    families: &[FamilyId],
    config: &SchemeConfig,
) -> Result<ScheduleManifest> {
    config.expect_kind(SchemeKind::Simultaneous)?;
    let distribution = task_distribution(families, registry, config.mixing)?;
    let (_, shares) = task_shares(families, registry, config.mixing)?;
    allocate(&shares, config.budget_steps)?;
    Ok(ScheduleManifest {
        config: config.clone(),
        families: distribution.families.clone(),
        provenance: provenance(config, registry),
        distribution,
        stages: alloc::vec![StagePlan {
            stage: 1,
            entries: alloc::vec![StageEntry { task: None, batches: config.budget_steps }],
        }],
    })
}

/// Continual multi-task schedule. Stage `t` introduces `ordered_tasks[t-1]`
/// with `quantum * t` batches, followed by every earlier task with `quantum`
/// batches each in queue order; the new task then joins the back of the queue.
pub fn build_cmtl(registry: &Registry, ordered_tasks: &[String], config: &SchemeConfig) -> Result<ScheduleManifest> {
    build_cmtl_traced(registry, ordered_tasks, config).map(|(m, _)| m)
}

/// As [`build_cmtl`], also returning the queue contents after each stage.
pub fn build_cmtl_traced(
    registry: &Registry,
    ordered_tasks: &[String],
    config: &SchemeConfig,
) -> Result<(ScheduleManifest, Vec<Vec<String>>)> {
    config.expect_kind(SchemeKind::Cmtl)?;
    if ordered_tasks.is_empty() {
        return Err(Error::NoTasks);
    }
    let mut seen = BTreeSet::new();
    let mut families = BTreeSet::new();
    for t in ordered_tasks {
        let spec = registry.get(t).ok_or_else(|| Error::UnknownTask(t.clone()))?;
        if !seen.insert(t.as_str()) {
            return Err(Error::DuplicateTask(t.clone()));
        }
        families.insert(spec.family);
    }
    let families: Vec<FamilyId> = families.into_iter().collect();
    let distribution = task_distribution(&families, registry, config.mixing)?;

    let q = config.quantum;
    let mut queue: VecDeque<&String> = VecDeque::new();
    let mut stages = Vec::with_capacity(ordered_tasks.len());
    let mut trace = Vec::with_capacity(ordered_tasks.len());
    for (i, task) in ordered_tasks.iter().enumerate() {
        let t = i as u64 + 1;
        let mut entries = alloc::vec![StageEntry { task: Some(task.clone()), batches: q * t }];
        let replay = |name: &&String| StageEntry { task: Some((*name).clone()), batches: q };
        match config.order {
            LoopOrder::Ascending => entries.extend(queue.iter().map(replay)),
            LoopOrder::Descending => entries.extend(queue.iter().rev().map(replay)),
        }
        queue.push_back(task);
        trace.push(queue.iter().map(|s| (*s).clone()).collect());
        stages.push(StagePlan { stage: t as u32, entries });
    }

    let manifest = ScheduleManifest {
        config: config.clone(),
        families: distribution.families.clone(),
        provenance: provenance(config, registry),
        distribution,
        stages,
    };
    Ok((manifest, trace))
}

/// Builds whichever scheme `config.kind` names; cMTL uses the selected
/// families' tasks grouped family by family in table order.
pub fn build_schedule(registry: &Registry, families: &[FamilyId], config: &SchemeConfig) -> Result<ScheduleManifest> {
    match config.kind {
        SchemeKind::Sequential => build_sequential(registry, families, config),
        SchemeKind::Simultaneous => build_simultaneous(registry, families, config),
        SchemeKind::Cmtl => {
            let selected: BTreeSet<FamilyId> = families.iter().copied().collect();
            if selected.is_empty() {
                return Err(Error::EmptySelection);
            }
            let ordered = registry.grouped_tasks(&selected.into_iter().collect::<Vec<_>>());
            build_cmtl(registry, &ordered, config)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub stage: u32,
    /// Set iff the batch is homogeneous.
    pub task: Option<String>,
    pub homogeneous: bool,
    pub examples: Vec<TextPair>,
}

/// Position and sampler state of a [`Materializer`]; resuming from it yields
/// exactly the suffix an uninterrupted run would have produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub emitted: u64,
    pub stage_index: usize,
    pub entry_index: usize,
    pub batch_in_entry: u64,
    /// Examples consumed so far, per registry task index.
    pub consumed: Vec<u64>,
    pub pool_counter: u64,
}

/// Streams the batches of a manifest in manifest order.
///
/// Each task's examples are visited epoch by epoch without replacement; the
/// order within epoch `e` of task `i` is a permutation seeded from
/// `(seed, i, e)`. Pooled slots pick a task from the distribution and then take
/// that task's next example.
pub struct Materializer<'a> {
    manifest: &'a ScheduleManifest,
    registry: &'a Registry,
    dist_index: Vec<usize>,
    entry_index: Vec<Vec<Option<usize>>>,
    sample_root: Rng,
    pool_seed: u64,
    limits: Option<SequenceLimits>,
    state: Checkpoint,
    perms: BTreeMap<usize, (u64, Vec<usize>)>,
}

/// Validates `manifest` against `registry` and returns a stream positioned at
/// the first batch.
pub fn materialize<'a>(manifest: &'a ScheduleManifest, registry: &'a Registry) -> Result<Materializer<'a>> {
    Materializer::new(manifest, registry)
}

impl<'a> Materializer<'a> {
    pub fn new(manifest: &'a ScheduleManifest, registry: &'a Registry) -> Result<Self> {
        let digest = registry.digest();
        if digest != manifest.provenance.registry_digest {
            return Err(Error::RegistryDigestMismatch {
                manifest: manifest.provenance.registry_digest.clone(),
                registry: digest,
            });
        }
        let loaded = |name: &str| -> Result<usize> {
            let idx = registry.index_of(name).ok_or_else(|| Error::UnknownTask(name.into()))?;
            if registry.examples_at(idx).is_empty() {
                return Err(Error::TaskNotLoaded(name.into()));
            }
            Ok(idx)
        };
        let pooled = manifest.pooled_batches() > 0;
        let dist_index = if pooled {
            manifest.distribution.entries.iter().map(|e| loaded(&e.task)).collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let entry_index = manifest
            .stages
            .iter()
            .map(|s| s.entries.iter().map(|e| e.task.as_deref().map(loaded).transpose()).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        let root = Rng::new(manifest.provenance.seed);
        let mut m = Self {
            manifest,
            registry,
            dist_index,
            entry_index,
            sample_root: root.split(STREAM_SAMPLE),
            pool_seed: root.split(STREAM_POOL).seed(),
            limits: None,
            state: Checkpoint {
                emitted: 0,
                stage_index: 0,
                entry_index: 0,
                batch_in_entry: 0,
                consumed: alloc::vec![0; registry.len()],
                pool_counter: 0,
            },
            perms: BTreeMap::new(),
        };
        m.normalize();
        Ok(m)
    }

    /// Truncates every emitted pair with the whitespace tokenizer.
    pub fn with_limits(mut self, limits: SequenceLimits) -> Self {
        self.limits = Some(limits);
        self
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.state.clone()
    }

    pub fn resume(manifest: &'a ScheduleManifest, registry: &'a Registry, checkpoint: &Checkpoint) -> Result<Self> {
        let mut m = Self::new(manifest, registry)?;
        if checkpoint.consumed.len() != registry.len() || checkpoint.emitted > manifest.total_batches() {
            return Err(Error::CheckpointOutOfRange(manifest.total_batches()));
        }
        m.state = checkpoint.clone();
        m.normalize();
        Ok(m)
    }

    /// Advances past the first `batches` batches of the stream.
    pub fn skip_batches(&mut self, batches: u64) -> Result<()> {
        for _ in 0..batches {
            if self.next().is_none() {
                return Err(Error::CheckpointOutOfRange(self.manifest.total_batches()));
            }
        }
        Ok(())
    }

    pub fn emitted(&self) -> u64 {
        self.state.emitted
    }

    pub fn remaining(&self) -> u64 {
        self.manifest.total_batches() - self.state.emitted
    }

    /// Skips exhausted entries so the cursor always points at a real batch or
    /// past the end.
    fn normalize(&mut self) {
        let stages = &self.manifest.stages;
        while let Some(stage) = stages.get(self.state.stage_index) {
            match stage.entries.get(self.state.entry_index) {
                Some(e) if self.state.batch_in_entry < e.batches => return,
                Some(_) => {
                    self.state.entry_index += 1;
                    self.state.batch_in_entry = 0;
                }
                None => {
                    self.state.stage_index += 1;
                    self.state.entry_index = 0;
                    self.state.batch_in_entry = 0;
                }
            }
        }
    }

    fn next_example(&mut self, task: usize) -> TextPair {
        let examples = self.registry.examples_at(task);
        let n = examples.len() as u64;
        let k = self.state.consumed[task];
        self.state.consumed[task] += 1;
        let epoch = k / n;
        let cached = matches!(self.perms.get(&task), Some((e, _)) if *e == epoch);
        if !cached {
            let mut rng = self.sample_root.split(task as u64).split(epoch);
            self.perms.insert(task, (epoch, rng.permutation(n as usize)));
        }
        let idx = self.perms[&task].1[(k % n) as usize];
        let spec = self.registry.spec_at(task);
        let pair = spec.format(&examples[idx]).expect("templates are checked when examples are attached");
        match self.limits {
            Some(limits) => truncate_pair(&pair, limits, &WhitespaceTokenizer),
            None => pair,
        }
    }
}

impl Iterator for Materializer<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let stage = self.manifest.stages.get(self.state.stage_index)?;
        let batch_size = self.manifest.config.batch_size as usize;
        let source = self.entry_index[self.state.stage_index][self.state.entry_index];
        let mut examples = Vec::with_capacity(batch_size);
        match source {
            Some(task) => {
                for _ in 0..batch_size {
                    examples.push(self.next_example(task));
                }
            }
            None => {
                let mut pool = Rng::at(self.pool_seed, self.state.pool_counter);
                for _ in 0..batch_size {
                    let task = self.dist_index[self.manifest.distribution.pick(&mut pool)];
                    examples.push(self.next_example(task));
                }
                self.state.pool_counter = pool.counter();
            }
        }
        let first = examples[0].task_name.clone();
        let homogeneous = examples.iter().all(|p| p.task_name == first);
        let batch = Batch { stage: stage.stage, task: homogeneous.then_some(first), homogeneous, examples };

        self.state.emitted += 1;
        self.state.batch_in_entry += 1;
        self.normalize();
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.remaining() as usize;
        (r, Some(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{synth_fixture, TaskSpec};
    use alloc::vec;

    fn loaded_registry(tasks: &[(&str, FamilyId, usize)]) -> Registry {
        let mut r = Registry::new();
        for (i, (name, family, n)) in tasks.iter().enumerate() {
            r.register_task(TaskSpec::new(*name, *family, 0)).unwrap();
            r.attach_examples(name, synth_fixture(*family, *n, i as u64)).unwrap();
        }
        r
    }

    #[test]
    fn lr_allocation_exact() {
        assert_eq!(largest_remainder(&[(1, 3), (1, 3), (1, 3)], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[(1, 4), (3, 4)], 10), vec![3, 7]);
        assert_eq!(largest_remainder(&[(1, 6), (1, 3), (1, 2)], 5), vec![1, 2, 2]);
        assert_eq!(largest_remainder(&[], 10), Vec::<u64>::new());
    }

    #[test]
    fn sequential_single_task() {
        let r = loaded_registry(&[("xsum", FamilyId::Sum, 4)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.budget_steps = 10;
        let m = build_sequential(&r, &[FamilyId::Sum], &c).unwrap();
        assert_eq!(m.stages.len(), 1);
        assert_eq!(m.stages[0].entries, vec![StageEntry { task: Some("xsum".into()), batches: 10 }]);
    }

    #[test]
    fn sequential_symmetric_split() {
        let r = loaded_registry(&[("a", FamilyId::Rc, 4), ("b", FamilyId::Rc, 4)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.mixing = MixingStrategy::Equal;
        c.budget_steps = 10;
        let m = build_sequential(&r, &[FamilyId::Rc], &c).unwrap();
        let counts = m.batches_per_task();
        assert_eq!(counts["a"], 5);
        assert_eq!(counts["b"], 5);
    }

    #[test]
    fn sequential_budget_too_small() {
        let r = loaded_registry(&[("a", FamilyId::Rc, 4), ("b", FamilyId::Rc, 4), ("c", FamilyId::Sum, 3)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 2);
        c.budget_steps = 2;
        let err = build_sequential(&r, &[FamilyId::Rc, FamilyId::Sum], &c).unwrap_err();
        assert_eq!(err, Error::BudgetTooSmall { budget: 2, minimum: 3 });
    }

    #[test]
    fn wrong_kind_rejected() {
        let r = loaded_registry(&[("a", FamilyId::Rc, 4)]);
        let c = SchemeConfig::new(SchemeKind::Simultaneous, 1);
        assert!(matches!(build_sequential(&r, &[FamilyId::Rc], &c), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn cmtl_requires_equal_and_quantum() {
        let r = loaded_registry(&[("a", FamilyId::Rc, 4)]);
        let tasks = vec!["a".to_string()];
        let mut c = SchemeConfig::new(SchemeKind::Cmtl, 1);
        c.mixing = MixingStrategy::Proportional;
        assert_eq!(build_cmtl(&r, &tasks, &c).unwrap_err(), Error::CmtlRequiresEqual);
        c.mixing = MixingStrategy::Equal;
        c.quantum = 0;
        assert_eq!(build_cmtl(&r, &tasks, &c).unwrap_err(), Error::InvalidQuantum);
        c.quantum = 500;
        assert_eq!(build_cmtl(&r, &[], &c).unwrap_err(), Error::NoTasks);
        let m = build_cmtl(&r, &tasks, &c).unwrap();
        assert_eq!(m.stages.len(), 1);
        assert_eq!(m.total_batches(), 500);
    }

    #[test]
    fn cmtl_descending_order() {
        let r = loaded_registry(&[("a", FamilyId::Rc, 2), ("b", FamilyId::Rc, 2), ("c", FamilyId::Rc, 2)]);
        let tasks: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut c = SchemeConfig::new(SchemeKind::Cmtl, 1);
        c.quantum = 2;
        c.order = LoopOrder::Descending;
        let m = build_cmtl(&r, &tasks, &c).unwrap();
        let names: Vec<_> = m.stages[2].entries.iter().map(|e| e.task.clone().unwrap()).collect();
        assert_eq!(names, ["c", "b", "a"]);
        assert_eq!(m.stages[2].entries[0].batches, 6);
    }

    #[test]
    fn simultaneous_single_task_is_homogeneous() {
        let r = loaded_registry(&[("xsum", FamilyId::Sum, 5)]);
        let mut c = SchemeConfig::new(SchemeKind::Simultaneous, 1);
        c.budget_steps = 20;
        let m = build_simultaneous(&r, &[FamilyId::Sum], &c).unwrap();
        let batches: Vec<Batch> = materialize(&m, &r).unwrap().collect();
        assert_eq!(batches.len(), 20);
        assert!(batches.iter().all(|b| b.homogeneous && b.task.as_deref() == Some("xsum")));
    }

    #[test]
    fn epoch_without_replacement() {
        let r = loaded_registry(&[("xsum", FamilyId::Sum, 6)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.budget_steps = 3;
        c.batch_size = 2;
        let m = build_sequential(&r, &[FamilyId::Sum], &c).unwrap();
        let mut seen: Vec<String> =
            materialize(&m, &r).unwrap().flat_map(|b| b.examples).map(|p| p.input_text).collect();
        seen.sort();
        let mut expected: Vec<String> =
            r.examples("xsum").unwrap().iter().map(|e| r.get("xsum").unwrap().format(e).unwrap().input_text).collect();
        expected.sort();
        assert_eq!(seen, expected);
    }

    #[test]
    fn empty_manifest_streams_nothing() {
        let r = loaded_registry(&[("xsum", FamilyId::Sum, 2)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.budget_steps = 1;
        let mut m = build_sequential(&r, &[FamilyId::Sum], &c).unwrap();
        m.stages.clear();
        assert_eq!(materialize(&m, &r).unwrap().count(), 0);
    }

    #[test]
    fn digest_mismatch_rejected() {
        let r = loaded_registry(&[("xsum", FamilyId::Sum, 2)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.budget_steps = 1;
        let m = build_sequential(&r, &[FamilyId::Sum], &c).unwrap();
        let other = loaded_registry(&[("xsum", FamilyId::Sum, 3)]);
        assert!(matches!(materialize(&m, &other), Err(Error::RegistryDigestMismatch { .. })));
    }

    #[test]
    fn unloaded_task_rejected() {
        let mut r = Registry::new();
        r.register_task(TaskSpec::new("xsum", FamilyId::Sum, 5)).unwrap();
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.budget_steps = 1;
        let m = build_sequential(&r, &[FamilyId::Sum], &c).unwrap();
        assert_eq!(materialize(&m, &r).err(), Some(Error::TaskNotLoaded("xsum".into())));
    }

    #[test]
    fn resume_matches_uninterrupted_suffix() {
        let r = loaded_registry(&[("a", FamilyId::Rc, 5), ("b", FamilyId::Sum, 7)]);
        let mut c = SchemeConfig::new(SchemeKind::Simultaneous, 2);
        c.budget_steps = 30;
        c.seed = 11;
        let m = build_simultaneous(&r, &[FamilyId::Rc, FamilyId::Sum], &c).unwrap();
        let full: Vec<Batch> = materialize(&m, &r).unwrap().collect();
        for k in [0u64, 1, 13, 29, 30] {
            let mut head = materialize(&m, &r).unwrap();
            head.skip_batches(k).unwrap();
            let cp = head.checkpoint();
            let resumed: Vec<Batch> = Materializer::resume(&m, &r, &cp).unwrap().collect();
            assert_eq!(resumed, full[k as usize..]);
        }
    }

    #[test]
    fn limits_truncate() {
        let r = loaded_registry(&[("xsum", FamilyId::Sum, 3)]);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, 1);
        c.budget_steps = 2;
        let m = build_sequential(&r, &[FamilyId::Sum], &c).unwrap();
        let limits = SequenceLimits::new(3, 2).unwrap();
        for b in materialize(&m, &r).unwrap().with_limits(limits) {
            for p in b.examples {
                assert!(p.input_text.split_whitespace().count() <= 3);
                assert!(p.target_text.split_whitespace().count() <= 2);
            }
        }
    }
}
