//! Within-family mixing (proportional or equal) composed with an equal draw
//! between families.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{FamilyId, Registry};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MixingStrategy {
    /// Probability proportional to each task's example count.
    Proportional,
    /// Uniform over the tasks of a family.
    Equal,
}

impl fmt::Display for MixingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixingStrategy::Proportional => "proportional",
            MixingStrategy::Equal => "equal",
        })
    }
}

impl FromStr for MixingStrategy {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "proportional" | "prop" => Ok(MixingStrategy::Proportional),
            "equal" | "eq" => Ok(MixingStrategy::Equal),
            other => Err(alloc::format!("unknown mixing strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub task: String,
    pub family: FamilyId,
    pub probability: f64,
}

/// Per-task sampling probabilities, in registry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDistribution {
    pub strategy: MixingStrategy,
    pub families: Vec<FamilyId>,
    pub entries: Vec<DistributionEntry>,
}

impl SamplingDistribution {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, task: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.task == task).map(|e| e.probability)
    }

    /// Draws an entry index by inverse-CDF over the entries in order.
    pub fn pick(&self, rng: &mut Rng) -> usize {
        let u = rng.next_f64();
        let mut acc = 0.0;
        for (i, e) in self.entries.iter().enumerate() {
            acc += e.probability;
            if u < acc {
                return i;
            }
        }
        // u fell into the rounding gap above the last cumulative sum
        self.entries.len() - 1
    }
}

/// A task's exact probability `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    /// Registry index of the task.
    pub task: usize,
    pub numerator: u64,
    pub denominator: u64,
}

/// Exact per-task shares in registry order, plus the sorted family selection.
pub fn task_shares(
    families: &[FamilyId],
    registry: &Registry,
    within: MixingStrategy,
) -> Result<(Vec<FamilyId>, Vec<Share>)> {
    let selected: BTreeSet<FamilyId> = families.iter().copied().collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n_families = selected.len() as u64;

    let mut shares = Vec::new();
    for &family in &selected {
        let tasks: Vec<(usize, u64)> = registry
            .tasks()
            .enumerate()
            .filter(|(_, t)| t.family == family)
            .map(|(i, t)| (i, t.size))
            .collect();
        let total: u64 = tasks.iter().map(|(_, s)| s).sum();
        if total == 0 {
            return Err(Error::EmptyFamily(family));
        }
        if let Some((i, _)) = tasks.iter().find(|(_, s)| *s == 0) {
            return Err(Error::ZeroSizeTask(registry.spec_at(*i).name.clone()));
        }
        for &(task, size) in &tasks {
            let (numerator, within_den) = match within {
                MixingStrategy::Proportional => (size, total),
                MixingStrategy::Equal => (1, tasks.len() as u64),
            };
            shares.push(Share { task, numerator, denominator: n_families * within_den });
        }
    }
    shares.sort_by_key(|s| s.task);
    Ok((selected.into_iter().collect(), shares))
}

pub fn task_distribution(
    families: &[FamilyId],
    registry: &Registry,
    within: MixingStrategy,
) -> Result<SamplingDistribution> {
    let (families, shares) = task_shares(families, registry, within)?;
    Ok(SamplingDistribution {
        strategy: within,
        families,
        entries: shares
            .into_iter()
            .map(|s| {
                let spec = registry.spec_at(s.task);
                DistributionEntry {
                    task: spec.name.clone(),
                    family: spec.family,
                    probability: s.numerator as f64 / s.denominator as f64,
                }
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draw {
    pub task: String,
    pub example_index: u64,
}

/// Picks a task from `dist`, then an example index uniformly from that task.
pub fn draw_example(dist: &SamplingDistribution, registry: &Registry, rng: &mut Rng) -> Result<Draw> {
    let entry = &dist.entries[dist.pick(rng)];
    let spec = registry.get(&entry.task).ok_or_else(|| Error::UnknownTask(entry.task.clone()))?;
    if spec.size == 0 {
        return Err(Error::ZeroSizeTask(spec.name.clone()));
    }
    Ok(Draw { task: spec.name.clone(), example_index: rng.below(spec.size) })
}
