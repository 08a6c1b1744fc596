//! Task-family registry, mixing distributions, pre-finetuning schedules and
//! evaluation metrics for multi-task summarization experiments.
//!
//! The crate is `no_std` (with `alloc`); file formats, process trainers and
//! the command line live in the `mtlforge` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod experiments;
pub mod metrics;
pub mod mixing;
pub mod registry;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
pub use experiments::{
    combination_label, compare_to_baseline, family_combinations, lead_n_trainer, plan_rq, tabulate, Baseline,
    Delta, ExperimentPlan, LeadTrainer, Phase, PlanOptions, ResultsTable, RqTag, RunRecord, Trainer,
};
pub use metrics::{evaluate_corpus, Embedder, MetricField, MetricReport, Prf};
pub use mixing::{task_distribution, MixingStrategy, SamplingDistribution};
pub use registry::{synth_fixture, synth_registry, Example, FamilyId, FormatTemplate, Registry, SequenceLimits, TaskSpec, TextPair};
pub use rng::Rng;
pub use schedule::{
    build_schedule, materialize, Batch, Checkpoint, LoopOrder, Materializer, ScheduleManifest, SchemeConfig,
    SchemeKind,
};
