//! Two-phase runs: pre-finetuning on a plan's manifest, finetuning on the
//! downstream training split, then prediction and scoring on its eval split.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mtlforge_core::{
    build_schedule, evaluate_corpus, materialize, Baseline, Embedder, ExperimentPlan, FamilyId, MixingStrategy,
    Phase, RunRecord, ScheduleManifest, SchemeConfig, SchemeKind, SequenceLimits, Trainer,
};
use rayon::prelude::*;

use crate::config::{Config, Hyperparameters};
use crate::dataset::{Downstream, LoadedRegistry};
use crate::error::{Error, Result};
use crate::manifest_file;
use crate::runlog::{self, RunLog};
use crate::trainer::write_lines;

pub type BoxedTrainer = Box<dyn Trainer + Send>;

/// Shared, read-only inputs of a batch of runs.
pub struct RunContext<'a> {
    pub loaded: &'a LoadedRegistry,
    pub hyperparameters: &'a Hyperparameters,
    pub embedder: Option<&'a (dyn Embedder + Sync)>,
    pub record_wall_time: bool,
}

fn limits(max_input: usize, max_target: usize, key: &str) -> Result<SequenceLimits> {
    SequenceLimits::new(max_input, max_target)
        .ok_or_else(|| Error::Protocol(format!("hyperparameters.{key}: token limits must be positive")))
}

/// Sequential manifest over the downstream training split:
/// `ceil(epochs * n / batch_size)` batches, one permutation per epoch.
pub fn finetune_manifest(downstream: &Downstream, batch_size: u32, epochs: u32, seed: u64) -> Result<ScheduleManifest> {
    let registry = downstream.train_registry()?;
    let n = downstream.train.len() as u64;
    let mut cfg = SchemeConfig::new(SchemeKind::Sequential, 1);
    cfg.mixing = MixingStrategy::Proportional;
    cfg.batch_size = batch_size;
    cfg.budget_steps = (epochs.max(1) as u64 * n).div_ceil(batch_size as u64).max(1);
    cfg.sequential_epochs = epochs.max(1);
    cfg.seed = seed;
    Ok(build_schedule(&registry, &[FamilyId::Sum], &cfg)?)
}

/// Streams every batch of `manifest` through the trainer and checks that the
/// trainer saw exactly the manifest total.
fn stream_phase(
    trainer: &mut dyn Trainer,
    phase: Phase,
    manifest: &ScheduleManifest,
    registry: &mtlforge_core::Registry,
    digest: &str,
    limits: SequenceLimits,
) -> Result<u64> {
    let total = manifest.total_batches();
    let before = trainer.batches_seen(phase);
    trainer.begin_phase(phase, total, digest)?;
    for batch in materialize(manifest, registry)?.with_limits(limits) {
        trainer.consume(&batch)?;
    }
    trainer.end_phase()?;
    let seen = trainer.batches_seen(phase) - before;
    if seen != total {
        return Err(Error::Protocol(format!("{}: trainer saw {seen} of {total} batches", phase.name())));
    }
    Ok(seen)
}

/// Writes `manifest` into `dir/name`, then re-reads it so the stream comes
/// from the exact bytes the digest covers.
fn persist(manifest: &ScheduleManifest, path: &Path) -> Result<(ScheduleManifest, String)> {
    manifest_file::write(path, manifest)?;
    manifest_file::read(path)
}

fn finetune_and_score(
    downstream: &Downstream,
    trainer: &mut dyn Trainer,
    ctx: &RunContext<'_>,
    batch_size: u32,
    seed: u64,
    dir: &Path,
) -> Result<(mtlforge_core::MetricReport, u64)> {
    let h = ctx.hyperparameters;
    let ft = finetune_manifest(downstream, batch_size, h.epochs, seed)?;
    let (ft, ft_digest) = persist(&ft, &dir.join("finetune_manifest.jsonl"))?;
    let ft_registry = downstream.train_registry()?;
    let ft_limits = limits(h.finetune_max_input_tokens, h.finetune_max_target_tokens, "finetune_max_*_tokens")?;
    let finetuned = stream_phase(trainer, Phase::Finetune, &ft, &ft_registry, &ft_digest, ft_limits)?;

    let inputs = downstream.eval_inputs();
    let predictions = trainer.predict(&inputs)?;
    if predictions.len() != inputs.len() {
        return Err(Error::Protocol(format!("{} predictions for {} eval inputs", predictions.len(), inputs.len())));
    }
    write_lines(&dir.join("predictions.txt"), &predictions)?;
    let report = evaluate_corpus(&predictions, &downstream.eval_targets(), ctx.embedder.map(|e| e as &dyn Embedder))?;
    Ok((report, finetuned))
}

fn downstream<'a>(loaded: &'a LoadedRegistry, name: &str) -> Result<&'a Downstream> {
    loaded.downstream(name).ok_or_else(|| Error::Protocol(format!("no downstream dataset `{name}` in the registry")))
}

/// Runs one plan end to end, leaving its manifests and predictions in `dir`.
pub fn run_experiment(
    plan: &ExperimentPlan,
    trainer: &mut dyn Trainer,
    ctx: &RunContext<'_>,
    dir: &Path,
) -> Result<RunRecord> {
    let start = Instant::now();
    let ds = downstream(ctx.loaded, &plan.downstream)?;
    let manifest = build_schedule(&ctx.loaded.registry, &plan.families, &plan.scheme)?;
    let (manifest, digest) = persist(&manifest, &dir.join("manifest.jsonl"))?;
    let h = ctx.hyperparameters;
    let pre_limits = limits(h.max_input_tokens, h.max_target_tokens, "max_*_tokens")?;
    let pre = stream_phase(trainer, Phase::PreFinetune, &manifest, &ctx.loaded.registry, &digest, pre_limits)?;
    let (report, ft) = finetune_and_score(ds, trainer, ctx, plan.scheme.batch_size, plan.seed, dir)?;
    Ok(RunRecord {
        plan: plan.clone(),
        report,
        wall_time: ctx.record_wall_time.then(|| start.elapsed().as_secs_f64()),
        manifest_digest: digest,
        trainer: trainer.id(),
        prefinetune_batches: pre,
        finetune_batches: ft,
    })
}

/// The downstream model without pre-finetuning: finetune, predict, score.
pub fn run_baseline(
    dataset: &str,
    trainer: &mut dyn Trainer,
    ctx: &RunContext<'_>,
    batch_size: u32,
    seed: u64,
    dir: &Path,
) -> Result<Baseline> {
    let ds = downstream(ctx.loaded, dataset)?;
    let (report, _) = finetune_and_score(ds, trainer, ctx, batch_size, seed, dir)?;
    Ok(Baseline { dataset: dataset.into(), report })
}

/// Output layout under a run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn plans(&self) -> PathBuf {
        self.root.join("plans")
    }

    pub fn manifests(&self) -> PathBuf {
        self.root.join("manifests")
    }

    pub fn run_dir(&self, plan: &ExperimentPlan) -> PathBuf {
        self.root.join("runs").join(plan.id())
    }

    pub fn baseline_dir(&self, dataset: &str) -> PathBuf {
        self.root.join("baselines").join(dataset)
    }

    pub fn run_log(&self) -> PathBuf {
        self.root.join("runs.jsonl")
    }

    pub fn baseline_log(&self) -> PathBuf {
        self.root.join("baselines.jsonl")
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Summary {
    pub ran: usize,
    pub skipped: usize,
    pub baselines: usize,
}

/// Runs every plan not already in the run log (matched by plan id), up to
/// `jobs` at a time, then appends the new records in plan order. Missing
/// baselines for the plans' datasets are run and logged first.
pub fn run_plans<F>(
    plans: &[ExperimentPlan],
    ctx: &RunContext<'_>,
    layout: &Layout,
    jobs: usize,
    make_trainer: F,
) -> Result<Summary>
where
    F: Fn(&Path) -> Result<BoxedTrainer> + Sync,
{
    let mut summary = Summary::default();

    let mut baseline_log = RunLog::open::<Baseline>(&layout.baseline_log())?;
    let have: Vec<Baseline> = runlog::read(&layout.baseline_log())?;
    let mut datasets: Vec<&str> = Vec::new();
    for p in plans {
        if !datasets.contains(&p.downstream.as_str()) && !have.iter().any(|b| b.dataset == p.downstream) {
            datasets.push(&p.downstream);
        }
    }
    for d in datasets {
        let first = plans.iter().find(|p| p.downstream == d).expect("dataset came from a plan");
        let dir = layout.baseline_dir(d);
        let mut trainer = make_trainer(&dir)?;
        let b = run_baseline(d, trainer.as_mut(), ctx, first.scheme.batch_size, first.seed, &dir)?;
        baseline_log.append(&b)?;
        summary.baselines += 1;
    }

    let mut log = RunLog::open::<RunRecord>(&layout.run_log())?;
    let done: Vec<String> = runlog::read::<RunRecord>(&layout.run_log())?.iter().map(|r| r.plan.id()).collect();
    let todo: Vec<&ExperimentPlan> = plans.iter().filter(|p| !done.contains(&p.id())).collect();
    summary.skipped = plans.len() - todo.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Protocol(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        todo.par_iter()
            .map(|plan| {
                let dir = layout.run_dir(plan);
                let mut trainer = make_trainer(&dir)?;
                run_experiment(plan, trainer.as_mut(), ctx, &dir)
                    .map_err(|e| Error::Protocol(format!("plan {}: {e}", plan.id())))
            })
            .collect()
    });
    let mut first_err = None;
    for r in results {
        match r {
            Ok(record) => {
                log.append(&record)?;
                summary.ran += 1;
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// The trainer factory a config describes.
pub fn trainer_factory(config: &Config) -> Result<impl Fn(&Path) -> Result<BoxedTrainer> + Sync + '_> {
    let lead = match &config.trainer_command {
        Some(_) => None,
        None => Some(config.lead_n().map_err(|message| Error::Config { path: "trainer".into(), message })?),
    };
    Ok(move |dir: &Path| -> Result<BoxedTrainer> {
        match (lead, &config.trainer_command) {
            (Some(n), _) => Ok(Box::new(mtlforge_core::lead_n_trainer(n)?)),
            (None, Some(argv)) => {
                Ok(Box::new(crate::trainer::ProcessTrainer::spawn(argv, dir, &config.hyperparameters)?))
            }
            (None, None) => unreachable!("one of the two is set"),
        }
    })
}
