use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mtlforge::config::{keys_help, Config};
use mtlforge::dataset::{load_registry, write_synthetic, LoadedRegistry};
use mtlforge::run::{run_plans, trainer_factory, Layout, RunContext};
use mtlforge::trainer::{read_lines, serve_hashing, serve_lead, ProcessEmbedder};
use mtlforge::{manifest_file, plot, runlog, table, wire};
use mtlforge_core::{
    build_schedule, evaluate_corpus, materialize, plan_rq, tabulate, Baseline, Embedder, ExperimentPlan, MetricField,
    Phase, PlanOptions, RqTag, RunRecord,
};

/// Usage and configuration problems; these exit with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "mtlforge", version, about = "Plan, schedule, run and tabulate task-family pre-finetuning experiments")]
#[command(after_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// rq1, rq2, rq3 or rq4
    #[arg(long)]
    rq: Option<String>,
    /// Comma-separated schemes: seq, sim, cMTL
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// proportional or equal (seq/sim only)
    #[arg(long)]
    mixing: Option<String>,
    /// Master seed (falls back to config, then MTLFORGE_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// seq/sim batch budget
    #[arg(long)]
    budget: Option<u64>,
    /// cMTL per-stage quantum
    #[arg(long)]
    quantum: Option<u64>,
    /// cMTL loop order: ascending or descending
    #[arg(long)]
    order: Option<String>,
    /// Plans run in parallel
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic 18-task registry with downstream sets and a config
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        per_task: usize,
        #[arg(long, default_value_t = 8)]
        eval_size: usize,
        #[arg(long = "data-seed", default_value_t = 0)]
        data_seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "reddit_tifu,arxiv")]
        downstream: Vec<String>,
    },
    /// Write one plan file per experiment of a research question
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// Build the manifest of each plan file and print its digest
    Schedule {
        #[command(flatten)]
        common: Common,
        plans: Vec<PathBuf>,
    },
    /// Stream a manifest's batches to stdout in the trainer wire format
    Materialize {
        #[command(flatten)]
        common: Common,
        manifest: PathBuf,
        /// Stop after this many batches
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Run plans end to end and append their records to the run log
    Run {
        #[command(flatten)]
        common: Common,
        /// Directory of plan files; without it the configured matrix is planned
        #[arg(long)]
        plans: Option<PathBuf>,
    },
    /// Score line-aligned predictions against references
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Render result tables from the run log or an ingested CSV
    Tabulate {
        #[command(flatten)]
        common: Common,
        /// Long-format CSV (dataset,row,scheme,<metrics>) instead of the run log
        #[arg(long)]
        ingest: Option<PathBuf>,
        #[arg(long, default_value = "meteor")]
        metric: String,
        /// text, json or csv
        #[arg(long, default_value = "text")]
        format: String,
        /// Write one SVG bar chart per metric into this directory
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    #[command(hide = true)]
    Trainer {
        #[arg(long, default_value_t = 1)]
        lead: usize,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        heartbeat: u64,
    },
    #[command(hide = true)]
    Embedder {
        #[arg(long, default_value_t = 64)]
        dim: usize,
    },
}

fn seed_from_env() -> anyhow::Result<Option<u64>> {
    match std::env::var("MTLFORGE_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| usage(format!("MTLFORGE_SEED: not an integer: `{s}`"))),
        Err(_) => Ok(None),
    }
}

impl Common {
    /// Config file (or defaults) with flags applied and validated.
    fn config(&self) -> anyhow::Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p).map_err(|e| usage(e.to_string()))?,
            None => Config::default(),
        };
        if let Some(v) = &self.rq {
            c.rq = v.clone();
        }
        if let Some(v) = &self.schemes {
            c.schemes = v.clone();
        }
        if let Some(v) = &self.mixing {
            c.mixing = Some(v.clone());
        }
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        if c.seed.is_none() {
            c.seed = seed_from_env()?;
        }
        if self.budget.is_some() {
            c.budget = self.budget;
        }
        if let Some(v) = self.quantum {
            c.quantum = v;
        }
        if let Some(v) = &self.order {
            c.order = v.clone();
        }
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        c.validate().map_err(usage)?;
        Ok(c)
    }
}

fn plans_for(config: &Config, loaded: &LoadedRegistry) -> anyhow::Result<Vec<ExperimentPlan>> {
    let rq = config.rq_tag().map_err(usage)?;
    let mut datasets: Vec<String> = if config.downstream.is_empty() {
        loaded.downstream.iter().map(|d| d.name.clone()).collect()
    } else {
        config.downstream.clone()
    };
    if datasets.is_empty() {
        bail!("the registry lists no downstream datasets");
    }
    if rq == RqTag::Rq4 {
        datasets.truncate(1);
    }
    let mut plans = Vec::new();
    for d in datasets {
        if loaded.downstream(&d).is_none() {
            return Err(usage(format!("downstream: `{d}` is not in the registry")));
        }
        let options = PlanOptions {
            schemes: config.scheme_kinds().map_err(usage)?,
            downstream: d,
            seed: config.seed.unwrap_or(0),
            batch_size: config.batch_size,
            budget: config.budget,
            quantum: config.quantum,
            order: config.loop_order().map_err(usage)?,
            mixing: config.mixing_strategy().map_err(usage)?,
        };
        let mut batch = plan_rq(rq, &loaded.registry, &options)?;
        for p in &mut batch {
            p.scheme.sequential_epochs = config.sequential_epochs;
        }
        plans.extend(batch);
    }
    Ok(plans)
}

fn read_plan(path: &Path) -> anyhow::Result<ExperimentPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: not a plan file", path.display()))
}

fn plan_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn embedder(config: &Config) -> anyhow::Result<Option<ProcessEmbedder>> {
    config.embedder_command.as_ref().map(|argv| ProcessEmbedder::spawn(argv)).transpose().map_err(Into::into)
}

fn cmd_plan(common: &Common) -> anyhow::Result<()> {
    let config = common.config()?;
    let loaded = load_registry(&config.registry)?;
    let plans = plans_for(&config, &loaded)?;
    let layout = Layout::new(&config.out);
    for p in &plans {
        let path = layout.plans().join(format!("{}.json", p.id()));
        write(&path, (serde_json::to_string_pretty(p)? + "\n").as_bytes())?;
    }
    println!("{} plans written to {}", plans.len(), layout.plans().display());
    Ok(())
}

fn cmd_schedule(common: &Common, plans: &[PathBuf]) -> anyhow::Result<()> {
    let config = common.config()?;
    if plans.is_empty() {
        return Err(usage("schedule: give at least one plan file"));
    }
    let loaded = load_registry(&config.registry)?;
    let layout = Layout::new(&config.out);
    for path in plans {
        let plan = read_plan(path)?;
        let manifest = build_schedule(&loaded.registry, &plan.families, &plan.scheme)
            .with_context(|| format!("plan {}", plan.id()))?;
        let out = layout.manifests().join(format!("{}.jsonl", plan.id()));
        let digest = manifest_file::write(&out, &manifest)?;
        println!("{digest}  {}", out.display());
    }
    Ok(())
}

fn cmd_materialize(common: &Common, manifest: &Path, limit: Option<u64>) -> anyhow::Result<()> {
    let config = common.config()?;
    let loaded = load_registry(&config.registry)?;
    let (m, digest) = manifest_file::read(manifest)?;
    let total = limit.map_or(m.total_batches(), |l| l.min(m.total_batches()));
    let h = &config.hyperparameters;
    let limits = mtlforge_core::SequenceLimits::new(h.max_input_tokens, h.max_target_tokens)
        .ok_or_else(|| usage("hyperparameters: token limits must be positive"))?;
    let stdout = io::stdout();
    let header = wire::header(Phase::PreFinetune, total, &digest, h);
    let mut w = wire::BatchWriter::begin(BufWriter::new(stdout.lock()), &header)?;
    for batch in materialize(&m, &loaded.registry)?.with_limits(limits).take(total as usize) {
        w.write(&batch)?;
    }
    w.finish()?;
    Ok(())
}

fn cmd_run(common: &Common, plans_dir: Option<&Path>) -> anyhow::Result<()> {
    let config = common.config()?;
    let loaded = load_registry(&config.registry)?;
    let plans = match plans_dir {
        Some(dir) => plan_files(dir)?.iter().map(|p| read_plan(p)).collect::<anyhow::Result<Vec<_>>>()?,
        None => plans_for(&config, &loaded)?,
    };
    let emb = embedder(&config)?;
    let ctx = RunContext {
        loaded: &loaded,
        hyperparameters: &config.hyperparameters,
        embedder: emb.as_ref().map(|e| e as &(dyn Embedder + Sync)),
        record_wall_time: config.record_wall_time,
    };
    let layout = Layout::new(&config.out);
    let factory = trainer_factory(&config).map_err(|e| usage(e.to_string()))?;
    let s = run_plans(&plans, &ctx, &layout, config.jobs, factory)?;
    println!(
        "{} runs, {} already logged, {} baselines; log {}",
        s.ran,
        s.skipped,
        s.baselines,
        layout.run_log().display()
    );
    Ok(())
}

fn cmd_eval(common: &Common, pred: &Path, reference: &Path) -> anyhow::Result<()> {
    let config = common.config()?;
    let p = read_lines(pred)?;
    let r = read_lines(reference)?;
    let emb = embedder(&config)?;
    let report = evaluate_corpus(&p, &r, emb.as_ref().map(|e| e as &dyn Embedder))
        .with_context(|| format!("scoring {} against {}", pred.display(), reference.display()))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_tabulate(
    common: &Common,
    ingest: Option<&Path>,
    metric: &str,
    format: &str,
    plot_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let metric: MetricField = metric.parse().map_err(usage)?;
    if !["text", "json", "csv"].contains(&format) {
        return Err(usage(format!("--format: expected text, json or csv, got `{format}`")));
    }
    let (records, baselines): (Vec<RunRecord>, Vec<Baseline>) = match ingest {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let ing = table::ingest_csv(&text, path)?;
            (ing.records, ing.baselines)
        }
        None => {
            let config = common.config()?;
            let rq = config.rq_tag().map_err(usage)?;
            let layout = Layout::new(&config.out);
            let records: Vec<RunRecord> =
                runlog::read::<RunRecord>(&layout.run_log())?.into_iter().filter(|r| r.plan.rq == rq).collect();
            if records.is_empty() {
                bail!("no {rq} records in {}", layout.run_log().display());
            }
            (records, runlog::read(&layout.baseline_log())?)
        }
    };
    let t = tabulate(&records, metric, &baselines)?;
    let rendered = match format {
        "json" => table::render_json(&t),
        "csv" => table::render_csv(&t),
        _ => table::render_text(&t),
    };
    print!("{rendered}");
    if let Some(dir) = plot_dir {
        for m in MetricField::ALL {
            let t = tabulate(&records, m, &baselines)?;
            if t.cells.iter().flatten().all(Option::is_none) {
                continue;
            }
            let path = dir.join(format!("{}.svg", m.name()));
            write(&path, plot::bar_chart(&t).as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_synth(dir: &Path, per_task: usize, eval_size: usize, seed: u64, downstream: &[String]) -> anyhow::Result<()> {
    if per_task == 0 || eval_size == 0 {
        return Err(usage("--per-task and --eval-size must be positive"));
    }
    let names: Vec<&str> = downstream.iter().map(String::as_str).collect();
    let registry = write_synthetic(dir, per_task, eval_size, seed, &names)?;
    let config = dir.join("config.toml");
    if !config.exists() {
        write(&config, b"registry = \"registry.toml\"\nout = \"out\"\n")?;
    }
    println!("{}", registry.display());
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Synth { dir, per_task, eval_size, data_seed, downstream } => {
            cmd_synth(&dir, per_task, eval_size, data_seed, &downstream)
        }
        Cmd::Plan { common } => cmd_plan(&common),
        Cmd::Schedule { common, plans } => cmd_schedule(&common, &plans),
        Cmd::Materialize { common, manifest, limit } => cmd_materialize(&common, &manifest, limit),
        Cmd::Run { common, plans } => cmd_run(&common, plans.as_deref()),
        Cmd::Eval { common, pred, reference } => cmd_eval(&common, &pred, &reference),
        Cmd::Tabulate { common, ingest, metric, format, plot } => {
            cmd_tabulate(&common, ingest.as_deref(), &metric, &format, plot.as_deref())
        }
        Cmd::Trainer { lead, eval, out, heartbeat } => {
            let stdin = io::stdin();
            serve_lead(stdin.lock(), &eval, &out, lead, heartbeat, &mut io::stderr())?;
            Ok(())
        }
        Cmd::Embedder { dim } => {
            if dim == 0 {
                return Err(usage("--dim must be positive"));
            }
            serve_hashing(io::stdin().lock(), io::stdout().lock(), dim)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::stdout().flush();
            if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
