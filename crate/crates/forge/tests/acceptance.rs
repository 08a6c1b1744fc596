//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

mod common;
#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use mtlforge::{manifest_file, runlog};
use mtlforge_core::metrics::{bertscore_greedy, meteor, EmbeddedTokens};
use mtlforge_core::registry::TAXONOMY;
use mtlforge_core::schedule::{build_cmtl, build_sequential};
use mtlforge_core::{
    materialize, plan_rq, synth_registry, task_distribution, Error, FamilyId, MetricReport, MixingStrategy,
    PlanOptions, Registry, Rng, RqTag, RunRecord, SchemeConfig, SchemeKind,
};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> std::result::Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))?;
    Ok(t)
}

fn cmtl_conservation() -> Check {
    let start = Instant::now();
    let r = Registry::with_taxonomy(|_, _| 100);
    let names: Vec<String> = TAXONOMY.iter().map(|(_, n)| n.to_string()).collect();
    let mut c = SchemeConfig::new(SchemeKind::Cmtl, 6);
    c.quantum = 500;
    let m = build_cmtl(&r, &names, &c).map_err(|e| e.to_string())?;
    let per_task = m.batches_per_task();
    ensure(per_task.len() == 18 && per_task.values().all(|&b| b == 9000), || format!("per task {per_task:?}"))?;
    let mut per_family: BTreeMap<FamilyId, u64> = BTreeMap::new();
    for (f, name) in TAXONOMY {
        *per_family.entry(f).or_default() += per_task[name];
    }
    ensure(per_family.values().all(|&b| b == 27_000), || format!("per family {per_family:?}"))?;
    let s3: Vec<(Option<&str>, u64)> = m.stages[2].entries.iter().map(|e| (e.task.as_deref(), e.batches)).collect();
    ensure(s3 == [(Some("ag_news"), 1500), (Some("goemotions"), 500), (Some("imdb"), 500)], || format!("stage 3 {s3:?}"))?;
    let t = within(start, Duration::from_secs(1))?;
    Ok(format!("9000 per task, 27000 per family, stage 3 = 1500/500/500 in {t:?}"))
}

fn mixing_law() -> Check {
    let start = Instant::now();
    let sizes: Vec<u64> = (0..18).map(|i| 37 + (i as u64 * 7919) % 1000).collect();
    let reg = Registry::with_taxonomy({
        let mut it = sizes.clone().into_iter();
        move |_, _| it.next().unwrap()
    });
    let dist = task_distribution(&FamilyId::ALL, &reg, MixingStrategy::Proportional).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(2024);
    let draws = 100_000u64;
    let mut by_task = [0u64; 18];
    for _ in 0..draws {
        by_task[dist.pick(&mut rng)] += 1;
    }
    let mut worst_family = 0.0f64;
    let mut worst_within = 0.0f64;
    for f in FamilyId::ALL {
        let idx: Vec<usize> = (0..18).filter(|&i| TAXONOMY[i].0 == f).collect();
        let fam: u64 = idx.iter().map(|&i| by_task[i]).sum();
        worst_family = worst_family.max((fam as f64 / draws as f64 - 1.0 / 6.0).abs());
        let fam_size: u64 = idx.iter().map(|&i| sizes[i]).sum();
        for &i in &idx {
            let within = by_task[i] as f64 / fam as f64;
            worst_within = worst_within.max((within - sizes[i] as f64 / fam_size as f64).abs());
        }
    }
    ensure(worst_family <= 0.005, || format!("family deviation {worst_family:.4}"))?;
    ensure(worst_within <= 0.01, || format!("within-family deviation {worst_within:.4}"))?;
    let t = within(start, Duration::from_secs(10))?;
    Ok(format!("max family dev {worst_family:.4}, max within dev {worst_within:.4} in {t:?}"))
}

fn sequential_exactness() -> Check {
    let mut rng = Rng::new(0x5eed);
    let mut materialized = 0;
    for case in 0..200 {
        let counts: Vec<usize> = (0..18).map(|_| 1 + rng.below(11) as usize).collect();
        let fams: Vec<FamilyId> = loop {
            let mask = rng.below(64);
            if mask != 0 {
                break FamilyId::ALL.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, f)| *f).collect();
            }
        };
        let mut it = counts.into_iter();
        let reg = synth_registry(move |_, _, _| it.next().unwrap(), 1);
        let mut c = SchemeConfig::new(SchemeKind::Sequential, fams.len());
        c.mixing = if rng.below(2) == 0 { MixingStrategy::Proportional } else { MixingStrategy::Equal };
        c.batch_size = 1 + rng.below(4) as u32;
        c.seed = rng.next_u64();
        c.sequential_epochs = 1 + rng.below(3) as u32;
        let extra = rng.below(2000);
        c.budget_steps = 1 + extra;
        let m = match build_sequential(&reg, &fams, &c) {
            Ok(m) => m,
            Err(Error::BudgetTooSmall { minimum, .. }) => {
                c.budget_steps = minimum + extra;
                build_sequential(&reg, &fams, &c).map_err(|e| format!("case {case}: {e}"))?
            }
            Err(e) => return Err(format!("case {case}: {e}")),
        };
        ensure(m.total_batches() == c.budget_steps, || {
            format!("case {case}: {} batches for budget {}", m.total_batches(), c.budget_steps)
        })?;
        ensure(m.stages.iter().flat_map(|s| &s.entries).all(|e| e.task.is_some()), || format!("case {case}: pooled entry"))?;
        if c.budget_steps <= 400 {
            let mut n = 0;
            for b in materialize(&m, &reg).map_err(|e| format!("case {case}: {e}"))? {
                let task = b.task.clone().unwrap_or_default();
                ensure(b.homogeneous && b.examples.iter().all(|e| e.task_name == task), || {
                    format!("case {case}: mixed batch at {n}")
                })?;
                n += 1;
            }
            ensure(n == c.budget_steps, || format!("case {case}: streamed {n} of {}", c.budget_steps))?;
            materialized += 1;
        }
    }
    Ok(format!("200 configs exact, {materialized} streamed batch by batch"))
}

fn metric_oracles() -> Check {
    let start = Instant::now();
    let pairs = oracles::exhaustive_metric_check(6, 1e-9)?;
    let m = meteor("the cat", "the cat");
    ensure(m == 0.9375, || format!("METEOR identity {m}"))?;
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!("{pairs} canonical pairs agree, METEOR identity 0.9375 in {t:?}"))
}

fn bertscore_matching() -> Check {
    let mut rng = Rng::new(5);
    let units = |rng: &mut Rng, n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..16).map(|_| rng.next_f64() * 2.0 - 1.0).collect()).collect()
    };
    let toks = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    let mut worst = 0.0f64;
    for nc in 1..=8 {
        for nr in 1..=8 {
            let (a, b) = (units(&mut rng, nc), units(&mut rng, nr));
            let ea = EmbeddedTokens::normalized(toks(nc), a.clone()).map_err(|e| e.to_string())?;
            let eb = EmbeddedTokens::normalized(toks(nr), b.clone()).map_err(|e| e.to_string())?;
            let got = bertscore_greedy(&ea, &eb).map_err(|e| e.to_string())?;
            let (p, r, f) = oracles::bertscore(&a, &b);
            for d in [got.precision - p, got.recall - r, got.f_score - f] {
                worst = worst.max(d.abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("64 size pairs, max deviation {worst:.1e}"))
}

fn plan_counts() -> Check {
    let reg = synth_registry(|_, _, _| 2, 0);
    let mut got = Vec::new();
    for (rq, want) in [(RqTag::Rq1, 7), (RqTag::Rq2, 5), (RqTag::Rq3, 10), (RqTag::Rq4, 20)] {
        for kind in SchemeKind::ALL {
            let opts = PlanOptions { schemes: vec![kind], ..PlanOptions::default() };
            let n = plan_rq(rq, &reg, &opts).map_err(|e| e.to_string())?.len();
            ensure(n == want, || format!("{} {}: {n} plans, expected {want}", rq, kind.short()))?;
        }
        got.push(format!("{}={want}", rq));
    }
    Ok(format!("{} per scheme", got.join(" ")))
}

fn table_marks() -> Check {
    for g in &GRIDS {
        check_marks(&load_grid(g.file), g).map_err(|e| format!("{}: {e}", g.file))?;
    }
    Ok("bold and underline cells match for rq1..rq4 METEOR grids".into())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = synth(dir.path(), "budget = 60\nquantum = 2\n");
    let mut outs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(bin().arg("run").arg("--config").arg(&config).args(["--rq", "rq2", "--seed", "7", "--out"]).arg(&out));
        ensure(o.status.success(), || stderr(&o))?;
        outs.push(out);
    }
    let read = |p: &Path| fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    ensure(read(&outs[0].join("runs.jsonl"))? == read(&outs[1].join("runs.jsonl"))?, || "run logs differ".into())?;
    ensure(read(&outs[0].join("baselines.jsonl"))? == read(&outs[1].join("baselines.jsonl"))?, || "baseline logs differ".into())?;
    let mut manifests = 0;
    for entry in fs::read_dir(outs[0].join("runs")).map_err(|e| e.to_string())? {
        let id = entry.map_err(|e| e.to_string())?.file_name();
        for file in ["manifest.jsonl", "finetune_manifest.jsonl"] {
            let (a, b) = (read(&outs[0].join("runs").join(&id).join(file))?, read(&outs[1].join("runs").join(&id).join(file))?);
            ensure(a == b, || format!("{id:?}/{file} differs"))?;
        }
        manifests += 1;
    }
    ensure(manifests == 15, || format!("{manifests} manifests"))?;
    Ok(format!("{manifests} manifests and both logs byte-identical"))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = synth(dir.path(), "budget = 60\nquantum = 2\n");
    let step = |args: &[&str], extra: &[&Path]| -> std::result::Result<String, String> {
        let o = run(bin().args(args).args(extra).arg("--config").arg(&config));
        ensure(o.status.success(), || format!("{}: {}", args[0], stderr(&o)))?;
        Ok(stdout(&o))
    };
    step(&["plan", "--rq", "rq1", "--schemes", "sim"], &[])?;
    let plan = dir.path().join("out/plans/rq1-sum-sim-reddit_tifu.json");
    let scheduled = step(&["schedule"], &[&plan])?;
    let (digest, path) = scheduled.trim().split_once("  ").ok_or("schedule output")?;
    let (_, d) = manifest_file::read(Path::new(path)).map_err(|e| e.to_string())?;
    ensure(d == digest, || "schedule digest mismatch".into())?;
    step(&["run", "--rq", "rq1", "--schemes", "sim", "--plans"], &[&dir.path().join("out/plans")])?;
    let records: Vec<RunRecord> = runlog::read(&dir.path().join("out/runs.jsonl")).map_err(|e| e.to_string())?;
    ensure(records.len() == 7, || format!("{} records", records.len()))?;
    ensure(records.iter().all(|r| r.report.rouge1_f == 1.0 && r.trainer == "lead-1"), || "record rouge1_f below 1".into())?;

    let eval = fs::read_to_string(dir.path().join("data/reddit_tifu.eval.jsonl")).map_err(|e| e.to_string())?;
    let refs: Vec<String> = eval
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).map(|v| v["summary"].as_str().unwrap_or("").to_string()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ref_path = dir.path().join("refs.txt");
    fs::write(&ref_path, refs.join("\n") + "\n").map_err(|e| e.to_string())?;
    let pred = dir.path().join("out/runs").join(records[0].plan.id()).join("predictions.txt");
    let report: MetricReport =
        serde_json::from_str(&step(&["eval"], &[Path::new("--pred"), &pred, Path::new("--ref"), &ref_path])?)
            .map_err(|e| e.to_string())?;
    ensure(report.rouge1_f == 1.0, || format!("eval rouge1_f {}", report.rouge1_f))?;

    let table = step(&["tabulate", "--rq", "rq1", "--metric", "rouge1"], &[])?;
    ensure(table.contains("SUM") && table.contains("1.000"), || table.clone())?;
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!("plan, schedule, run, eval, tabulate with rouge1_f = 1.0 in {t:?}"))
}

fn main() {
    let checks: [Criterion; 9] = [
        ("cmtl-conservation", cmtl_conservation),
        ("mixing-law", mixing_law),
        ("sequential-homogeneity-budget", sequential_exactness),
        ("metric-oracles", metric_oracles),
        ("bertscore-matching", bertscore_matching),
        ("plan-matrix-counts", plan_counts),
        ("table-ingestion-marks", table_marks),
        ("determinism", determinism),
        ("end-to-end-smoke", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
