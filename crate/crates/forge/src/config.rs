//! The TOML run configuration. Flags given on the command line override it.

use std::fs;
use std::path::{Path, PathBuf};

use mtlforge_core::{LoopOrder, MixingStrategy, RqTag, SchemeKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer and sequence settings passed through, unchanged, to trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub optimizer: String,
    pub learning_rate: f64,
    pub lr_schedule: String,
    pub dropout: f64,
    pub weight_decay: f64,
    pub warmup_steps: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: u32,
    pub fp16: bool,
    pub max_input_tokens: usize,
    pub max_target_tokens: usize,
    pub finetune_max_input_tokens: usize,
    pub finetune_max_target_tokens: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            optimizer: "AdamW".into(),
            learning_rate: 5e-05,
            lr_schedule: "linear".into(),
            dropout: 0.1,
            weight_decay: 0.0,
            warmup_steps: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-08,
            epochs: 3,
            fp16: true,
            max_input_tokens: 512,
            max_target_tokens: 128,
            finetune_max_input_tokens: 1024,
            finetune_max_target_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub registry: PathBuf,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub rq: String,
    pub schemes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixing: Option<String>,
    pub batch_size: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    pub quantum: u64,
    pub order: String,
    pub sequential_epochs: u32,
    pub downstream: Vec<String>,
    pub trainer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trainer_command: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedder_command: Option<Vec<String>>,
    pub jobs: usize,
    pub record_wall_time: bool,
    pub hyperparameters: Hyperparameters,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            registry: "registry.toml".into(),
            out: "out".into(),
            seed: None,
            rq: "rq1".into(),
            schemes: SchemeKind::ALL.iter().map(|k| k.short().to_string()).collect(),
            mixing: None,
            batch_size: mtlforge_core::schedule::DEFAULT_BATCH_SIZE,
            budget: None,
            quantum: mtlforge_core::schedule::DEFAULT_QUANTUM,
            order: "ascending".into(),
            sequential_epochs: 1,
            downstream: Vec::new(),
            trainer: "lead-1".into(),
            trainer_command: None,
            embedder_command: None,
            jobs: 1,
            record_wall_time: false,
            hyperparameters: Hyperparameters::default(),
        }
    }
}

/// Every configuration key with a one-line description; `--help` prints this.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("registry", "registry manifest path, relative to the config file (default registry.toml)"),
    ("out", "output directory, relative to the config file (default out)"),
    ("seed", "master seed; falls back to MTLFORGE_SEED, then 0"),
    ("rq", "research question matrix: rq1, rq2, rq3 or rq4 (default rq1)"),
    ("schemes", "schemes to plan: any of seq, sim, cMTL (default all three)"),
    ("mixing", "within-family mixing for seq/sim: proportional or equal; cMTL always uses equal"),
    ("batch_size", "examples per batch (default 8)"),
    ("budget", "seq/sim batch budget (default 10000 per family, at most 60000)"),
    ("quantum", "cMTL batches per replayed task and stage (default 500)"),
    ("order", "cMTL loop order: ascending or descending (default ascending)"),
    ("sequential_epochs", "seq passes, each with a fresh task order (default 1)"),
    ("downstream", "downstream datasets to evaluate on (default: all in the registry; rq4 uses the first)"),
    ("trainer", "built-in trainer, lead-N (default lead-1)"),
    ("trainer_command", "external trainer process argv; replaces `trainer`"),
    ("embedder_command", "external embedding provider argv; enables BERTScore"),
    ("jobs", "plans run in parallel (default 1)"),
    ("record_wall_time", "store wall-clock seconds in run records (default false)"),
    ("hyperparameters.optimizer", "passed to trainers (default AdamW)"),
    ("hyperparameters.learning_rate", "default 5e-05"),
    ("hyperparameters.lr_schedule", "default linear"),
    ("hyperparameters.dropout", "default 0.1"),
    ("hyperparameters.weight_decay", "default 0"),
    ("hyperparameters.warmup_steps", "default 0"),
    ("hyperparameters.adam_beta1", "default 0.9"),
    ("hyperparameters.adam_beta2", "default 0.999"),
    ("hyperparameters.adam_epsilon", "default 1e-08"),
    ("hyperparameters.epochs", "finetuning epochs (default 3)"),
    ("hyperparameters.fp16", "half precision flag for trainers (default true)"),
    ("hyperparameters.max_input_tokens", "pre-finetuning input truncation (default 512)"),
    ("hyperparameters.max_target_tokens", "pre-finetuning target truncation (default 128)"),
    ("hyperparameters.finetune_max_input_tokens", "finetuning input truncation (default 1024)"),
    ("hyperparameters.finetune_max_target_tokens", "finetuning target truncation (default 512)"),
];

pub fn keys_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (TOML; flags override):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:width$}  {d}\n"));
    }
    s
}

impl Config {
    /// Reads a config file; relative `registry` and `out` paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| Error::Config { path: path.into(), message: e.message().to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.registry = base.join(&cfg.registry);
        cfg.out = base.join(&cfg.out);
        cfg.validate().map_err(|message| Error::Config { path: path.into(), message })?;
        Ok(cfg)
    }

    /// Checks the string-typed keys, naming the offending key.
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.rq_tag()?;
        self.scheme_kinds()?;
        self.mixing_strategy()?;
        self.loop_order()?;
        if self.trainer_command.is_none() {
            self.lead_n()?;
        }
        if self.batch_size == 0 {
            return Err("batch_size: must be positive".into());
        }
        if self.quantum == 0 {
            return Err("quantum: must be positive".into());
        }
        Ok(())
    }

    pub fn rq_tag(&self) -> std::result::Result<RqTag, String> {
        self.rq.parse::<RqTag>().map_err(|e| format!("rq: {e}"))
    }

    pub fn scheme_kinds(&self) -> std::result::Result<Vec<SchemeKind>, String> {
        self.schemes.iter().map(|s| s.parse::<SchemeKind>().map_err(|e| format!("schemes: {e}"))).collect()
    }

    pub fn mixing_strategy(&self) -> std::result::Result<Option<MixingStrategy>, String> {
        self.mixing.as_deref().map(|m| m.parse().map_err(|e| format!("mixing: {e}"))).transpose()
    }

    pub fn loop_order(&self) -> std::result::Result<LoopOrder, String> {
        self.order.parse::<LoopOrder>().map_err(|e| format!("order: {e}"))
    }

    pub fn lead_n(&self) -> std::result::Result<usize, String> {
        self.trainer
            .strip_prefix("lead-")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| format!("trainer: unknown trainer `{}` (expected lead-N)", self.trainer))
    }
}
