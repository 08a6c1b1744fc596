//! Line-delimited dataset files and the registry manifest.
//!
//! A dataset file holds one JSON object per line with string values; `id` and
//! every key of the task's template are required. The registry manifest is a
//! TOML file:
//!
//! ```toml
//! [[task]]
//! name = "squad"
//! family = "RC"
//! path = "data/squad.jsonl"               # relative to the manifest
//! template = [["question:", "question"], ["context:", "context"]]  # optional
//! target = "answer"                       # optional
//!
//! [[downstream]]
//! name = "reddit_tifu"
//! train = "data/reddit_tifu.train.jsonl"
//! eval = "data/reddit_tifu.eval.jsonl"
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use mtlforge_core::registry::PromptField;
use mtlforge_core::{Example, FamilyId, FormatTemplate, Registry, TaskSpec, TextPair};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Reads every record of `path` in file order and checks it against
/// `template`. Blank lines are skipped but still counted for line numbers.
pub fn read_examples(path: &Path, template: &FormatTemplate) -> Result<Vec<Example>> {
    let file = fs::File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let object: Map<String, Value> =
            serde_json::from_str(&line).map_err(|e| Error::line(path, n, format!("malformed record: {e}")))?;
        let mut id = None;
        let mut fields = std::collections::BTreeMap::new();
        for (key, value) in object {
            let Value::String(text) = value else {
                return Err(Error::line(path, n, format!("field `{key}` is not a string")));
            };
            if key == "id" {
                id = Some(text);
            } else {
                fields.insert(key, text);
            }
        }
        let id = id.ok_or_else(|| Error::line(path, n, "missing id"))?;
        let example = Example { id, fields };
        if let Some(key) = template.missing_key(&example) {
            return Err(Error::line(path, n, format!("missing {key}")));
        }
        out.push(example);
    }
    Ok(out)
}

/// Loads the dataset of `spec` and sets its size to the record count.
pub fn load_dataset(path: &Path, spec: &mut TaskSpec) -> Result<Vec<Example>> {
    let examples = read_examples(path, &spec.template)?;
    spec.size = examples.len() as u64;
    Ok(examples)
}

pub fn write_examples(path: &Path, examples: &[Example]) -> Result<()> {
    let mut buf = Vec::new();
    for ex in examples {
        let mut object = Map::new();
        object.insert("id".into(), Value::String(ex.id.clone()));
        for (k, v) in &ex.fields {
            object.insert(k.clone(), Value::String(v.clone()));
        }
        serde_json::to_writer(&mut buf, &object).expect("string maps serialize");
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let mut f = fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(bytes).map_err(Error::io(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub name: String,
    pub family: FamilyId,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownstreamEntry {
    pub name: String,
    pub train: PathBuf,
    pub eval: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryManifest {
    #[serde(default)]
    pub task: Vec<TaskEntry>,
    #[serde(default)]
    pub downstream: Vec<DownstreamEntry>,
}

fn template_of(
    family: FamilyId,
    inputs: &Option<Vec<(String, String)>>,
    target: &Option<String>,
) -> mtlforge_core::Result<FormatTemplate> {
    let default = FormatTemplate::for_family(family);
    let target = target.clone().unwrap_or(default.target.clone());
    match inputs {
        Some(pairs) => FormatTemplate::new(pairs.iter().cloned(), target),
        None => Ok(FormatTemplate { inputs: default.inputs, target }),
    }
}

/// A summarization dataset for finetuning and evaluation.
#[derive(Debug, Clone)]
pub struct Downstream {
    pub name: String,
    pub spec: TaskSpec,
    pub train: Vec<Example>,
    pub eval: Vec<TextPair>,
}

impl Downstream {
    pub fn eval_inputs(&self) -> Vec<String> {
        self.eval.iter().map(|p| p.input_text.clone()).collect()
    }

    pub fn eval_targets(&self) -> Vec<String> {
        self.eval.iter().map(|p| p.target_text.clone()).collect()
    }

    /// A one-task registry over the training split, used for the finetuning manifest.
    pub fn train_registry(&self) -> Result<Registry> {
        let mut r = Registry::new();
        r.register_task(self.spec.clone())?;
        r.attach_examples(&self.spec.name, self.train.clone())?;
        Ok(r)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedRegistry {
    pub registry: Registry,
    pub downstream: Vec<Downstream>,
}

impl LoadedRegistry {
    pub fn downstream(&self, name: &str) -> Option<&Downstream> {
        self.downstream.iter().find(|d| d.name == name)
    }
}

pub fn read_manifest(path: &Path) -> Result<RegistryManifest> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.message()))
}

/// Loads a registry manifest and every dataset it names. Relative paths are
/// resolved against the manifest's directory.
pub fn load_registry(path: &Path) -> Result<LoadedRegistry> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut registry = Registry::new();
    for entry in &manifest.task {
        let template = template_of(entry.family, &entry.template, &entry.target)
            .map_err(|e| Error::format(path, format!("task `{}`: {e}", entry.name)))?;
        let data = base.join(&entry.path);
        let mut spec = TaskSpec {
            name: entry.name.clone(),
            family: entry.family,
            size: 0,
            template,
            source_path: entry.path.display().to_string(),
        };
        if !data.exists() {
            return Err(Error::format(path, format!("task `{}`: dataset {} not found", entry.name, data.display())));
        }
        let examples = load_dataset(&data, &mut spec)?;
        registry.register_task(spec)?;
        registry.attach_examples(&entry.name, examples)?;
    }
    let mut downstream = Vec::new();
    for entry in &manifest.downstream {
        let template = template_of(FamilyId::Sum, &entry.template, &entry.target)
            .map_err(|e| Error::format(path, format!("downstream `{}`: {e}", entry.name)))?;
        let train = read_examples(&base.join(&entry.train), &template)?;
        let eval_examples = read_examples(&base.join(&entry.eval), &template)?;
        let spec = TaskSpec {
            name: entry.name.clone(),
            family: FamilyId::Sum,
            size: train.len() as u64,
            template: template.clone(),
            source_path: entry.train.display().to_string(),
        };
        let eval = eval_examples.iter().map(|e| spec.format(e)).collect::<mtlforge_core::Result<Vec<_>>>()?;
        downstream.push(Downstream { name: entry.name.clone(), spec, train, eval });
    }
    Ok(LoadedRegistry { registry, downstream })
}

/// Writes the synthetic 18-task taxonomy, one downstream summarization set
/// per name in `downstream`, and a registry manifest into `dir`.
pub fn write_synthetic(dir: &Path, per_task: usize, eval_size: usize, seed: u64, downstream: &[&str]) -> Result<PathBuf> {
    let registry = mtlforge_core::synth_registry(|_, _, _| per_task, seed);
    let mut manifest = RegistryManifest::default();
    for spec in registry.tasks() {
        let rel = PathBuf::from("data").join(format!("{}.jsonl", spec.name));
        write_examples(&dir.join(&rel), registry.examples(&spec.name).expect("registered"))?;
        manifest.task.push(TaskEntry { name: spec.name.clone(), family: spec.family, path: rel, template: None, target: None });
    }
    for (i, name) in downstream.iter().enumerate() {
        let s = mtlforge_core::Rng::new(seed).split(1000 + i as u64);
        let train = mtlforge_core::synth_fixture(FamilyId::Sum, per_task, s.split(0).seed());
        let eval = mtlforge_core::synth_fixture(FamilyId::Sum, eval_size, s.split(1).seed());
        let train_rel = PathBuf::from("data").join(format!("{name}.train.jsonl"));
        let eval_rel = PathBuf::from("data").join(format!("{name}.eval.jsonl"));
        write_examples(&dir.join(&train_rel), &train)?;
        write_examples(&dir.join(&eval_rel), &eval)?;
        manifest.downstream.push(DownstreamEntry {
            name: (*name).into(),
            train: train_rel,
            eval: eval_rel,
            template: None,
            target: None,
        });
    }
    let path = dir.join("registry.toml");
    let text = toml::to_string(&manifest).map_err(|e| Error::format(&path, e))?;
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

/// Template pairs as written in the manifest.
pub fn template_pairs(template: &FormatTemplate) -> Vec<(String, String)> {
    template.inputs.iter().map(|PromptField { label, key }| (label.clone(), key.clone())).collect()
}
