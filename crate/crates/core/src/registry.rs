//! Task families, task specs and the text-to-text formatting of examples.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// The six task families. Declaration order is the canonical table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    #[serde(rename = "CLS")]
    Cls,
    #[serde(rename = "CMNS")]
    Cmns,
    #[serde(rename = "NLI")]
    Nli,
    #[serde(rename = "RC")]
    Rc,
    #[serde(rename = "RC_PLUS", alias = "RC+")]
    RcPlus,
    #[serde(rename = "SUM")]
    Sum,
}

impl FamilyId {
    pub const ALL: [FamilyId; 6] = [
        FamilyId::Cls,
        FamilyId::Cmns,
        FamilyId::Nli,
        FamilyId::Rc,
        FamilyId::RcPlus,
        FamilyId::Sum,
    ];

    /// Symbolic identifier used in files (`RC_PLUS` rather than `RC+`).
    pub fn symbol(self) -> &'static str {
        match self {
            FamilyId::Cls => "CLS",
            FamilyId::Cmns => "CMNS",
            FamilyId::Nli => "NLI",
            FamilyId::Rc => "RC",
            FamilyId::RcPlus => "RC_PLUS",
            FamilyId::Sum => "SUM",
        }
    }

    /// Short label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            FamilyId::RcPlus => "RC+",
            other => other.symbol(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CLS" => Ok(FamilyId::Cls),
            "CMNS" => Ok(FamilyId::Cmns),
            "NLI" => Ok(FamilyId::Nli),
            "RC" => Ok(FamilyId::Rc),
            "RC_PLUS" | "RC+" | "RCPLUS" => Ok(FamilyId::RcPlus),
            "SUM" => Ok(FamilyId::Sum),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// One `label: value` segment of the input side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptField {
    pub label: String,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatTemplate {
    pub inputs: Vec<PromptField>,
    pub target: String,
}

fn valid_label(label: &str) -> bool {
    match label.strip_suffix(':') {
        Some(word) => !word.is_empty() && word.bytes().all(|b| b.is_ascii_lowercase()),
        None => false,
    }
}

impl FormatTemplate {
    pub fn new<L, K>(inputs: impl IntoIterator<Item = (L, K)>, target: impl Into<String>) -> Result<Self>
    where
        L: Into<String>,
        K: Into<String>,
    {
        let inputs = inputs
            .into_iter()
            .map(|(label, key)| PromptField { label: label.into(), key: key.into() })
            .collect::<Vec<_>>();
        for field in &inputs {
            if !valid_label(&field.label) {
                return Err(Error::InvalidPromptLabel(field.label.clone()));
            }
        }
        Ok(Self { inputs, target: target.into() })
    }

    /// Default prompt vocabulary for a family.
    pub fn for_family(family: FamilyId) -> Self {
        let (inputs, target): (&[(&str, &str)], &str) = match family {
            FamilyId::Cls => (&[("text:", "text")], "label"),
            FamilyId::Cmns => (&[("question:", "question"), ("options:", "options")], "answer"),
            FamilyId::Nli => (&[("premise:", "premise"), ("hypothesis:", "hypothesis")], "label"),
            FamilyId::Rc | FamilyId::RcPlus => {
                (&[("question:", "question"), ("context:", "context")], "answer")
            }
            FamilyId::Sum => (&[("document:", "document")], "summary"),
        };
        Self {
            inputs: inputs
                .iter()
                .map(|(l, k)| PromptField { label: (*l).into(), key: (*k).into() })
                .collect(),
            target: target.into(),
        }
    }

    /// Input keys in template order followed by the target key.
    pub fn required_keys(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|f| f.key.as_str()).chain(core::iter::once(self.target.as_str()))
    }

    /// First required key absent from `example`, if any.
    pub fn missing_key<'a>(&'a self, example: &Example) -> Option<&'a str> {
        self.required_keys().find(|k| !example.fields.contains_key(*k))
    }

    pub fn check(&self, example: &Example) -> Result<()> {
        match self.missing_key(example) {
            Some(key) => Err(Error::MissingField { field: key.into(), example: example.id.clone() }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub fields: BTreeMap<String, String>,
}

impl Example {
    pub fn new<K: Into<String>, V: Into<String>>(
        id: impl Into<String>,
        fields: impl IntoIterator<Item = (K, V)>,
    ) -> Self {
        Self {
            id: id.into(),
            fields: fields.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    #[serde(rename = "input")]
    pub input_text: String,
    #[serde(rename = "target")]
    pub target_text: String,
    #[serde(rename = "task")]
    pub task_name: String,
}

/// Joins `label value` segments in template order with single spaces.
pub fn format_example(example: &Example, template: &FormatTemplate, task_name: &str) -> Result<TextPair> {
    template.check(example)?;
    let mut input = String::new();
    for (i, field) in template.inputs.iter().enumerate() {
        if i > 0 {
            input.push(' ');
        }
        input.push_str(&field.label);
        input.push(' ');
        input.push_str(&example.fields[&field.key]);
    }
    Ok(TextPair {
        input_text: input,
        target_text: example.fields[&template.target].clone(),
        task_name: task_name.into(),
    })
}

/// Inverse of [`format_example`] on the input side. Returns `None` when the
/// text does not follow the template's label sequence.
pub fn split_input<'t>(input: &str, template: &'t FormatTemplate) -> Option<Vec<(&'t str, String)>> {
    let mut out = Vec::with_capacity(template.inputs.len());
    let first = template.inputs.first()?;
    let mut rest = input.strip_prefix(first.label.as_str())?.strip_prefix(' ')?;
    for (i, field) in template.inputs.iter().enumerate() {
        match template.inputs.get(i + 1) {
            Some(next) => {
                let marker = format!(" {} ", next.label);
                let at = rest.find(&marker)?;
                out.push((field.key.as_str(), rest[..at].to_string()));
                rest = &rest[at + marker.len()..];
            }
            None => out.push((field.key.as_str(), rest.to_string())),
        }
    }
    Some(out)
}

/// Splits text into token byte spans. Truncation keeps a prefix of whole tokens.
pub trait Tokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..text.len());
        }
        spans
    }
}

/// Token budgets for the two sides of a pair. Prompt labels count toward the
/// input budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLimits {
    pub max_input: usize,
    pub max_target: usize,
}

impl SequenceLimits {
    pub const PRE_FINETUNE: SequenceLimits = SequenceLimits { max_input: 512, max_target: 128 };
    pub const FINETUNE: SequenceLimits = SequenceLimits { max_input: 1024, max_target: 512 };

    pub fn new(max_input: usize, max_target: usize) -> Option<Self> {
        (max_input > 0 && max_target > 0).then_some(Self { max_input, max_target })
    }
}

impl Default for SequenceLimits {
    fn default() -> Self {
        Self::PRE_FINETUNE
    }
}

pub fn truncate_text<T: Tokenizer + ?Sized>(text: &str, max_tokens: usize, tokenizer: &T) -> String {
    let spans = tokenizer.token_spans(text);
    if spans.len() <= max_tokens {
        return text.to_string();
    }
    match max_tokens.checked_sub(1) {
        Some(last) => text[..spans[last].end].to_string(),
        None => String::new(),
    }
}

pub fn truncate_pair<T: Tokenizer + ?Sized>(pair: &TextPair, limits: SequenceLimits, tokenizer: &T) -> TextPair {
    TextPair {
        input_text: truncate_text(&pair.input_text, limits.max_input, tokenizer),
        target_text: truncate_text(&pair.target_text, limits.max_target, tokenizer),
        task_name: pair.task_name.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub family: FamilyId,
    pub size: u64,
    pub template: FormatTemplate,
    pub source_path: String,
}

impl TaskSpec {
    /// A spec with the family's default template and `<name>.jsonl` as source.
    pub fn new(name: impl Into<String>, family: FamilyId, size: u64) -> Self {
        let name = name.into();
        let source_path = format!("{name}.jsonl");
        Self { name, family, size, template: FormatTemplate::for_family(family), source_path }
    }

    pub fn format(&self, example: &Example) -> Result<TextPair> {
        format_example(example, &self.template, &self.name)
    }
}

/// The 18 pre-finetuning datasets, three per family, in table order.
pub const TAXONOMY: [(FamilyId, &str); 18] = [
    (FamilyId::Cls, "goemotions"),
    (FamilyId::Cls, "imdb"),
    (FamilyId::Cls, "ag_news"),
    (FamilyId::Cmns, "winogrande"),
    (FamilyId::Cmns, "physical_iqa"),
    (FamilyId::Cmns, "social_iqa"),
    (FamilyId::Nli, "mnli"),
    (FamilyId::Nli, "anli"),
    (FamilyId::Nli, "qnli"),
    (FamilyId::Rc, "boolq"),
    (FamilyId::Rc, "squad"),
    (FamilyId::Rc, "tweet_qa"),
    (FamilyId::RcPlus, "hotpot_qa"),
    (FamilyId::RcPlus, "natural_questions"),
    (FamilyId::RcPlus, "record"),
    (FamilyId::Sum, "xsum"),
    (FamilyId::Sum, "wiki_lingua"),
    (FamilyId::Sum, "aeslc"),
];

#[derive(Debug, Clone)]
struct Entry {
    spec: TaskSpec,
    examples: Vec<Example>,
}

/// Registered tasks in registration order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The 18-task taxonomy with sizes supplied by `size_of`.
    pub fn with_taxonomy(mut size_of: impl FnMut(FamilyId, &str) -> u64) -> Self {
        let mut registry = Self::new();
        for (family, name) in TAXONOMY {
            registry
                .register_task(TaskSpec::new(name, family, size_of(family, name)))
                .expect("taxonomy names are unique");
        }
        registry
    }

    pub fn register_task(&mut self, spec: TaskSpec) -> Result<()> {
        if self.by_name.contains_key(&spec.name) {
            return Err(Error::DuplicateTask(spec.name));
        }
        self.by_name.insert(spec.name.clone(), self.entries.len());
        self.entries.push(Entry { spec, examples: Vec::new() });
        Ok(())
    }

    /// Attaches ingested examples to a task and sets its size to their count.
    pub fn attach_examples(&mut self, name: &str, examples: Vec<Example>) -> Result<()> {
        let idx = *self.by_name.get(name).ok_or_else(|| Error::UnknownTask(name.into()))?;
        let entry = &mut self.entries[idx];
        for ex in &examples {
            entry.spec.template.check(ex)?;
        }
        entry.spec.size = examples.len() as u64;
        entry.examples = examples;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&TaskSpec> {
        self.index_of(name).map(|i| &self.entries[i].spec)
    }

    pub fn spec_at(&self, index: usize) -> &TaskSpec {
        &self.entries[index].spec
    }

    pub fn examples(&self, name: &str) -> Option<&[Example]> {
        self.index_of(name).map(|i| self.entries[i].examples.as_slice())
    }

    pub fn examples_at(&self, index: usize) -> &[Example] {
        &self.entries[index].examples
    }

    pub fn family_of(&self, name: &str) -> Option<FamilyId> {
        self.get(name).map(|s| s.family)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskSpec> {
        self.entries.iter().map(|e| &e.spec)
    }

    /// Tasks of one family in registration order.
    pub fn tasks_in(&self, family: FamilyId) -> impl Iterator<Item = &TaskSpec> {
        self.tasks().filter(move |t| t.family == family)
    }

    pub fn family_counts(&self) -> BTreeMap<FamilyId, usize> {
        let mut counts = BTreeMap::new();
        for t in self.tasks() {
            *counts.entry(t.family).or_insert(0) += 1;
        }
        counts
    }

    /// Tasks of the given families, grouped family by family (in the order the
    /// families are given) and in registration order within each family.
    pub fn grouped_tasks(&self, families: &[FamilyId]) -> Vec<String> {
        families
            .iter()
            .flat_map(|f| self.tasks_in(*f).map(|t| t.name.clone()))
            .collect()
    }

    /// SHA-256 over every spec and example, length-prefixed, hex encoded.
    pub fn digest(&self) -> String {
        fn put(h: &mut Sha256, s: &str) {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        }
        let mut h = Sha256::new();
        h.update((self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            put(&mut h, &e.spec.name);
            put(&mut h, e.spec.family.symbol());
            h.update(e.spec.size.to_le_bytes());
            h.update((e.spec.template.inputs.len() as u64).to_le_bytes());
            for f in &e.spec.template.inputs {
                put(&mut h, &f.label);
                put(&mut h, &f.key);
            }
            put(&mut h, &e.spec.template.target);
            h.update((e.examples.len() as u64).to_le_bytes());
            for ex in &e.examples {
                put(&mut h, &ex.id);
                h.update((ex.fields.len() as u64).to_le_bytes());
                for (k, v) in &ex.fields {
                    put(&mut h, k);
                    put(&mut h, v);
                }
            }
        }
        hex::encode(h.finalize())
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ren", "so", "ta", "vel", "nor", "pi", "dra", "ush", "em", "zo", "bri", "fen", "qua",
];

fn pseudo_word(rng: &mut Rng) -> String {
    let n = 1 + rng.below(3) as usize;
    let mut w = String::new();
    for _ in 0..n {
        w.push_str(SYLLABLES[rng.below(SYLLABLES.len() as u64) as usize]);
    }
    w
}

fn pseudo_sentence(rng: &mut Rng, terminator: char) -> String {
    let n = 4 + rng.below(8) as usize;
    let mut words: Vec<String> = (0..n).map(|_| pseudo_word(rng)).collect();
    if let Some(first) = words.first_mut() {
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            *first = c.to_ascii_uppercase().to_string() + chars.as_str();
        }
    }
    let mut s = words.join(" ");
    s.push(terminator);
    s
}

fn pseudo_text(rng: &mut Rng, min: u64, max: u64) -> Vec<String> {
    let n = min + rng.below(max - min + 1);
    (0..n).map(|_| pseudo_sentence(rng, '.')).collect()
}

fn pick<'a>(rng: &mut Rng, options: &[&'a str]) -> &'a str {
    options[rng.below(options.len() as u64) as usize]
}

/// Seeded pseudo-text examples satisfying `family`'s default template.
///
/// Summaries are the lead sentence of their document; reading-comprehension
/// answers are spans of their context.
pub fn synth_fixture(family: FamilyId, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = Rng::new(seed).split(family.index() as u64);
    (0..n)
        .map(|i| {
            let id = format!("{}-{seed}-{i}", family.symbol().to_ascii_lowercase());
            let fields: Vec<(&str, String)> = match family {
                FamilyId::Cls => vec![
                    ("text", pseudo_text(&mut rng, 1, 3).join(" ")),
                    (
                        "label",
                        pick(&mut rng, &["positive", "negative", "neutral", "world", "sports", "business"]).into(),
                    ),
                ],
                FamilyId::Cmns => {
                    let opts: Vec<String> = (0..3).map(|_| pseudo_word(&mut rng)).collect();
                    let answer = opts[rng.below(3) as usize].clone();
                    vec![
                        ("question", pseudo_sentence(&mut rng, '?')),
                        ("options", format!("(a) {} (b) {} (c) {}", opts[0], opts[1], opts[2])),
                        ("answer", answer),
                    ]
                }
                FamilyId::Nli => vec![
                    ("premise", pseudo_text(&mut rng, 1, 2).join(" ")),
                    ("hypothesis", pseudo_sentence(&mut rng, '.')),
                    ("label", pick(&mut rng, &["entailment", "neutral", "contradiction"]).into()),
                ],
                FamilyId::Rc | FamilyId::RcPlus => {
                    let question = pseudo_sentence(&mut rng, '?');
                    let context = pseudo_text(&mut rng, 2, 4).join(" ");
                    let words: Vec<&str> = context.split_whitespace().collect();
                    let len = 1 + rng.below(3) as usize;
                    let start = rng.below((words.len() - len + 1) as u64) as usize;
                    let answer = words[start..start + len].join(" ");
                    vec![("question", question), ("context", context), ("answer", answer)]
                }
                FamilyId::Sum => {
                    let sentences = pseudo_text(&mut rng, 3, 6);
                    let summary = sentences[0].clone();
                    vec![("document", sentences.join(" ")), ("summary", summary)]
                }
            };
            Example::new(id, fields)
        })
        .collect()
}

/// The 18-task taxonomy loaded with synthetic fixtures; task `i` gets
/// `examples_per_task(i, family, name)` examples seeded from `(seed, i)`.
pub fn synth_registry(mut examples_per_task: impl FnMut(usize, FamilyId, &str) -> usize, seed: u64) -> Registry {
    let mut registry = Registry::with_taxonomy(|_, _| 0);
    for (i, (family, name)) in TAXONOMY.iter().enumerate() {
        let n = examples_per_task(i, *family, name);
        let examples = synth_fixture(*family, n, Rng::new(seed).split(i as u64).seed());
        registry.attach_examples(name, examples).expect("fixtures satisfy the default templates");
    }
    registry
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn qa_template() -> FormatTemplate {
        FormatTemplate::new([("question:", "question"), ("context:", "context")], "answer").unwrap()
    }

    #[test]
    fn taxonomy_has_three_tasks_per_family() {
        let r = Registry::with_taxonomy(|_, _| 10);
        assert_eq!(r.len(), 18);
        let counts = r.family_counts();
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| c == 3));
    }

    #[test]
    fn family_round_trips() {
        let mut r = Registry::new();
        r.register_task(TaskSpec::new("squad", FamilyId::Rc, 5)).unwrap();
        assert_eq!(r.family_of("squad"), Some(FamilyId::Rc));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut r = Registry::new();
        r.register_task(TaskSpec::new("squad", FamilyId::Rc, 5)).unwrap();
        let err = r.register_task(TaskSpec::new("squad", FamilyId::Sum, 1)).unwrap_err();
        assert_eq!(err, Error::DuplicateTask("squad".into()));
    }

    #[test]
    fn family_symbols_parse() {
        for f in FamilyId::ALL {
            assert_eq!(f.symbol().parse::<FamilyId>().unwrap(), f);
            assert_eq!(f.label().parse::<FamilyId>().unwrap(), f);
        }
        assert!("XYZ".parse::<FamilyId>().is_err());
    }

    #[test]
    fn formats_in_template_order() {
        let ex = Example::new("1", [("question", "Q"), ("context", "C"), ("answer", "A")]);
        let pair = format_example(&ex, &qa_template(), "squad").unwrap();
        assert_eq!(pair.input_text, "question: Q context: C");
        assert_eq!(pair.target_text, "A");
        assert_eq!(pair.task_name, "squad");
    }

    #[test]
    fn single_field_template() {
        let ex = Example::new("1", [("document", "Some text."), ("summary", "S")]);
        let pair = format_example(&ex, &FormatTemplate::for_family(FamilyId::Sum), "xsum").unwrap();
        assert_eq!(pair.input_text, "document: Some text.");
    }

    #[test]
    fn absent_field_is_named() {
        let ex = Example::new("7", [("question", "Q"), ("answer", "A")]);
        let err = format_example(&ex, &qa_template(), "squad").unwrap_err();
        assert_eq!(err, Error::MissingField { field: "context".into(), example: "7".into() });
    }

    #[test]
    fn labels_are_validated() {
        assert!(FormatTemplate::new([("Question:", "q")], "a").is_err());
        assert!(FormatTemplate::new([("question", "q")], "a").is_err());
        assert!(FormatTemplate::new([(":", "q")], "a").is_err());
        assert!(FormatTemplate::new([("question:", "q")], "a").is_ok());
    }

    #[test]
    fn split_recovers_fields() {
        let t = qa_template();
        let parts = split_input("question: Q x context: C y", &t).unwrap();
        assert_eq!(parts, vec![("question", "Q x".into()), ("context", "C y".into())]);
    }

    #[test]
    fn truncation_keeps_prefix() {
        assert_eq!(truncate_text("a b c", 2, &WhitespaceTokenizer), "a b");
        assert_eq!(truncate_text("a b", 5, &WhitespaceTokenizer), "a b");
        let long: Vec<String> = (0..600).map(|i| format!("t{i}")).collect();
        let cut = truncate_text(&long.join(" "), 512, &WhitespaceTokenizer);
        assert_eq!(cut, long[..512].join(" "));
    }

    #[test]
    fn default_limits() {
        assert_eq!(SequenceLimits::default(), SequenceLimits { max_input: 512, max_target: 128 });
        assert_eq!(SequenceLimits::FINETUNE, SequenceLimits { max_input: 1024, max_target: 512 });
        assert!(SequenceLimits::new(0, 5).is_none());
    }

    #[test]
    fn fixtures_are_deterministic_and_valid() {
        assert_eq!(synth_fixture(FamilyId::Sum, 5, 42), synth_fixture(FamilyId::Sum, 5, 42));
        assert!(synth_fixture(FamilyId::Sum, 0, 42).is_empty());
        let rc = synth_fixture(FamilyId::Rc, 100, 7);
        assert_eq!(rc.len(), 100);
        let t = FormatTemplate::for_family(FamilyId::Rc);
        for ex in &rc {
            assert!(t.check(ex).is_ok());
            assert!(ex.fields["context"].contains(ex.fields["answer"].as_str()));
        }
    }

    #[test]
    fn digest_tracks_examples() {
        let mut a = Registry::new();
        a.register_task(TaskSpec::new("xsum", FamilyId::Sum, 0)).unwrap();
        let before = a.digest();
        a.attach_examples("xsum", synth_fixture(FamilyId::Sum, 3, 1)).unwrap();
        assert_ne!(before, a.digest());
        assert_eq!(a.get("xsum").unwrap().size, 3);
    }
}
