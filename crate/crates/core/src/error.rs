use alloc::string::String;
use alloc::vec::Vec;

use crate::registry::FamilyId;
use crate::schedule::SchemeKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("task `{0}` is already registered")]
    DuplicateTask(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown task family `{0}`")]
    UnknownFamily(String),
    #[error("invalid prompt label `{0}`: expected lowercase letters followed by a colon")]
    InvalidPromptLabel(String),
    #[error("example `{example}` is missing field `{field}`")]
    MissingField { field: String, example: String },
    #[error("no task families selected")]
    EmptySelection,
    #[error("task family {0} has no tasks with examples")]
    EmptyFamily(FamilyId),
    #[error("task `{0}` has size 0")]
    ZeroSizeTask(String),
    #[error("task `{0}` has no loaded examples")]
    TaskNotLoaded(String),
    #[error("budget of {budget} batches cannot give every task a batch; minimum budget is {minimum}")]
    BudgetTooSmall { budget: u64, minimum: u64 },
    #[error("scheme builder for {expected} called with a {found} config")]
    SchemeMismatch { expected: SchemeKind, found: SchemeKind },
    #[error("continual multi-task learning requires EQUAL mixing")]
    CmtlRequiresEqual,
    #[error("quantum must be positive")]
    InvalidQuantum,
    #[error("batch size must be positive")]
    InvalidBatchSize,
    #[error("at least one task is required")]
    NoTasks,
    #[error("manifest was built against registry {manifest}, but the registry digest is {registry}")]
    RegistryDigestMismatch { manifest: String, registry: String },
    #[error("checkpoint is outside the manifest ({0} batches)")]
    CheckpointOutOfRange(u64),
    #[error("n-gram order must be at least 1")]
    InvalidNGramOrder,
    #[error("candidate list is empty")]
    EmptyCorpus,
    #[error("{predictions} predictions but {references} references")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("token/vector count mismatch: {tokens} tokens, {vectors} vectors")]
    TokenVectorMismatch { tokens: usize, vectors: usize },
    #[error("embedded token sequence is empty")]
    EmptyTokens,
    #[error("embedding vector {index} is not unit-normalized (norm {norm})")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("embedding provider failed: {0}")]
    Embedder(String),
    #[error("unknown research question `{0}` (expected rq1..rq4)")]
    UnknownRq(String),
    #[error("registry has no tasks for family {0}")]
    MissingFamily(FamilyId),
    #[error("results grid is not rectangular; missing cells: {}", .0.join(", "))]
    RaggedGrid(Vec<String>),
    #[error("duplicate result for cell {0}")]
    DuplicateCell(String),
    #[error("no baseline for dataset `{0}`")]
    MissingBaseline(String),
    #[error("trainer error: {0}")]
    Trainer(String),
}
