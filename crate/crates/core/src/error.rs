use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("repository root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("file not found in index: {0}")]
    NotFound(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("unbound placeholder: {0}")]
    Unbound(String),
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("replay miss: no recorded response for fingerprint {fingerprint} ({template})")]
    ReplayMiss { fingerprint: String, template: String },
    #[error("no backend configured for record mode")]
    NoBackend,
    #[error("backend timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("empty patch: old and new texts are identical")]
    EmptyPatch,
    #[error("malformed patch at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("hunk {hunk} of {file} does not apply")]
    Reject { file: String, hunk: usize, hunk_text: String },
    #[error("patch target {0} is missing")]
    MissingTarget(String),
    #[error("patch target {0} already exists")]
    TargetExists(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum NameRepairError {
    #[error("cannot repair a name against an empty pool")]
    EmptyPool,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no file available to host a test")]
    NoTarget,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("plan has no write or modify action")]
    NoTarget,
    #[error("target file unreadable: {0}")]
    TargetUnreadable(#[from] RepoError),
    #[error("generation-parse error: {0}")]
    Parse(String),
    #[error("placement error: {0}")]
    Placement(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Error)]
pub enum LintError {
    #[error("lint command unavailable: {0}")]
    Unavailable(String),
    #[error("lint io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("snapshot {0} is unavailable")]
    MissingSnapshot(PathBuf),
    #[error("patch {patch} rejected: {source}")]
    PatchRejected {
        patch: String,
        #[source]
        source: DiffError,
    },
    #[error("cannot spawn test command: {0}")]
    Spawn(String),
    #[error("workspace io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("empty suite")]
    EmptySuite,
    #[error("instance {0} has no golden test patch")]
    MissingGoldenTests(String),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Repo(#[from] RepoError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Pipeline failure tagged with the stage that produced it.
#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl StageError {
    pub fn new(stage: &'static str, err: impl std::fmt::Display) -> Self {
        StageError { stage, message: err.to_string() }
    }
}
