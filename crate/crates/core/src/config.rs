//! Run configuration: a single JSON document, every field optional.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, GatewayError};
use crate::generator::CommandLinter;
use crate::llm::{Backend, CostLedger, Gateway, HttpBackend, PriceConfig, ScriptedBackend, Transcript, TranscriptMode};
use crate::pipeline::PipelineOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    /// Response script for the scripted backend; may contain `{instance_id}`.
    pub script: Option<String>,
    pub timeout_s: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-2024-08-06".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            script: None,
            timeout_s: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranscriptConfig {
    /// May contain `{instance_id}`; relative paths resolve against the config file.
    pub path: String,
    pub mode: TranscriptMode,
}

impl Default for TranscriptConfig {
    fn default() -> Self {
        TranscriptConfig { path: "transcripts/{instance_id}.jsonl".into(), mode: TranscriptMode::Replay }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub transcript: TranscriptConfig,
    pub manifest: Option<PathBuf>,
    pub lint: CommandLinter,
    pub output_dir: PathBuf,
    pub prices: PriceConfig,
    pub pipeline: PipelineOptions,
    /// Overrides the per-instance test timeout when set.
    pub test_timeout_s: Option<u64>,
    pub parallelism: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendConfig::default(),
            transcript: TranscriptConfig::default(),
            manifest: None,
            lint: CommandLinter::default(),
            output_dir: PathBuf::from("out"),
            prices: PriceConfig::default(),
            pipeline: PipelineOptions::default(),
            test_timeout_s: None,
            parallelism: 1,
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.to_path_buf(), source })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(cfg)
    }

    pub fn resolve(&self, p: impl AsRef<Path>) -> PathBuf {
        let p = p.as_ref();
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn transcript_path(&self, instance_id: &str) -> PathBuf {
        self.resolve(self.transcript.path.replace("{instance_id}", instance_id))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pipeline.localizer.max_files == 0 {
            return Err(ConfigError::Invalid("pipeline.localizer.max_files must be positive".into()));
        }
        if !(1..=crate::planner::MAX_TURNS).contains(&self.pipeline.planner.max_turns) {
            return Err(ConfigError::Invalid(format!("pipeline.planner.max_turns must be 1..={}", crate::planner::MAX_TURNS)));
        }
        if self.transcript.mode == TranscriptMode::Record
            && self.backend.kind == BackendKind::Scripted
            && self.backend.script.is_none()
        {
            return Err(ConfigError::Invalid("scripted backend needs backend.script".into()));
        }
        Ok(())
    }

    fn backend(&self, instance_id: &str) -> Result<Box<dyn Backend>, ConfigError> {
        match self.backend.kind {
            BackendKind::Http => {
                let key = std::env::var(&self.backend.api_key_env).ok();
                Ok(Box::new(HttpBackend::new(
                    &self.backend.base_url,
                    &self.backend.model,
                    key,
                    Duration::from_secs(self.backend.timeout_s),
                )))
            }
            BackendKind::Scripted => {
                let script = self.backend.script.as_deref().ok_or_else(|| ConfigError::Invalid("backend.script missing".into()))?;
                let path = self.resolve(script.replace("{instance_id}", instance_id));
                ScriptedBackend::load(&path).map(|b| Box::new(b) as Box<dyn Backend>).map_err(gateway_config_error)
            }
        }
    }

    /// Gateway for one instance. Replay requires an existing transcript.
    pub fn gateway(&self, instance_id: &str) -> Result<Gateway, ConfigError> {
        let ledger = CostLedger::new(self.prices);
        match self.transcript.mode {
            TranscriptMode::Replay => {
                let path = self.transcript_path(instance_id);
                if !path.is_file() {
                    return Err(ConfigError::Invalid(format!("replay transcript {} does not exist", path.display())));
                }
                let t = Transcript::load(&path, TranscriptMode::Replay).map_err(gateway_config_error)?;
                Ok(Gateway::replay(t, ledger))
            }
            TranscriptMode::Record => Ok(Gateway::record(self.backend(instance_id)?, ledger)),
        }
    }
}

fn gateway_config_error(e: GatewayError) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.pipeline.localizer.max_files, 10);
        assert_eq!(cfg.pipeline.planner.max_turns, 5);
        assert_eq!(cfg.transcript.mode, TranscriptMode::Replay);
        cfg.validate().unwrap();
    }

    #[test]
    fn replay_requires_transcript() {
        let cfg = RunConfig { base_dir: PathBuf::from("/nonexistent"), ..Default::default() };
        assert!(matches!(cfg.gateway("x"), Err(ConfigError::Invalid(_))));
    }
}
