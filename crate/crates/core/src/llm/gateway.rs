use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::warn;

use super::cost::{CostLedger, Stage};
use super::templates::{render_prompt, TemplateId};
use crate::error::GatewayError;

pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding { temperature: 0.0, max_tokens: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub template_id: TemplateId,
    pub bindings: BTreeMap<String, String>,
    pub decoding: Decoding,
}

impl LlmRequest {
    pub fn new(template_id: TemplateId) -> Self {
        LlmRequest { template_id, bindings: BTreeMap::new(), decoding: Decoding::default() }
    }

    pub fn bind(mut self, key: &str, value: impl Into<String>) -> Self {
        self.bindings.insert(key.to_string(), value.into());
        self
    }

    pub fn render(&self) -> Result<RenderedRequest, GatewayError> {
        let text = render_prompt(self.template_id, &self.bindings)?;
        // greedy decoding only
        let decoding = Decoding { temperature: 0.0, ..self.decoding };
        let fingerprint = fingerprint(self.template_id, &text, &decoding);
        Ok(RenderedRequest { template_id: self.template_id, text, decoding, fingerprint })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedRequest {
    pub template_id: TemplateId,
    pub text: String,
    pub decoding: Decoding,
    #[serde(skip)]
    pub fingerprint: String,
}

/// Stable hash of template id, rendered prompt text and decoding parameters.
pub fn fingerprint(template_id: TemplateId, text: &str, decoding: &Decoding) -> String {
    let canonical = serde_json::json!({
        "template_id": template_id.as_str(),
        "text": text,
        "temperature": decoding.temperature,
        "max_tokens": decoding.max_tokens,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(digest)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendFailure {
    Timeout,
    Other(String),
}

pub trait Backend: Send {
    fn id(&self) -> String;
    fn complete(&mut self, req: &RenderedRequest) -> Result<(String, Usage), BackendFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptMode {
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub request: RenderedRequest,
    pub response: RecordedResponse,
}

/// Ordered request/response log.
///
/// Replay looks entries up by fingerprint. A fingerprint recorded several
/// times is served in recorded order, and the last response repeats once the
/// recorded ones are used up.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub mode: TranscriptMode,
    entries: Vec<TranscriptEntry>,
    by_fingerprint: HashMap<String, Vec<usize>>,
    cursors: HashMap<String, usize>,
}

impl Transcript {
    pub fn new(mode: TranscriptMode) -> Self {
        Transcript { mode, entries: Vec::new(), by_fingerprint: HashMap::new(), cursors: HashMap::new() }
    }

    pub fn from_entries(mode: TranscriptMode, entries: Vec<TranscriptEntry>) -> Self {
        let mut t = Transcript::new(mode);
        for e in entries {
            t.push(e);
        }
        t
    }

    pub fn load(path: &Path, mode: TranscriptMode) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GatewayError::Transcript { path: path.to_path_buf(), message: e.to_string() })?;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut entry: TranscriptEntry = serde_json::from_str(line).map_err(|e| GatewayError::Transcript {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", n + 1),
            })?;
            entry.request.fingerprint = entry.fingerprint.clone();
            entries.push(entry);
        }
        Ok(Transcript::from_entries(mode, entries))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let io = |e: std::io::Error| GatewayError::Transcript { path: path.to_path_buf(), message: e.to_string() };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: TranscriptEntry) {
        self.by_fingerprint.entry(entry.fingerprint.clone()).or_default().push(self.entries.len());
        self.entries.push(entry);
    }

    pub fn lookup(&mut self, fingerprint: &str) -> Option<&TranscriptEntry> {
        let slots = self.by_fingerprint.get(fingerprint)?;
        let cursor = self.cursors.entry(fingerprint.to_string()).or_insert(0);
        let idx = slots[(*cursor).min(slots.len() - 1)];
        *cursor += 1;
        Some(&self.entries[idx])
    }
}

/// Single entry point for model calls: rendering, record/replay, retries, and cost accounting.
pub struct Gateway {
    backend: Option<Box<dyn Backend>>,
    pub transcript: Transcript,
    pub ledger: CostLedger,
    pub max_tokens: u32,
}

impl Gateway {
    pub fn new(backend: Option<Box<dyn Backend>>, transcript: Transcript, ledger: CostLedger) -> Self {
        Gateway { backend, transcript, ledger, max_tokens: Decoding::default().max_tokens }
    }

    pub fn replay(transcript: Transcript, ledger: CostLedger) -> Self {
        Gateway::new(None, Transcript { mode: TranscriptMode::Replay, ..transcript }, ledger)
    }

    pub fn record(backend: Box<dyn Backend>, ledger: CostLedger) -> Self {
        Gateway::new(Some(backend), Transcript::new(TranscriptMode::Record), ledger)
    }

    pub fn complete(&mut self, stage: Stage, mut req: LlmRequest) -> Result<LlmResponse, GatewayError> {
        req.decoding.max_tokens = self.max_tokens;
        let rendered = req.render()?;
        match self.transcript.mode {
            TranscriptMode::Replay => {
                let entry = self.transcript.lookup(&rendered.fingerprint).ok_or_else(|| GatewayError::ReplayMiss {
                    fingerprint: rendered.fingerprint.clone(),
                    template: rendered.template_id.to_string(),
                })?;
                let response = LlmResponse {
                    text: entry.response.text.clone(),
                    usage: entry.response.usage,
                    backend_id: "replay".to_string(),
                };
                self.ledger.record(stage, response.usage.prompt_tokens, response.usage.completion_tokens);
                Ok(response)
            }
            TranscriptMode::Record => {
                let backend = self.backend.as_mut().ok_or(GatewayError::NoBackend)?;
                let mut attempt = 0;
                let (text, usage) = loop {
                    attempt += 1;
                    match backend.complete(&rendered) {
                        Ok(reply) => break reply,
                        Err(BackendFailure::Timeout) if attempt < MAX_ATTEMPTS => {
                            warn!(template = %rendered.template_id, attempt, "backend timeout, retrying");
                        }
                        Err(BackendFailure::Timeout) => return Err(GatewayError::Timeout { attempts: attempt }),
                        Err(BackendFailure::Other(msg)) => return Err(GatewayError::Backend(msg)),
                    }
                };
                let backend_id = backend.id();
                self.ledger.record(stage, usage.prompt_tokens, usage.completion_tokens);
                self.transcript.push(TranscriptEntry {
                    fingerprint: rendered.fingerprint.clone(),
                    request: rendered,
                    response: RecordedResponse { text: text.clone(), usage },
                });
                Ok(LlmResponse { text, usage, backend_id })
            }
        }
    }
}

/// Rough token estimate (four characters per token) for backends that do not report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Offline backend that answers from per-template response queues.
///
/// Each template's responses are served in order; the last one repeats once
/// the queue is exhausted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedBackend {
    pub responses: BTreeMap<TemplateId, Vec<String>>,
    #[serde(skip)]
    served: BTreeMap<TemplateId, usize>,
}

impl ScriptedBackend {
    pub fn new(responses: BTreeMap<TemplateId, Vec<String>>) -> Self {
        ScriptedBackend { responses, served: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let err = |message: String| GatewayError::Transcript { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> String {
        "scripted".to_string()
    }

    fn complete(&mut self, req: &RenderedRequest) -> Result<(String, Usage), BackendFailure> {
        let queue = self
            .responses
            .get(&req.template_id)
            .filter(|q| !q.is_empty())
            .ok_or_else(|| BackendFailure::Other(format!("no scripted response for {}", req.template_id)))?;
        let n = self.served.entry(req.template_id).or_insert(0);
        let text = queue[(*n).min(queue.len() - 1)].clone();
        *n += 1;
        let usage = Usage { prompt_tokens: estimate_tokens(&req.text), completion_tokens: estimate_tokens(&text) };
        Ok((text, usage))
    }
}

/// Chat-completions endpoint (`{base_url}/chat/completions`).
pub struct HttpBackend {
    pub base_url: String,
    pub model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend { base_url: base_url.trim_end_matches('/').to_string(), model: model.to_string(), api_key, agent }
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&mut self, req: &RenderedRequest) -> Result<(String, Usage), BackendFailure> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.text}],
            "temperature": req.decoding.temperature,
            "max_tokens": req.decoding.max_tokens,
        });
        let mut call = self.agent.post(format!("{}/chat/completions", self.base_url));
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let reply: serde_json::Value = match call.send_json(&body) {
            Ok(mut resp) => resp.body_mut().read_json().map_err(|e| BackendFailure::Other(e.to_string()))?,
            Err(ureq::Error::Timeout(_)) => return Err(BackendFailure::Timeout),
            Err(e) => return Err(BackendFailure::Other(e.to_string())),
        };
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendFailure::Other("response has no message content".into()))?
            .to_string();
        let usage = Usage {
            prompt_tokens: reply["usage"]["prompt_tokens"].as_u64().unwrap_or_else(|| estimate_tokens(&req.text)),
            completion_tokens: reply["usage"]["completion_tokens"].as_u64().unwrap_or_else(|| estimate_tokens(&text)),
        };
        Ok((text, usage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::cost::PriceConfig;

    struct Flaky {
        timeouts_left: u32,
        calls: u32,
    }

    impl Backend for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }
        fn complete(&mut self, _req: &RenderedRequest) -> Result<(String, Usage), BackendFailure> {
            self.calls += 1;
            if self.timeouts_left > 0 {
                self.timeouts_left -= 1;
                return Err(BackendFailure::Timeout);
            }
            Ok(("ok".into(), Usage { prompt_tokens: 500, completion_tokens: 100 }))
        }
    }

    fn req() -> LlmRequest {
        LlmRequest::new(TemplateId::TestLoc1).bind("issue", "I").bind("files", "a.py")
    }

    #[test]
    fn record_then_replay() {
        let prices = PriceConfig { per_1k_prompt: 2.5e-3, per_1k_completion: 1e-2 };
        let mut gw = Gateway::record(Box::new(Flaky { timeouts_left: 0, calls: 0 }), CostLedger::new(prices));
        gw.complete(Stage::TestLocalization, req()).unwrap();
        gw.complete(Stage::TestLocalization, req()).unwrap();
        assert!((gw.ledger.total().cost - 0.0045).abs() < 1e-15);
        assert_eq!(gw.transcript.entries().len(), 2);

        let jsonl = gw.transcript.to_jsonl();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        fs::write(&path, &jsonl).unwrap();
        let loaded = Transcript::load(&path, TranscriptMode::Replay).unwrap();
        let mut replay = Gateway::replay(loaded, CostLedger::new(prices));
        let r = replay.complete(Stage::TestLocalization, req()).unwrap();
        assert_eq!(r.text, "ok");
        assert_eq!(replay.ledger.total_calls(), 1);
    }

    #[test]
    fn replay_miss_leaves_ledger_untouched() {
        let mut gw = Gateway::replay(Transcript::new(TranscriptMode::Replay), CostLedger::default());
        let err = gw.complete(Stage::FocalLocalization, req()).unwrap_err();
        let fp = req().render().unwrap().fingerprint;
        assert!(err.to_string().contains(&fp));
        assert_eq!(gw.ledger.total_calls(), 0);
    }

    #[test]
    fn timeouts_retry_up_to_three_attempts() {
        let mut gw = Gateway::record(Box::new(Flaky { timeouts_left: 2, calls: 0 }), CostLedger::default());
        assert!(gw.complete(Stage::TestLocalization, req()).is_ok());
        let mut gw = Gateway::record(Box::new(Flaky { timeouts_left: 3, calls: 0 }), CostLedger::default());
        assert!(matches!(
            gw.complete(Stage::TestLocalization, req()),
            Err(GatewayError::Timeout { attempts: 3 })
        ));
        assert_eq!(gw.ledger.total_calls(), 0);
    }

    #[test]
    fn fingerprint_ignores_binding_layout_but_not_content() {
        let a = req().render().unwrap();
        let b = LlmRequest::new(TemplateId::TestLoc1).bind("files", "a.py").bind("issue", "I").render().unwrap();
        assert_eq!(a.fingerprint, b.fingerprint);
        let c = req().bind("issue", "J").render().unwrap();
        assert_ne!(a.fingerprint, c.fingerprint);
        assert_eq!(a.decoding.temperature, 0.0);
    }

    #[test]
    fn scripted_backend_repeats_last_response() {
        let mut s = ScriptedBackend::new(BTreeMap::from([(TemplateId::TestLoc1, vec!["a".into(), "b".into()])]));
        let r = req().render().unwrap();
        let got: Vec<String> = (0..3).map(|_| s.complete(&r).unwrap().0).collect();
        assert_eq!(got, vec!["a", "b", "b"]);
    }
}
