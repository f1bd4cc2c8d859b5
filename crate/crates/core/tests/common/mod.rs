#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use issuetest::eval::{load_manifest, InstanceSpec};
use issuetest::generator::CommandLinter;
use issuetest::llm::{CostLedger, Gateway, PriceConfig, ScriptedBackend, TemplateId, Transcript, TranscriptMode};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Deterministic undefined-name linter shipped with the fixtures.
pub fn linter() -> CommandLinter {
    let script = fixtures().join("lint_undefined.py");
    CommandLinter { command: format!("python3 '{}' {{file}}", script.display()), ..Default::default() }
}

pub fn instances() -> Vec<InstanceSpec> {
    load_manifest(&fixtures().join("manifest.json")).expect("fixture manifest")
}

pub fn instance(id: &str) -> InstanceSpec {
    instances().into_iter().find(|i| i.instance_id == id).expect("fixture instance")
}

pub fn replay_gateway(id: &str) -> Gateway {
    let path = fixtures().join("instances").join(id).join("transcript.jsonl");
    let t = Transcript::load(&path, TranscriptMode::Replay).expect("fixture transcript");
    Gateway::replay(t, CostLedger::new(PriceConfig::default()))
}

pub fn scripted_gateway(responses: &[(TemplateId, Vec<String>)]) -> Gateway {
    let map: BTreeMap<TemplateId, Vec<String>> = responses.iter().cloned().collect();
    Gateway::record(Box::new(ScriptedBackend::new(map)), CostLedger::new(PriceConfig::default()))
}

/// The instance's own scripted responses, parsed from its script file.
pub fn instance_script(id: &str) -> BTreeMap<TemplateId, Vec<String>> {
    let path = fixtures().join("instances").join(id).join("script.json");
    let b = ScriptedBackend::load(&path).expect("fixture script");
    b.responses
}
