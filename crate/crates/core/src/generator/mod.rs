//! Test synthesis: prompt assembly, model output parsing, placement, import
//! repair, and patch emission. Also hosts the zero-shot whole-file baseline.

pub mod imports;
pub mod lint;
pub mod placement;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::diff::{parse_patch, unified_diff};
use crate::error::GenError;
use crate::eval::contributed_tests_in_file;
use crate::llm::{first_code_block, Gateway, LlmRequest, Stage, TemplateId};
use crate::planner::{read_context, Action, ActionKind, Plan};
use crate::python;
use crate::repo_model::{FileStructure, SourceIndex};

pub use imports::{repair_imports, ImportRepair};
pub use lint::{CommandLinter, Diagnostic, Linter};
pub use placement::{place, Placed};

/// Anchor value meaning "no preceding function was named".
pub const EOF_ANCHOR: &str = "<eof>";
pub const ZERO_SHOT_PATH: &str = "tests/test_issue_repro.py";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftMode {
    Write,
    Modify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub suite: Option<String>,
    pub name: String,
}

/// A generated test function awaiting placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftTest {
    /// One function definition, dedented to column 0.
    pub code: String,
    pub function_name: String,
    pub mode: DraftMode,
    pub target_file: String,
    pub target_suite: Option<String>,
    /// Write mode: the function to insert after. Modify mode: the function to replace.
    pub anchor: Anchor,
    pub extra_imports: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPatch {
    pub diff: String,
    pub target_file: String,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenContext {
    pub issue: String,
    pub target: Action,
    pub reads: String,
    pub structure: String,
    pub imports: String,
    pub original: Option<String>,
    pub file_text: String,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub read_body_bytes: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { read_body_bytes: 8 * 1024 }
    }
}

/// Assemble the generation context for `target`, reading `reads` in order.
pub fn gather_context_for(
    issue: &str,
    reads: &[Action],
    target: &Action,
    index: &SourceIndex,
    cfg: &GeneratorConfig,
) -> Result<GenContext, GenError> {
    let file_text = index.read_file(&target.file)?;
    let structure = FileStructure::from_source(&target.file, &file_text);
    let mut log = Vec::new();
    for a in reads {
        if index.resolve_function(&a.file, a.suite.as_deref(), &a.function).is_none()
            || !index.root.join(&a.file).is_file()
        {
            log.push(format!("read target unavailable: {a}"));
        }
    }
    let reads_text = read_context(reads, index, cfg.read_body_bytes);
    let original = match target.kind {
        ActionKind::Modify => {
            let f = structure
                .find_function(target.suite.as_deref(), &target.function)
                .ok_or_else(|| GenError::Placement(format!("modify target {target} not found")))?;
            Some(crate::repo_model::slice_lines(&file_text, f.decorators_start, f.end_line))
        }
        _ => None,
    };
    let imports = structure.imports.iter().map(|i| format!("{}\n", i.raw_text)).collect::<String>();
    Ok(GenContext {
        issue: issue.to_string(),
        target: target.clone(),
        reads: reads_text,
        structure: structure.skeleton(),
        imports,
        original,
        file_text,
        log,
    })
}

pub fn gather_context(issue: &str, plan: &Plan, index: &SourceIndex, cfg: &GeneratorConfig) -> Result<GenContext, GenError> {
    let target = plan.target().ok_or(GenError::NoTarget)?;
    let reads: Vec<Action> = plan.reads().cloned().collect();
    gather_context_for(issue, &reads, target, index, cfg)
}

fn or_none(s: &str) -> String {
    if s.trim().is_empty() {
        "(none)\n".to_string()
    } else {
        s.to_string()
    }
}

fn parse_anchor(text: &str) -> Option<Anchor> {
    for line in text.lines() {
        let l = line.trim().trim_matches('*');
        let lower = l.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("preceding") {
            let value = l[l.len() - rest.len()..].trim_start_matches([':', ' ', '*']).trim();
            let value = value.trim_matches('`').trim_end_matches("()");
            let mut parts: Vec<&str> = value.split(['.', ':']).filter(|p| !p.is_empty()).collect();
            let name = parts.pop()?.trim().to_string();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return None;
            }
            let suite = (!parts.is_empty()).then(|| parts.join("."));
            return Some(Anchor { suite, name });
        }
    }
    None
}

/// Split a code block into its leading import lines and the first function definition.
fn split_code(code: &str) -> Result<(Vec<String>, String, String, Vec<String>), GenError> {
    let lines: Vec<&str> = code.lines().collect();
    let base = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| python::leading_ws(l).len())
        .min()
        .unwrap_or(0);
    let dedented: String = lines
        .iter()
        .map(|l| if l.len() >= base { format!("{}\n", &l[base..]) } else { format!("{}\n", l.trim_start()) })
        .collect();
    let module = python::parse_module_with_text(&dedented)
        .map_err(|e| GenError::Parse(format!("code block does not parse: {e}")))?;
    let first = module
        .functions
        .iter()
        .find(|f| f.suite.is_none())
        .or_else(|| module.functions.first())
        .ok_or_else(|| GenError::Parse("no function definition in model output".into()))?;
    let mut warnings = Vec::new();
    let total = module.functions.len();
    if total > 1 {
        warnings.push(format!("model produced {total} functions; keeping {}", first.name));
    }
    let imports = module
        .imports
        .iter()
        .filter(|i| i.start_line < first.decorators_start || i.start_line > first.end_line)
        .map(|i| i.raw_text.lines().map(str::trim).collect::<Vec<_>>().join(" "))
        .collect();
    let fn_lines: Vec<&str> = dedented.lines().collect();
    let body = &fn_lines[first.decorators_start - 1..first.end_line];
    let indent = body.iter().map(|l| python::leading_ws(l).len()).min().unwrap_or(0);
    let text: String = body
        .iter()
        .map(|l| if l.trim().is_empty() { "\n".to_string() } else { format!("{}\n", &l[indent.min(l.len())..]) })
        .collect();
    Ok((imports, first.name.clone(), text, warnings))
}

fn extract_code(text: &str) -> Option<String> {
    first_code_block(text).or_else(|| {
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| {
            let t = l.trim_start();
            t.starts_with("def ") || t.starts_with("async def ") || t.starts_with('@') || t.starts_with("import ") || t.starts_with("from ")
        })?;
        Some(lines[start..].iter().map(|l| format!("{l}\n")).collect())
    })
}

/// Parse a model reply into a draft for `ctx.target`.
pub fn parse_generation(text: &str, ctx: &GenContext) -> Result<DraftTest, GenError> {
    let code = extract_code(text).ok_or_else(|| GenError::Parse("no code block in model output".into()))?;
    let (extra_imports, function_name, code, mut warnings) = split_code(&code)?;
    for w in &warnings {
        warn!(target_file = %ctx.target.file, "{w}");
    }
    let (mode, anchor) = match ctx.target.kind {
        ActionKind::Modify => (
            DraftMode::Modify,
            Anchor { suite: ctx.target.suite.clone(), name: ctx.target.function.clone() },
        ),
        _ => {
            let anchor = parse_anchor(text).unwrap_or_else(|| {
                warnings.push("no preceding function named; appending".into());
                Anchor { suite: None, name: EOF_ANCHOR.into() }
            });
            (DraftMode::Write, anchor)
        }
    };
    Ok(DraftTest {
        code,
        function_name,
        mode,
        target_file: ctx.target.file.clone(),
        target_suite: ctx.target.suite.clone(),
        anchor,
        extra_imports,
        warnings,
    })
}

/// One generation call for `ctx`.
pub fn generate(ctx: &GenContext, gw: &mut Gateway, stage: Stage) -> Result<DraftTest, GenError> {
    let function = match &ctx.target.suite {
        Some(s) => format!("{s}.{}", ctx.target.function),
        None => ctx.target.function.clone(),
    };
    let mut req = LlmRequest::new(match ctx.target.kind {
        ActionKind::Modify => TemplateId::GenModify,
        _ => TemplateId::GenWrite,
    })
    .bind("issue", ctx.issue.as_str())
    .bind("context", or_none(&ctx.reads))
    .bind("target_file", ctx.target.file.as_str())
    .bind("structure", or_none(&ctx.structure))
    .bind("imports", or_none(&ctx.imports))
    .bind("function", function);
    if let Some(orig) = &ctx.original {
        req = req.bind("original", orig.as_str());
    }
    let resp = gw.complete(stage, req)?;
    parse_generation(&resp.text, ctx)
}

/// Unified diff from `old_text` to `new_text`, with the test ids it contributes.
pub fn emit_patch(old_text: Option<&str>, new_text: &str, path: &str) -> Result<TestPatch, GenError> {
    let diff = unified_diff(old_text, new_text, path)?;
    let parsed = parse_patch(&diff)?;
    let structure = FileStructure::from_source(path, new_text);
    let test_ids = parsed.files.first().map(|fp| contributed_tests_in_file(fp, &structure)).unwrap_or_default();
    Ok(TestPatch { diff, target_file: path.to_string(), test_ids })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub draft: DraftTest,
    pub imports: ImportRepair,
    pub patch: TestPatch,
    pub log: Vec<String>,
}

/// Generate, place, repair imports, and emit the patch for one context.
pub fn synthesize(
    ctx: &GenContext,
    index: &SourceIndex,
    gw: &mut Gateway,
    linter: &dyn Linter,
    stage: Stage,
) -> Result<Candidate, GenError> {
    let draft = generate(ctx, gw, stage)?;
    let structure = FileStructure::from_source(&ctx.target.file, &ctx.file_text);
    let placed = place(&draft, &ctx.file_text, &structure)?;
    let repaired = repair_imports(&placed, &draft.extra_imports, &ctx.target.file, index, linter);
    let after = FileStructure::from_source(&ctx.target.file, &repaired.text);
    if !after.parse_ok {
        return Err(GenError::Placement(format!(
            "patched {} does not parse: {}",
            ctx.target.file,
            after.parse_error.unwrap_or_default()
        )));
    }
    let patch = emit_patch(Some(&ctx.file_text), &repaired.text, &ctx.target.file)?;
    let mut log = ctx.log.clone();
    log.extend(draft.warnings.iter().cloned());
    log.extend(repaired.warnings.iter().cloned());
    Ok(Candidate { draft, imports: repaired, patch, log })
}

/// Whole-file baseline: no localization, no planning.
pub fn zero_shot(
    issue: &str,
    repo_name: &str,
    existing: Option<&str>,
    gw: &mut Gateway,
    stage: Stage,
) -> Result<TestPatch, GenError> {
    let req = LlmRequest::new(TemplateId::ZeroShot).bind("repo", repo_name).bind("issue", issue);
    let resp = gw.complete(stage, req)?;
    let code = first_code_block(&resp.text).ok_or_else(|| GenError::Parse("no code block in model output".into()))?;
    if code.trim().is_empty() {
        return Err(GenError::Parse("empty code block".into()));
    }
    let structure = FileStructure::from_source(ZERO_SHOT_PATH, &code);
    if !structure.parse_ok {
        return Err(GenError::Parse(format!("generated file does not parse: {}", structure.parse_error.unwrap_or_default())));
    }
    emit_patch(existing, &code, ZERO_SHOT_PATH)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        assert_eq!(parse_anchor("PRECEDING: test_a").unwrap(), Anchor { suite: None, name: "test_a".into() });
        assert_eq!(
            parse_anchor("**Preceding:** `TestX.test_b()`").unwrap(),
            Anchor { suite: Some("TestX".into()), name: "test_b".into() }
        );
        assert_eq!(parse_anchor("preceding: TestX::test_b").unwrap().suite.as_deref(), Some("TestX"));
        assert!(parse_anchor("no anchor here").is_none());
    }

    #[test]
    fn code_split_keeps_first_function_and_imports() {
        let code = "import numpy as np\nfrom pkg import f\n\n    \ndef test_one():\n    assert f(np.nan)\n\ndef test_two():\n    pass\n";
        let (imports, name, text, warnings) = split_code(code).unwrap();
        assert_eq!(imports, vec!["import numpy as np", "from pkg import f"]);
        assert_eq!(name, "test_one");
        assert_eq!(text, "def test_one():\n    assert f(np.nan)\n");
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn indented_method_is_dedented() {
        let code = "    @pytest.mark.x\n    def test_m(self):\n        assert True\n";
        let (_, name, text, _) = split_code(code).unwrap();
        assert_eq!(name, "test_m");
        assert_eq!(text, "@pytest.mark.x\ndef test_m(self):\n    assert True\n");
    }

    #[test]
    fn prose_only_is_a_parse_error() {
        assert!(extract_code("I cannot write this test.").is_none());
    }
}
