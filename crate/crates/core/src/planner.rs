//! Self-reflective action planning.
//!
//! The planner seeds READ actions from the localizers, asks the model for an
//! initial read-only plan, then alternates validation and a reflect/improve
//! call until the model reports it is satisfied or the turn cap is reached.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::llm::{Gateway, LlmRequest, Stage, TemplateId};
use crate::localizer::Localization;
use crate::repo_model::SourceIndex;

pub const MAX_TURNS: usize = 5;
pub const DEFAULT_TEST_NAME: &str = "test_issue_reproduction";
const TRUNCATION_MARKER: &str = "    # ... [truncated]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Read,
    Write,
    Modify,
}

impl ActionKind {
    fn keyword(self) -> &'static str {
        match self {
            ActionKind::Read => "READ",
            ActionKind::Write => "WRITE",
            ActionKind::Modify => "MODIFY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub file: String,
    pub suite: Option<String>,
    pub function: String,
}

impl Action {
    pub fn read(file: &str, suite: Option<&str>, function: &str) -> Self {
        Action { kind: ActionKind::Read, file: file.into(), suite: suite.map(Into::into), function: function.into() }
    }

    pub fn is_target(&self) -> bool {
        matches!(self.kind, ActionKind::Write | ActionKind::Modify)
    }

    /// Parse `READ path::function`, `WRITE path::Suite::function`, etc.
    pub fn parse_line(line: &str) -> Option<Action> {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        let (word, rest) = line.split_once(char::is_whitespace)?;
        let kind = match word.to_ascii_uppercase().trim_end_matches(':') {
            "READ" => ActionKind::Read,
            "WRITE" => ActionKind::Write,
            "MODIFY" => ActionKind::Modify,
            _ => return None,
        };
        let mut parts: Vec<&str> = rest.trim().trim_matches('`').split("::").map(str::trim).collect();
        if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
            return None;
        }
        let file = parts.remove(0).to_string();
        let function = parts.pop()?.trim_end_matches("()").to_string();
        if !function.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return None;
        }
        let suite = (!parts.is_empty()).then(|| parts.join("."));
        Some(Action { kind, file, suite, function })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.suite {
            Some(s) => write!(f, "{} {}::{}::{}", self.kind.keyword(), self.file, s.replace('.', "::"), self.function),
            None => write!(f, "{} {}::{}", self.kind.keyword(), self.file, self.function),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Satisfied,
    Unsatisfied,
    Unsure,
}

impl Verdict {
    /// Find the verdict in model output; anything unrecognised is `Unsure`.
    pub fn parse(text: &str) -> Verdict {
        for line in text.lines().rev() {
            let l = line.trim().trim_matches(['*', '`']).to_ascii_lowercase();
            let word = l.strip_prefix("verdict").map(|r| r.trim_start_matches([':', ' ']).trim()).unwrap_or(l.as_str());
            let word = word.trim_end_matches(['.', '!']);
            match word {
                "unsatisfied" => return Verdict::Unsatisfied,
                "satisfied" => return Verdict::Satisfied,
                "unsure" => return Verdict::Unsure,
                _ => {}
            }
        }
        Verdict::Unsure
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub line: String,
    pub accepted: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStats {
    pub read: usize,
    pub write: usize,
    pub modify: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub verdicts: Vec<Verdict>,
    pub turns: usize,
    pub validation_log: Vec<LogEntry>,
}

impl Plan {
    pub fn stats(&self) -> ActionStats {
        let count = |k| self.actions.iter().filter(|a| a.kind == k).count();
        ActionStats { read: count(ActionKind::Read), write: count(ActionKind::Write), modify: count(ActionKind::Modify) }
    }

    pub fn target(&self) -> Option<&Action> {
        self.actions.iter().find(|a| a.is_target())
    }

    pub fn reads(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| a.kind == ActionKind::Read)
    }

    pub fn render(&self) -> String {
        if self.actions.is_empty() {
            return "(empty plan)\n".to_string();
        }
        self.actions.iter().map(|a| format!("{a}\n")).collect()
    }

    fn log(&mut self, line: impl Into<String>, accepted: bool, reason: impl Into<String>) {
        self.validation_log.push(LogEntry { line: line.into(), accepted, reason: reason.into() });
    }

    pub fn dump_json(&self) -> serde_json::Value {
        serde_json::json!({
            "actions": self.actions.iter().map(|a| serde_json::json!({
                "kind": a.kind, "file": a.file, "suite": a.suite, "function": a.function,
            })).collect::<Vec<_>>(),
            "verdicts": self.verdicts,
            "turns": self.turns,
            "stats": self.stats(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub max_turns: usize,
    /// Per-function byte budget for bodies placed in prompts.
    pub read_body_bytes: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { max_turns: MAX_TURNS, read_body_bytes: 8 * 1024 }
    }
}

/// Read actions for every localized function, focal first, without duplicates.
pub fn seed_plan(test_loc: &Localization, focal_loc: &Localization) -> Plan {
    let mut plan = Plan::default();
    for f in focal_loc.functions.iter().chain(&test_loc.functions) {
        let a = Action::read(&f.file, f.suite.as_deref(), &f.name);
        if !plan.actions.contains(&a) {
            plan.actions.push(a);
        }
    }
    plan
}

/// Cut `body` to `budget` bytes from the tail, on a line boundary, with a marker.
pub fn truncate_body(body: &str, budget: usize) -> String {
    if body.len() <= budget {
        return body.to_string();
    }
    let mut out = String::new();
    for line in body.lines() {
        if out.len() + line.len() + 1 > budget {
            break;
        }
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(TRUNCATION_MARKER);
    out.push('\n');
    out
}

/// Source of every resolvable READ target, in plan order.
pub fn read_context<'a>(actions: impl IntoIterator<Item = &'a Action>, index: &SourceIndex, budget: usize) -> String {
    let mut out = String::new();
    for a in actions.into_iter().filter(|a| a.kind == ActionKind::Read) {
        let body = index
            .resolve_function(&a.file, a.suite.as_deref(), &a.function)
            .and_then(|f| index.function_source(f).ok())
            .map(|b| truncate_body(&b, budget))
            .unwrap_or_else(|| "<unavailable>\n".to_string());
        let label = match &a.suite {
            Some(s) => format!("{}::{}::{}", a.file, s.replace('.', "::"), a.function),
            None => format!("{}::{}", a.file, a.function),
        };
        out.push_str(&format!("# {label}\n{body}\n"));
    }
    out
}

fn parse_actions(text: &str, plan: &mut Plan, read_only: bool) {
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if line.to_ascii_lowercase().trim_start_matches(['*', '`']).starts_with("verdict") {
            continue;
        }
        match Action::parse_line(line) {
            Some(mut a) => {
                if read_only && a.kind != ActionKind::Read {
                    plan.log(line, true, "coerced to read");
                    a.kind = ActionKind::Read;
                }
                if !plan.actions.contains(&a) {
                    plan.actions.push(a);
                }
            }
            None => plan.log(line, false, "unparseable"),
        }
    }
}

/// Ask for the initial read-only plan.
pub fn propose_initial(issue: &str, context: &str, gw: &mut Gateway) -> Result<Plan, PlanError> {
    let req = LlmRequest::new(TemplateId::PlanInitial).bind("issue", issue).bind("context", context);
    let resp = gw.complete(Stage::ActionPlusGenerate, req)?;
    let mut plan = Plan::default();
    parse_actions(&resp.text, &mut plan, true);
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub entries: Vec<(Action, Result<(), String>)>,
}

impl ValidationReport {
    pub fn valid_actions(&self) -> impl Iterator<Item = &Action> {
        self.entries.iter().filter(|(_, r)| r.is_ok()).map(|(a, _)| a)
    }

    pub fn all_valid(&self) -> bool {
        self.entries.iter().all(|(_, r)| r.is_ok())
    }

    /// Feedback text for the next reflection prompt.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "The plan is empty.\n".to_string();
        }
        let mut out = String::new();
        for (a, r) in &self.entries {
            match r {
                Ok(()) => out.push_str(&format!("OK: {a}\n")),
                Err(reason) => out.push_str(&format!("INVALID: {a} ({reason})\n")),
            }
        }
        if !self.entries.iter().any(|(a, r)| a.is_target() && r.is_ok()) {
            out.push_str("The plan has no valid WRITE or MODIFY action yet.\n");
        }
        out
    }
}

fn check_action(a: &Action, index: &SourceIndex) -> Result<(), String> {
    let structure = index.extract_structure(&a.file).map_err(|_| "missing file".to_string())?;
    match a.kind {
        ActionKind::Read | ActionKind::Modify => structure
            .find_function(a.suite.as_deref(), &a.function)
            .map(|_| ())
            .ok_or_else(|| "missing function".to_string()),
        ActionKind::Write => {
            if !structure.parse_ok {
                return Err("file does not parse".into());
            }
            if let Some(s) = &a.suite {
                if structure.find_suite(s).is_none() && !structure.suites.iter().any(|x| x.name.ends_with(&format!(".{s}"))) {
                    return Err("missing suite".into());
                }
            }
            if structure.find_function(a.suite.as_deref(), &a.function).is_some_and(|f| f.suite == a.suite) {
                return Err("function already exists; use MODIFY".into());
            }
            Ok(())
        }
    }
}

pub fn validate_plan(plan: &Plan, index: &SourceIndex) -> ValidationReport {
    ValidationReport { entries: plan.actions.iter().map(|a| (a.clone(), check_action(a, index))).collect() }
}

/// One reflect/improve call; returns the proposed plan and the model's verdict.
pub fn reflect_improve(
    plan: &Plan,
    report: &ValidationReport,
    issue: &str,
    gw: &mut Gateway,
) -> Result<(Plan, Verdict), PlanError> {
    let req = LlmRequest::new(TemplateId::PlanReflect)
        .bind("issue", issue)
        .bind("plan", plan.render())
        .bind("feedback", report.render());
    let resp = gw.complete(Stage::ActionPlusGenerate, req)?;
    let mut next = Plan::default();
    parse_actions(&resp.text, &mut next, false);
    Ok((next, Verdict::parse(&resp.text)))
}

pub fn default_target(test_loc: &Localization, index: &SourceIndex) -> Result<Action, PlanError> {
    let file = test_loc
        .files
        .first()
        .cloned()
        .or_else(|| index.list_test_files().into_iter().next())
        .or_else(|| index.parsed_files().into_iter().next())
        .ok_or(PlanError::NoTarget)?;
    let structure = index.extract_structure(&file).map_err(|_| PlanError::NoTarget)?;
    let mut name = DEFAULT_TEST_NAME.to_string();
    let mut n = 2;
    while structure.functions.iter().any(|f| f.name == name) {
        name = format!("{DEFAULT_TEST_NAME}_{n}");
        n += 1;
    }
    Ok(Action { kind: ActionKind::Write, file, suite: None, function: name })
}

/// Whole planning flow. The result is validated, holds exactly one WRITE or
/// MODIFY action (last), and its READ actions come first.
pub fn run_planner(
    issue: &str,
    test_loc: &Localization,
    focal_loc: &Localization,
    index: &SourceIndex,
    gw: &mut Gateway,
    cfg: &PlannerConfig,
) -> Result<Plan, PlanError> {
    let seed = seed_plan(test_loc, focal_loc);
    let context = read_context(&seed.actions, index, cfg.read_body_bytes);
    let mut current = propose_initial(issue, &context, gw)?;
    let mut log = std::mem::take(&mut current.validation_log);
    let mut verdicts = Vec::new();

    for turn in 1..=cfg.max_turns.min(MAX_TURNS) {
        let report = validate_plan(&current, index);
        for (a, r) in &report.entries {
            if let Err(reason) = r {
                log.push(LogEntry { line: a.to_string(), accepted: false, reason: format!("turn {turn}: {reason}") });
            }
        }
        let (mut next, verdict) = reflect_improve(&current, &report, issue, gw)?;
        verdicts.push(verdict);
        log.append(&mut next.validation_log);
        if next.actions.is_empty() {
            log.push(LogEntry { line: String::new(), accepted: false, reason: format!("turn {turn}: no actions proposed, keeping previous plan") });
        } else {
            current = next;
        }
        if verdict == Verdict::Satisfied {
            break;
        }
    }

    let report = validate_plan(&current, index);
    let mut reads = Vec::new();
    let mut target: Option<Action> = None;
    for (a, r) in report.entries {
        match r {
            Err(reason) => log.push(LogEntry { line: a.to_string(), accepted: false, reason: format!("final: {reason}") }),
            Ok(()) if a.is_target() => {
                if target.is_none() {
                    target = Some(a);
                } else {
                    log.push(LogEntry { line: a.to_string(), accepted: false, reason: "final: extra write/modify dropped".into() });
                }
            }
            Ok(()) => {
                if !reads.contains(&a) {
                    reads.push(a);
                }
            }
        }
    }
    let target = match target {
        Some(t) => t,
        None => {
            let t = default_target(test_loc, index)?;
            log.push(LogEntry { line: t.to_string(), accepted: true, reason: "final: default write action".into() });
            t
        }
    };
    if reads.is_empty() {
        reads.extend(validate_plan(&seed, index).valid_actions().cloned());
    }
    if reads.is_empty() {
        if let Some(f) = index.extract_structure(&target.file).ok().and_then(|s| s.functions.first()) {
            reads.push(Action::read(&f.file, f.suite.as_deref(), &f.name));
        }
    }
    let mut actions = reads;
    actions.push(target);
    Ok(Plan { actions, turns: verdicts.len(), verdicts, validation_log: log })
}
