//! Two-call localization of test and focal code.
//!
//! The first call picks files from a candidate list; names not in the list are
//! dropped. The second call picks functions from those files; file names it
//! invents are mapped onto the nearest candidate by edit distance, and
//! functions that do not exist in the resulting file are dropped.

use serde::{Deserialize, Serialize};

use crate::distance::repair_name;
use crate::error::GatewayError;
use crate::llm::{parse_line_list, Gateway, LlmRequest, Stage, TemplateId};
use crate::repo_model::{FunctionRef, SourceIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocKind {
    Test,
    Focal,
}

impl LocKind {
    fn stage(self) -> Stage {
        match self {
            LocKind::Test => Stage::TestLocalization,
            LocKind::Focal => Stage::FocalLocalization,
        }
    }

    fn templates(self) -> (TemplateId, TemplateId) {
        match self {
            LocKind::Test => (TemplateId::TestLoc1, TemplateId::TestLoc2),
            LocKind::Focal => (TemplateId::FocalLoc1, TemplateId::FocalLoc2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizerConfig {
    pub max_files: usize,
    /// Byte budget for each candidate list shown to the model.
    pub candidate_bytes: usize,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        LocalizerConfig { max_files: 10, candidate_bytes: 64 * 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localization {
    pub kind: LocKind,
    pub files: Vec<String>,
    pub functions: Vec<FunctionRef>,
    pub dropped: Vec<String>,
    pub repaired: Vec<Repair>,
}

impl Localization {
    pub fn empty(kind: LocKind) -> Self {
        Localization { kind, files: Vec::new(), functions: Vec::new(), dropped: Vec::new(), repaired: Vec::new() }
    }

    pub fn dump_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "files": self.files,
            "functions": self.functions.iter().map(|f| serde_json::json!({
                "file": f.file, "suite": f.suite, "name": f.name,
            })).collect::<Vec<_>>(),
            "dropped": self.dropped,
            "repaired": self.repaired.iter().map(|r| serde_json::json!([r.from, r.to])).collect::<Vec<_>>(),
        })
    }
}

/// Files the model may choose from: test files, or every parsed file for focal code.
pub fn candidate_pool(index: &SourceIndex, kind: LocKind) -> Vec<String> {
    match kind {
        LocKind::Test => index.list_test_files(),
        LocKind::Focal => index.parsed_files(),
    }
}

/// Join items (already path-sorted) until the byte budget is reached.
fn budgeted_list<'a>(items: impl IntoIterator<Item = &'a str>, budget: usize) -> String {
    let mut out = String::new();
    for item in items {
        if out.len() + item.len() + 1 > budget {
            break;
        }
        out.push_str(item);
        out.push('\n');
    }
    out
}

fn dedup_in_order(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// First call: choose up to `max_files` files from the pool. Returns (files, dropped).
pub fn localize_files(
    issue: &str,
    index: &SourceIndex,
    kind: LocKind,
    gw: &mut Gateway,
    cfg: &LocalizerConfig,
) -> Result<(Vec<String>, Vec<String>), GatewayError> {
    let pool = candidate_pool(index, kind);
    let req = LlmRequest::new(kind.templates().0)
        .bind("issue", issue)
        .bind("files", budgeted_list(pool.iter().map(String::as_str), cfg.candidate_bytes));
    let resp = gw.complete(kind.stage(), req)?;
    let (kept, dropped): (Vec<String>, Vec<String>) =
        dedup_in_order(parse_line_list(&resp.text)).into_iter().partition(|f| pool.contains(f));
    Ok((kept.into_iter().take(cfg.max_files).collect(), dropped))
}

fn candidate_lines(index: &SourceIndex, files: &[String], kind: LocKind) -> Vec<String> {
    let mut lines = Vec::new();
    for file in files {
        let Ok(structure) = index.extract_structure(file) else { continue };
        let funcs: Vec<&FunctionRef> = match kind {
            LocKind::Test => structure.test_functions().collect(),
            LocKind::Focal => structure.functions.iter().collect(),
        };
        if funcs.is_empty() {
            lines.push(file.clone());
        }
        for f in funcs {
            lines.push(f.test_id());
        }
    }
    lines
}

fn split_entry(entry: &str) -> (String, Option<String>, Option<String>) {
    let mut parts: Vec<&str> = entry.split("::").map(str::trim).collect();
    let file = parts.remove(0).to_string();
    match parts.len() {
        0 => (file, None, None),
        _ => {
            let name = parts.pop().map(|n| n.trim_end_matches("()").to_string());
            let suite = if parts.is_empty() { None } else { Some(parts.join(".")) };
            (file, suite, name)
        }
    }
}

/// Second call: choose functions from the localized files.
pub fn localize_functions(
    issue: &str,
    files: &[String],
    index: &SourceIndex,
    kind: LocKind,
    gw: &mut Gateway,
    cfg: &LocalizerConfig,
) -> Result<Localization, GatewayError> {
    let mut loc = Localization::empty(kind);
    if files.is_empty() {
        return Ok(loc);
    }
    let pool = candidate_pool(index, kind);
    let shown = candidate_lines(index, files, kind);
    let req = LlmRequest::new(kind.templates().1)
        .bind("issue", issue)
        .bind("candidates", budgeted_list(shown.iter().map(String::as_str), cfg.candidate_bytes));
    let resp = gw.complete(kind.stage(), req)?;

    let mut chosen_files = Vec::new();
    for entry in dedup_in_order(parse_line_list(&resp.text)) {
        let (raw_file, suite, name) = split_entry(&entry);
        let file = if pool.contains(&raw_file) {
            raw_file
        } else {
            match repair_name(&raw_file, pool.iter().map(String::as_str)) {
                Ok(fixed) => {
                    loc.repaired.push(Repair { from: raw_file, to: fixed.clone() });
                    fixed
                }
                Err(_) => {
                    loc.dropped.push(entry);
                    continue;
                }
            }
        };
        if !chosen_files.contains(&file) {
            chosen_files.push(file.clone());
        }
        if let Some(name) = name {
            match index.resolve_function(&file, suite.as_deref(), &name) {
                Some(f) if !loc.functions.contains(f) => loc.functions.push(f.clone()),
                Some(_) => {}
                None => loc.dropped.push(entry),
            }
        }
    }
    if chosen_files.is_empty() {
        chosen_files = files.to_vec();
    }
    chosen_files.truncate(cfg.max_files);
    loc.functions.retain(|f| chosen_files.contains(&f.file));
    loc.files = chosen_files;
    Ok(loc)
}

/// Both calls for one kind.
pub fn localize(
    issue: &str,
    index: &SourceIndex,
    kind: LocKind,
    gw: &mut Gateway,
    cfg: &LocalizerConfig,
) -> Result<Localization, GatewayError> {
    let (files, dropped) = localize_files(issue, index, kind, gw, cfg)?;
    let mut loc = localize_functions(issue, &files, index, kind, gw, cfg)?;
    let mut all_dropped = dropped;
    all_dropped.append(&mut loc.dropped);
    loc.dropped = all_dropped;
    Ok(loc)
}
