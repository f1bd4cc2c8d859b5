//! Import repair for a freshly placed test function.
//!
//! Undefined names reported by the linter inside the new function get a
//! dummy `import NAME`. Every dummy or model-written import is then looked up
//! in the repository index and rewritten to the repository's module path when
//! a definition is found; otherwise it is kept as written.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::lint::{Diagnostic, Linter};
use super::placement::Placed;
use crate::python::{self, LogicalLine};
use crate::repo_model::{module_path_of, FileStructure, SourceIndex};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRepair {
    pub text: String,
    pub undefined: Vec<String>,
    pub inserted: Vec<String>,
    pub rewritten: Vec<Rewrite>,
    pub warnings: Vec<String>,
    pub diagnostics_before: usize,
    pub diagnostics_after: Option<usize>,
}

/// Pick the file that should provide `name`: source files before tests, then shortest path.
fn preferred(files: &[String]) -> Option<&String> {
    files.iter().min_by_key(|f| {
        let is_test = f.split('/').any(|seg| seg.starts_with("test") || seg == "tests");
        (is_test, f.len(), (*f).clone())
    })
}

fn is_module_match(file: &str, name: &str) -> bool {
    let m = module_path_of(file);
    m == name || m.ends_with(&format!(".{name}"))
}

/// Rewrite one import line against the index. `None` means keep it as written.
pub fn resolve_import(line: &str, index: &SourceIndex) -> Option<String> {
    let ll = LogicalLine { start: 1, end: 1, indent: 0, code: line.trim().to_string(), ends_with_colon: false };
    let imp = python::parse_import(&ll)?;
    let flat = line.trim();
    if flat.starts_with("from ") {
        let module = imp.module_path.as_str();
        if module.starts_with('.') {
            return None;
        }
        let files: Vec<String> = index.find_definition(module).into_iter().filter(|f| is_module_match(f, module)).collect();
        let file = preferred(&files)?;
        let path = module_path_of(file);
        if path == module {
            return None;
        }
        let names = flat.split_once(" import ").map(|(_, n)| n.trim()).unwrap_or("");
        return Some(format!("from {path} import {names}"));
    }

    // plain `import X` / `import X as Y`
    let rest = flat.strip_prefix("import ")?.trim();
    if rest.contains(',') {
        return None;
    }
    let (target, alias) = match rest.split_once(" as ") {
        Some((t, a)) => (t.trim(), Some(a.trim())),
        None => (rest, None),
    };
    if target.contains('.') && alias.is_none() {
        return None;
    }
    let files = index.find_definition(target);
    let file = preferred(&files)?;
    let path = module_path_of(file);
    let rewritten = if is_module_match(file, target) {
        if path == target {
            return None;
        }
        let (parent, leaf) = path.rsplit_once('.')?;
        let bound = alias.unwrap_or(leaf);
        if bound == leaf {
            format!("from {parent} import {leaf}")
        } else {
            format!("from {parent} import {leaf} as {bound}")
        }
    } else {
        let leaf = target.rsplit('.').next().unwrap_or(target);
        match alias {
            Some(a) if a != leaf => format!("from {path} import {leaf} as {a}"),
            _ => format!("from {path} import {leaf}"),
        }
    };
    Some(rewritten)
}

/// 0-based insertion index for new module-level imports.
fn import_anchor(text: &str, structure: &FileStructure) -> usize {
    let physical: Vec<&str> = text.lines().collect();
    let top_level_end = structure
        .imports
        .iter()
        .filter(|i| physical.get(i.start_line - 1).is_some_and(|l| !l.starts_with([' ', '\t'])))
        .map(|i| i.end_line)
        .max();
    if let Some(end) = top_level_end {
        return end;
    }
    // after a module docstring, if any
    match python::logical_lines(text).ok().and_then(|ls| ls.into_iter().next()) {
        Some(first) if first.code.trim_start().starts_with(['"', '\'']) => first.end,
        _ => 0,
    }
}

fn bound_names(structure: &FileStructure) -> BTreeSet<String> {
    structure.imports.iter().flat_map(|i| i.imported_names.iter().cloned()).collect()
}

fn count_in(diags: &[Diagnostic], start: usize, end: usize) -> usize {
    diags.iter().filter(|d| d.line >= start && d.line <= end).count()
}

pub fn repair_imports(
    placed: &Placed,
    extra_imports: &[String],
    rel_path: &str,
    index: &SourceIndex,
    linter: &dyn Linter,
) -> ImportRepair {
    let mut warnings = Vec::new();
    let before = match linter.lint(rel_path, &placed.text) {
        Ok(d) => Some(d),
        Err(e) => {
            warn!(file = rel_path, error = %e, "lint step skipped");
            warnings.push(format!("lint step skipped: {e}"));
            None
        }
    };
    let in_function: Vec<&Diagnostic> = before
        .iter()
        .flatten()
        .filter(|d| d.line >= placed.start_line && d.line <= placed.end_line)
        .collect();
    let mut undefined: Vec<String> = Vec::new();
    for d in &in_function {
        if let Some(n) = d.name() {
            if !undefined.iter().any(|u| u == n) {
                undefined.push(n.to_string());
            }
        }
    }

    let structure = FileStructure::from_source(rel_path, &placed.text);
    let existing_lines: BTreeSet<String> =
        structure.imports.iter().flat_map(|i| i.raw_text.lines().map(|l| l.trim().to_string())).collect();
    let mut already_bound = bound_names(&structure);
    // Names the draft imports itself are not candidates for a dummy import.
    let extra = FileStructure::from_source(rel_path, &extra_imports.join("\n"));
    already_bound.extend(bound_names(&extra));

    let mut candidates: Vec<String> = extra_imports.iter().map(|s| s.trim().to_string()).collect();
    for n in &undefined {
        if !already_bound.contains(n) {
            candidates.push(format!("import {n}"));
        }
    }

    let mut rewritten = Vec::new();
    let mut inserted: Vec<String> = Vec::new();
    for line in candidates {
        let resolved = match resolve_import(&line, index) {
            Some(r) => {
                rewritten.push(Rewrite { from: line.clone(), to: r.clone() });
                r
            }
            None => line,
        };
        if existing_lines.contains(&resolved) || inserted.contains(&resolved) {
            continue;
        }
        inserted.push(resolved);
    }

    let mut text = placed.text.clone();
    if !inserted.is_empty() {
        let at = import_anchor(&placed.text, &structure);
        let mut lines: Vec<String> = placed.text.lines().map(str::to_string).collect();
        let mut block = inserted.clone();
        if at == 0 && lines.first().is_some_and(|l| !l.trim().is_empty()) {
            block.push(String::new());
        }
        lines.splice(at..at, block);
        text = lines.join("\n");
        text.push('\n');
    }

    let shift = text.lines().count() - placed.text.lines().count();
    let diagnostics_before = before.as_ref().map_or(0, |d| count_in(d, placed.start_line, placed.end_line));
    let mut diagnostics_after = None;
    if before.is_some() && text != placed.text {
        match linter.lint(rel_path, &text) {
            Ok(after) => {
                let total_before = before.as_ref().map_or(0, Vec::len);
                if after.len() > total_before {
                    warnings.push("import repair increased lint diagnostics; reverted".into());
                    return ImportRepair {
                        text: placed.text.clone(),
                        undefined,
                        inserted: Vec::new(),
                        rewritten: Vec::new(),
                        warnings,
                        diagnostics_before,
                        diagnostics_after: Some(diagnostics_before),
                    };
                }
                diagnostics_after = Some(count_in(&after, placed.start_line + shift, placed.end_line + shift));
            }
            Err(e) => warnings.push(format!("post-repair lint failed: {e}")),
        }
    } else if before.is_some() {
        diagnostics_after = Some(diagnostics_before);
    }

    ImportRepair { text, undefined, inserted, rewritten, warnings, diagnostics_before, diagnostics_after }
}
