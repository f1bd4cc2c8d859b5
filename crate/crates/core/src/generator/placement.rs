//! Insertion of a generated function into its target file.

use crate::error::GenError;
use crate::python::leading_ws;
use crate::repo_model::{FileStructure, FunctionRef};

use super::{DraftMode, DraftTest, EOF_ANCHOR};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placed {
    pub text: String,
    /// 1-based span of the inserted function (decorators included).
    pub start_line: usize,
    pub end_line: usize,
}

fn split_lines(text: &str) -> (Vec<String>, bool) {
    (text.lines().map(str::to_string).collect(), text.ends_with('\n') || text.is_empty())
}

fn join_lines(lines: &[String], trailing_newline: bool) -> String {
    let mut s = lines.join("\n");
    if trailing_newline && !lines.is_empty() {
        s.push('\n');
    }
    s
}

fn indented(code: &str, indent: &str) -> Vec<String> {
    code.lines()
        .map(|l| if l.trim().is_empty() { String::new() } else { format!("{indent}{l}") })
        .collect()
}

fn anchor_function<'a>(draft: &DraftTest, structure: &'a FileStructure) -> Option<&'a FunctionRef> {
    let anchor = &draft.anchor;
    if anchor.name == EOF_ANCHOR {
        return None;
    }
    if anchor.suite.is_some() {
        return structure.find_function(anchor.suite.as_deref(), &anchor.name);
    }
    // an unqualified anchor prefers a member of the suite the plan targets
    let in_target_suite = draft
        .target_suite
        .as_deref()
        .and_then(|s| structure.find_function(Some(s), &anchor.name));
    in_target_suite.or_else(|| structure.find_function(None, &anchor.name))
}

/// Put the draft into `file_text`.
///
/// Write mode inserts right after the anchor function at the anchor's
/// indentation. A missing anchor appends at the end of the targeted suite when
/// the plan named one that exists, and at the end of the file otherwise.
/// Modify mode replaces the named function's span, decorators included.
pub fn place(draft: &DraftTest, file_text: &str, structure: &FileStructure) -> Result<Placed, GenError> {
    let (mut lines, trailing) = split_lines(file_text);
    match draft.mode {
        DraftMode::Write => {
            let (after, indent) = match anchor_function(draft, structure) {
                Some(f) => (f.end_line, leading_ws(&lines[f.start_line - 1]).to_string()),
                None => match draft.target_suite.as_deref().and_then(|s| structure.find_suite(s)) {
                    Some(suite) => {
                        let indent = suite
                            .members
                            .first()
                            .map(|m| leading_ws(&lines[m.start_line - 1]).to_string())
                            .unwrap_or_else(|| format!("{}    ", leading_ws(&lines[suite.start_line - 1])));
                        (suite.end_line, indent)
                    }
                    None => {
                        let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
                        (last, String::new())
                    }
                },
            };
            let mut block = Vec::new();
            if after > 0 {
                block.push(String::new());
                if indent.is_empty() {
                    block.push(String::new());
                }
            }
            let code = indented(&draft.code, &indent);
            let start_line = after + block.len() + 1;
            let end_line = start_line + code.len() - 1;
            block.extend(code);
            let next_nonblank = lines.get(after).is_some_and(|l| !l.trim().is_empty());
            if next_nonblank {
                block.push(String::new());
                if indent.is_empty() {
                    block.push(String::new());
                }
            }
            lines.truncate(lines.len().max(after));
            lines.splice(after..after, block);
            Ok(Placed { text: join_lines(&lines, true), start_line, end_line })
        }
        DraftMode::Modify => {
            let (suite, name) = (draft.anchor.suite.as_deref(), draft.anchor.name.as_str());
            let f = structure
                .find_function(suite, name)
                .ok_or_else(|| GenError::Placement(format!("modify target {name} not found in {}", structure.path)))?;
            let indent = leading_ws(&lines[f.start_line - 1]).to_string();
            let code = indented(&draft.code, &indent);
            let start_line = f.decorators_start;
            let end_line = start_line + code.len() - 1;
            lines.splice(f.decorators_start - 1..f.end_line, code);
            Ok(Placed { text: join_lines(&lines, trailing), start_line, end_line })
        }
    }
}
