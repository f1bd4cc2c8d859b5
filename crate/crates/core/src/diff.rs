//! Unified diffs: generation, parsing, application, and changed-line sets.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use similar::{ChangeTag, TextDiff};

use crate::error::DiffError;

pub const CONTEXT_LINES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HunkLine {
    Context(String),
    Remove(String),
    Add(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<HunkLine>,
    /// `\ No newline at end of file` after the last old-side line.
    pub old_missing_newline: bool,
    /// Same, for the new side.
    pub new_missing_newline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    /// `None` for file creation.
    pub old_path: Option<String>,
    /// `None` for file deletion.
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn path(&self) -> &str {
        self.new_path.as_deref().or(self.old_path.as_deref()).unwrap_or("")
    }

    pub fn is_new_file(&self) -> bool {
        self.old_path.is_none()
    }

    /// Old-file line numbers removed by the patch.
    pub fn deleted_lines(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for h in &self.hunks {
            let mut old = h.old_start.max(1);
            for l in &h.lines {
                match l {
                    HunkLine::Context(_) => old += 1,
                    HunkLine::Remove(_) => {
                        out.insert(old);
                        old += 1;
                    }
                    HunkLine::Add(_) => {}
                }
            }
        }
        out
    }

    /// New-file line numbers introduced by the patch.
    pub fn added_lines(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for h in &self.hunks {
            let mut new = h.new_start.max(1);
            for l in &h.lines {
                match l {
                    HunkLine::Context(_) => new += 1,
                    HunkLine::Add(_) => {
                        out.insert(new);
                        new += 1;
                    }
                    HunkLine::Remove(_) => {}
                }
            }
        }
        out
    }

    /// New-file lines touched by the patch: added lines plus the new-side
    /// position of every deletion.
    pub fn touched_new_lines(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for h in &self.hunks {
            let mut new = h.new_start.max(1);
            for l in &h.lines {
                match l {
                    HunkLine::Context(_) => new += 1,
                    HunkLine::Add(_) => {
                        out.insert(new);
                        new += 1;
                    }
                    HunkLine::Remove(_) => {
                        out.insert(new);
                    }
                }
            }
        }
        out
    }
}

/// A parsed multi-file patch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Patch {
    pub files: Vec<FilePatch>,
}

fn git_header(path: &str, new_file: bool) -> String {
    if new_file {
        format!("diff --git a/{path} b/{path}\nnew file mode 100644\n--- /dev/null\n+++ b/{path}\n")
    } else {
        format!("diff --git a/{path} b/{path}\n--- a/{path}\n+++ b/{path}\n")
    }
}

/// Git-style unified diff for a single file with three context lines.
///
/// `old = None` produces a new-file diff.
pub fn unified_diff(old: Option<&str>, new: &str, path: &str) -> Result<String, DiffError> {
    let before = old.unwrap_or("");
    if old.is_some() && before == new {
        return Err(DiffError::EmptyPatch);
    }
    if old.is_none() && new.is_empty() {
        return Err(DiffError::EmptyPatch);
    }
    let diff = TextDiff::from_lines(before, new);
    let mut out = git_header(path, old.is_none());
    for group in diff.grouped_ops(CONTEXT_LINES) {
        // Ranges come from the whole group: op order is not monotonic on both sides.
        let old_lo = group.iter().map(|op| op.old_range().start).min().unwrap_or(0);
        let old_hi = group.iter().map(|op| op.old_range().end).max().unwrap_or(0);
        let new_lo = group.iter().map(|op| op.new_range().start).min().unwrap_or(0);
        let new_hi = group.iter().map(|op| op.new_range().end).max().unwrap_or(0);
        out.push_str(&format!("@@ -{} +{} @@\n", hunk_range(old_lo, old_hi), hunk_range(new_lo, new_hi)));
        for op in &group {
            for change in diff.iter_changes(op) {
                let sign = match change.tag() {
                    ChangeTag::Equal => ' ',
                    ChangeTag::Delete => '-',
                    ChangeTag::Insert => '+',
                };
                out.push(sign);
                out.push_str(change.value());
                if change.missing_newline() {
                    out.push_str("\n\\ No newline at end of file\n");
                }
            }
        }
    }
    Ok(out)
}

/// `start,len` in unified-diff convention (1-based; an empty range names the line before it).
fn hunk_range(lo: usize, hi: usize) -> String {
    let len = hi - lo;
    let start = if len == 0 { lo } else { lo + 1 };
    format!("{start},{len}")
}

fn strip_prefix_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim();
    if raw == "/dev/null" {
        return None;
    }
    let p = raw.strip_prefix("a/").or_else(|| raw.strip_prefix("b/")).unwrap_or(raw);
    Some(p.to_string())
}

fn parse_range(s: &str, line: usize) -> Result<(usize, usize), DiffError> {
    let bad = || DiffError::Malformed { line, message: format!("bad hunk range '{s}'") };
    let (start, len) = match s.split_once(',') {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => (s.parse().map_err(|_| bad())?, 1),
    };
    Ok((start, len))
}

/// Parse unified-diff text (git or plain `---`/`+++` style).
pub fn parse_patch(text: &str) -> Result<Patch, DiffError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files = Vec::new();
    let mut i = 0;
    let mut current: Option<FilePatch> = None;
    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("diff --git ") {
            if let Some(fp) = current.take() {
                files.push(fp);
            }
            i += 1;
            continue;
        }
        if let Some(rest) = line.strip_prefix("--- ") {
            let Some(next) = lines.get(i + 1).and_then(|l| l.strip_prefix("+++ ")) else {
                return Err(DiffError::Malformed { line: i + 1, message: "'---' without '+++'".into() });
            };
            if let Some(fp) = current.take() {
                files.push(fp);
            }
            current = Some(FilePatch {
                old_path: strip_prefix_path(rest),
                new_path: strip_prefix_path(next),
                hunks: Vec::new(),
            });
            i += 2;
            continue;
        }
        if let Some(rest) = line.strip_prefix("@@ ") {
            let fp = current
                .as_mut()
                .ok_or_else(|| DiffError::Malformed { line: i + 1, message: "hunk before file header".into() })?;
            let ranges = rest.split(" @@").next().unwrap_or("");
            let mut parts = ranges.split_whitespace();
            let old = parts.next().and_then(|p| p.strip_prefix('-'));
            let new = parts.next().and_then(|p| p.strip_prefix('+'));
            let (Some(old), Some(new)) = (old, new) else {
                return Err(DiffError::Malformed { line: i + 1, message: "bad hunk header".into() });
            };
            let (old_start, old_len) = parse_range(old, i + 1)?;
            let (new_start, new_len) = parse_range(new, i + 1)?;
            let mut hunk = Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                lines: Vec::new(),
                old_missing_newline: false,
                new_missing_newline: false,
            };
            let (mut seen_old, mut seen_new) = (0, 0);
            i += 1;
            while i < lines.len() && (seen_old < old_len || seen_new < new_len) {
                let l = lines[i];
                let (tag, content) = match l.chars().next() {
                    Some(c @ (' ' | '-' | '+')) => (c, &l[1..]),
                    None => (' ', ""),
                    Some('\\') => {
                        i += 1;
                        continue;
                    }
                    _ => {
                        return Err(DiffError::Malformed { line: i + 1, message: "hunk shorter than its header".into() })
                    }
                };
                match tag {
                    ' ' => {
                        seen_old += 1;
                        seen_new += 1;
                        hunk.lines.push(HunkLine::Context(content.to_string()));
                    }
                    '-' => {
                        seen_old += 1;
                        hunk.lines.push(HunkLine::Remove(content.to_string()));
                    }
                    _ => {
                        seen_new += 1;
                        hunk.lines.push(HunkLine::Add(content.to_string()));
                    }
                }
                i += 1;
                if lines.get(i).is_some_and(|n| n.starts_with('\\')) {
                    match hunk.lines.last() {
                        Some(HunkLine::Context(_)) => {
                            hunk.old_missing_newline = true;
                            hunk.new_missing_newline = true;
                        }
                        Some(HunkLine::Remove(_)) => hunk.old_missing_newline = true,
                        Some(HunkLine::Add(_)) => hunk.new_missing_newline = true,
                        None => {}
                    }
                    i += 1;
                }
            }
            if seen_old != old_len || seen_new != new_len {
                return Err(DiffError::Malformed { line: i, message: "truncated hunk".into() });
            }
            fp.hunks.push(hunk);
            continue;
        }
        i += 1;
    }
    if let Some(fp) = current.take() {
        files.push(fp);
    }
    Ok(Patch { files })
}

fn split_text(text: &str) -> (Vec<String>, bool) {
    if text.is_empty() {
        return (Vec::new(), true);
    }
    let trailing = text.ends_with('\n');
    (text.lines().map(str::to_string).collect(), trailing)
}

fn hunk_text(h: &Hunk) -> String {
    let mut s = format!("@@ -{},{} +{},{} @@\n", h.old_start, h.old_len, h.new_start, h.new_len);
    for l in &h.lines {
        match l {
            HunkLine::Context(c) => s.push_str(&format!(" {c}\n")),
            HunkLine::Remove(c) => s.push_str(&format!("-{c}\n")),
            HunkLine::Add(c) => s.push_str(&format!("+{c}\n")),
        }
    }
    s
}

/// Apply one file's hunks to `old`. Context must match exactly; a hunk may
/// land at an offset from its stated position. Returns `None` for deletions.
pub fn apply_file_patch(old: Option<&str>, fp: &FilePatch) -> Result<Option<String>, DiffError> {
    let (mut lines, mut newline) = split_text(old.unwrap_or(""));
    let mut delta: isize = 0;
    let mut floor = 0usize;
    let old_count = lines.len();
    for (n, h) in fp.hunks.iter().enumerate() {
        let expected: Vec<&str> = h
            .lines
            .iter()
            .filter_map(|l| match l {
                HunkLine::Context(c) | HunkLine::Remove(c) => Some(c.as_str()),
                HunkLine::Add(_) => None,
            })
            .collect();
        let replacement: Vec<String> = h
            .lines
            .iter()
            .filter_map(|l| match l {
                HunkLine::Context(c) | HunkLine::Add(c) => Some(c.clone()),
                HunkLine::Remove(_) => None,
            })
            .collect();
        let nominal = if h.old_len == 0 { h.old_start } else { h.old_start.saturating_sub(1) };
        let nominal = (nominal as isize + delta).max(0) as usize;
        let fits = |at: usize| {
            at >= floor
                && at + expected.len() <= lines.len()
                && lines[at..at + expected.len()].iter().zip(&expected).all(|(a, b)| a == b)
        };
        let at = (0..=lines.len())
            .flat_map(|d| [nominal.checked_sub(d), Some(nominal + d)])
            .flatten()
            .take(2 * (lines.len() + 1))
            .find(|&at| fits(at))
            .ok_or_else(|| DiffError::Reject { file: fp.path().to_string(), hunk: n + 1, hunk_text: hunk_text(h) })?;
        let reaches_end = at + expected.len() == lines.len();
        lines.splice(at..at + expected.len(), replacement.iter().cloned());
        floor = at + replacement.len();
        delta += replacement.len() as isize - expected.len() as isize;
        if reaches_end || old_count == 0 {
            newline = !h.new_missing_newline;
        }
    }
    if fp.new_path.is_none() {
        return Ok(None);
    }
    let mut out = lines.join("\n");
    if newline && !lines.is_empty() {
        out.push('\n');
    }
    Ok(Some(out))
}

/// Apply a whole patch to a directory tree in place.
pub fn apply_to_dir(dir: &Path, patch: &Patch) -> Result<(), DiffError> {
    // Compute every result before writing anything so a reject leaves the tree untouched.
    let mut writes: Vec<(String, Option<String>)> = Vec::new();
    for fp in &patch.files {
        let old = match &fp.old_path {
            Some(p) => {
                let full = dir.join(p);
                if !full.is_file() {
                    return Err(DiffError::MissingTarget(p.clone()));
                }
                Some(fs::read_to_string(&full).map_err(|source| DiffError::Io { path: p.clone(), source })?)
            }
            None => {
                let target = fp.new_path.clone().unwrap_or_default();
                if dir.join(&target).exists() {
                    return Err(DiffError::TargetExists(target));
                }
                None
            }
        };
        let result = apply_file_patch(old.as_deref(), fp)?;
        if let (Some(old_path), Some(new_path)) = (&fp.old_path, &fp.new_path) {
            if old_path != new_path {
                writes.push((old_path.clone(), None));
            }
        }
        writes.push((fp.path().to_string(), result));
    }
    for (path, content) in writes {
        let full = dir.join(&path);
        match content {
            Some(text) => {
                if let Some(parent) = full.parent() {
                    fs::create_dir_all(parent).map_err(|source| DiffError::Io { path: path.clone(), source })?;
                }
                fs::write(&full, text).map_err(|source| DiffError::Io { path: path.clone(), source })?;
            }
            None => fs::remove_file(&full).map_err(|source| DiffError::Io { path: path.clone(), source })?,
        }
    }
    Ok(())
}
