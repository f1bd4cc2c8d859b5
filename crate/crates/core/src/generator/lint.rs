//! External lint command integration.
//!
//! The command template receives `{file}`, the path of a scratch copy of the
//! file being checked, and must print `path:line:col: CODE message` lines.

use std::fs;
use std::process::{Command, Stdio};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::LintError;

static DIAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(.*?):(\d+):(\d+):\s*([A-Z]+[0-9]+)\s+(.*)$").unwrap());
static QUOTED_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'([A-Za-z_][A-Za-z0-9_]*)'").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    /// The quoted identifier in messages like `undefined name 'x'`.
    pub fn name(&self) -> Option<&str> {
        QUOTED_RE.captures(&self.message).and_then(|c| c.get(1)).map(|m| m.as_str())
    }
}

pub fn parse_diagnostics(output: &str) -> Vec<Diagnostic> {
    output
        .lines()
        .filter_map(|l| {
            let c = DIAG_RE.captures(l.trim_end())?;
            Some(Diagnostic {
                line: c[2].parse().ok()?,
                col: c[3].parse().ok()?,
                code: c[4].to_string(),
                message: c[5].to_string(),
            })
        })
        .collect()
}

pub trait Linter {
    /// Diagnostics restricted to the curated codes.
    fn lint(&self, rel_path: &str, text: &str) -> Result<Vec<Diagnostic>, LintError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommandLinter {
    pub command: String,
    pub codes: Vec<String>,
}

pub const DEFAULT_LINT_COMMAND: &str = "python3 -m flake8 --select=F821,F822,F823 {file}";
pub const DEFAULT_LINT_CODES: [&str; 3] = ["F821", "F822", "F823"];

impl Default for CommandLinter {
    fn default() -> Self {
        CommandLinter {
            command: DEFAULT_LINT_COMMAND.to_string(),
            codes: DEFAULT_LINT_CODES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Linter for CommandLinter {
    fn lint(&self, rel_path: &str, text: &str) -> Result<Vec<Diagnostic>, LintError> {
        let dir = tempfile::tempdir()?;
        let path = dir.path().join(rel_path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text)?;
        let quoted = shlex::try_quote(path.to_str().unwrap_or_default())
            .map_err(|e| LintError::Unavailable(e.to_string()))?
            .into_owned();
        let cmd = self.command.replace("{file}", &quoted);
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .output()
            .map_err(|e| LintError::Unavailable(e.to_string()))?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        let diags = parse_diagnostics(&stdout);
        if out.status.code() == Some(127) || (diags.is_empty() && !out.status.success()) {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(LintError::Unavailable(format!("`{cmd}` exited with {}: {}", out.status, stderr.trim())));
        }
        Ok(diags.into_iter().filter(|d| self.codes.contains(&d.code)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flake8_style_lines() {
        let d = parse_diagnostics("/tmp/x/t.py:12:5: F821 undefined name 'polyfit'\nnoise\nt.py:1:1: E302 expected 2 blank lines\n");
        assert_eq!(d.len(), 2);
        assert_eq!((d[0].line, d[0].col, d[0].code.as_str()), (12, 5, "F821"));
        assert_eq!(d[0].name(), Some("polyfit"));
    }

    #[test]
    fn missing_command_is_unavailable() {
        let l = CommandLinter { command: "definitely-not-a-linter-xyz {file}".into(), codes: vec!["F821".into()] };
        assert!(matches!(l.lint("a.py", "x = 1\n"), Err(LintError::Unavailable(_))));
    }
}
