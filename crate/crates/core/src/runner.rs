//! Isolated test execution: snapshot copies, patch application, subprocess
//! runs with a timeout, pytest log parsing, and coverage ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use tracing::{debug, warn};
use wait_timeout::ChildExt;
use walkdir::WalkDir;

use crate::diff::{apply_to_dir, parse_patch};
use crate::error::RunnerError;

pub const DEFAULT_TEST_COMMAND: &str = "python3 -m pytest -rA --tb=short -p no:cacheprovider --rootdir=. {test_ids}";
pub const DEFAULT_COVERAGE_COMMAND: &str = "python3 -m coverage run --source=. --data-file=.coverage.run -m pytest -q -p no:cacheprovider --rootdir=. {test_ids}; \
     python3 -m coverage json -q --data-file=.coverage.run -o {coverage_out}";
pub const DEFAULT_TIMEOUT_S: u64 = 600;
const EXCERPT_LINES: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerConfig {
    pub test_command_template: String,
    pub coverage_command_template: String,
    pub timeout_s: u64,
    /// `false` skips coverage by policy for projects where it is known to be unreliable.
    pub coverage_reliable: bool,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            test_command_template: DEFAULT_TEST_COMMAND.into(),
            coverage_command_template: DEFAULT_COVERAGE_COMMAND.into(),
            timeout_s: DEFAULT_TIMEOUT_S,
            coverage_reliable: true,
        }
    }
}

/// A disposable copy of a snapshot with patches applied in order.
#[derive(Debug)]
pub struct Workspace {
    dir: TempDir,
    pub applied_patches: Vec<String>,
}

impl Workspace {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

fn copy_tree(src: &Path, dst: &Path) -> Result<(), RunnerError> {
    let walker = WalkDir::new(src).sort_by_file_name().into_iter().filter_entry(|e| {
        let name = e.file_name().to_string_lossy();
        e.depth() == 0 || (name != ".git" && name != "__pycache__" && name != ".pytest_cache")
    });
    for entry in walker {
        let entry = entry.map_err(|e| RunnerError::Io(e.into()))?;
        let rel = entry.path().strip_prefix(src).expect("walkdir yields children of src");
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

/// Copy `snapshot` to a fresh directory and apply `patches` (id, diff text) in order.
pub fn prepare(snapshot: &Path, patches: &[(&str, &str)]) -> Result<Workspace, RunnerError> {
    if !snapshot.is_dir() {
        return Err(RunnerError::MissingSnapshot(snapshot.to_path_buf()));
    }
    let dir = tempfile::Builder::new().prefix("issuetest-ws-").tempdir()?;
    copy_tree(snapshot, dir.path())?;
    let mut applied = Vec::new();
    for (id, text) in patches {
        let patch = parse_patch(text).map_err(|source| RunnerError::PatchRejected { patch: id.to_string(), source })?;
        apply_to_dir(dir.path(), &patch).map_err(|source| RunnerError::PatchRejected { patch: id.to_string(), source })?;
        applied.push(id.to_string());
    }
    Ok(Workspace { dir, applied_patches: applied })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Collect,
    Call,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Assertion,
    Other,
    Timeout,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub status: TestStatus,
    pub phase: Phase,
    pub failure_kind: FailureKind,
    pub log_excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub tests: Vec<TestOutcome>,
    pub exit_code: Option<i32>,
    pub wall_time_s: f64,
    pub timed_out: bool,
}

impl ExecutionReport {
    pub fn status_of(&self, test_id: &str) -> Option<TestStatus> {
        self.tests.iter().find(|t| t.test_id == test_id).map(|t| t.status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunClass {
    Pass,
    AssertionFailure,
    OtherFailure,
    Error,
}

impl RunClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RunClass::Pass => "pass",
            RunClass::AssertionFailure => "assertion_failure",
            RunClass::OtherFailure => "other_failure",
            RunClass::Error => "error",
        }
    }
}

/// Reduce a report to one class. An empty report (nothing collected) is an error.
pub fn classify(report: &ExecutionReport) -> RunClass {
    let tests = &report.tests;
    if tests.is_empty() {
        return RunClass::Error;
    }
    if tests.iter().all(|t| t.status == TestStatus::Pass) {
        return RunClass::Pass;
    }
    let collect_error = tests.iter().any(|t| t.status == TestStatus::Error && t.phase == Phase::Collect);
    let fails = || tests.iter().filter(|t| t.status == TestStatus::Fail);
    if !collect_error && fails().any(|t| t.failure_kind == FailureKind::Assertion) {
        return RunClass::AssertionFailure;
    }
    if fails().any(|t| t.phase == Phase::Call && t.failure_kind != FailureKind::Assertion) {
        return RunClass::OtherFailure;
    }
    RunClass::Error
}

static SUMMARY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(PASSED|FAILED|ERROR|XFAIL|XPASS|SKIPPED)\s+(\S+)(?:\s+-\s+(.*))?$").unwrap());
static SECTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^_{3,}\s+(?:ERROR (?:at|collecting) )?(.+?)\s+_{3,}$").unwrap());
static NOT_FOUND_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"ERROR: (?:file or directory )?not found: (\S+)").unwrap());

fn is_assertion_text(s: &str) -> bool {
    let t = s.trim_start();
    t.starts_with("assert ") || t.starts_with("assert\t") || t.contains("AssertionError")
}

#[derive(Debug, Default)]
struct Parsed {
    /// node id -> (summary word, message)
    summary: Vec<(String, String, String)>,
    /// section title -> section lines
    sections: BTreeMap<String, Vec<String>>,
    not_found: Vec<String>,
}

fn parse_log(log: &str) -> Parsed {
    let mut p = Parsed::default();
    let mut current: Option<String> = None;
    for line in log.lines() {
        let line = line.trim_end();
        if let Some(c) = SECTION_RE.captures(line) {
            let title = c[1].to_string();
            current = Some(title.clone());
            p.sections.entry(title).or_default();
            continue;
        }
        if line.starts_with("====") {
            current = None;
        }
        if let Some(c) = SUMMARY_RE.captures(line) {
            p.summary.push((c[1].to_string(), c[2].to_string(), c.get(3).map_or("", |m| m.as_str()).to_string()));
            continue;
        }
        if let Some(c) = NOT_FOUND_RE.captures(line) {
            p.not_found.push(c[1].to_string());
        }
        if let Some(t) = &current {
            p.sections.get_mut(t).expect("section was inserted").push(line.to_string());
        }
    }
    p
}

fn node_matches(node: &str, test_id: &str) -> bool {
    node == test_id || (node.starts_with(test_id) && node[test_id.len()..].starts_with('['))
}

/// pytest names failure sections `Suite.test` or `test`, with parameters appended.
fn section_title(test_id: &str) -> String {
    let mut parts = test_id.split("::");
    parts.next();
    parts.collect::<Vec<_>>().join(".")
}

fn excerpt(lines: &[String]) -> String {
    let start = lines.len().saturating_sub(EXCERPT_LINES);
    lines[start..].join("\n")
}

/// Turn a pytest `-rA` log into one outcome per requested test.
pub fn parse_pytest_log(log: &str, test_ids: &[String]) -> Vec<TestOutcome> {
    let parsed = parse_log(log);
    test_ids
        .iter()
        .map(|id| {
            let file = id.split("::").next().unwrap_or(id);
            let matches: Vec<&(String, String, String)> =
                parsed.summary.iter().filter(|(_, node, _)| node_matches(node, id)).collect();
            let title = section_title(id);
            let section: Vec<String> = parsed
                .sections
                .iter()
                .filter(|(t, _)| **t == title || (t.starts_with(&title) && t[title.len()..].starts_with('[')))
                .flat_map(|(_, ls)| ls.iter().cloned())
                .collect();

            if matches.is_empty() {
                let collect_err = parsed.summary.iter().any(|(w, node, _)| w == "ERROR" && node == file);
                let collect_lines = parsed.sections.get(file).cloned().unwrap_or_default();
                let why = if collect_err {
                    "collection error"
                } else if parsed.not_found.iter().any(|n| n.ends_with(id.as_str())) {
                    "not found at collection"
                } else {
                    "not collected"
                };
                return TestOutcome {
                    test_id: id.clone(),
                    status: TestStatus::Error,
                    phase: Phase::Collect,
                    failure_kind: FailureKind::Other,
                    log_excerpt: if collect_lines.is_empty() { why.to_string() } else { excerpt(&collect_lines) },
                };
            }

            let worst = |w: &str| matches.iter().any(|(word, _, _)| word == w);
            let status = if worst("ERROR") {
                TestStatus::Error
            } else if worst("FAILED") {
                TestStatus::Fail
            } else {
                TestStatus::Pass
            };
            let failure_kind = match status {
                TestStatus::Pass => FailureKind::None,
                _ => {
                    let in_summary = matches.iter().any(|(w, _, msg)| w != "PASSED" && is_assertion_text(msg));
                    let in_section = section.iter().any(|l| l.starts_with('E') && is_assertion_text(&l[1..]));
                    if status == TestStatus::Fail && (in_summary || in_section) {
                        FailureKind::Assertion
                    } else {
                        FailureKind::Other
                    }
                }
            };
            let log_excerpt = if section.is_empty() {
                matches.iter().map(|(w, n, m)| format!("{w} {n} {m}").trim_end().to_string()).collect::<Vec<_>>().join("\n")
            } else {
                excerpt(&section)
            };
            TestOutcome { test_id: id.clone(), status, phase: Phase::Call, failure_kind, log_excerpt }
        })
        .collect()
}

fn quote_ids(test_ids: &[String]) -> String {
    test_ids
        .iter()
        .map(|t| shlex::try_quote(t).map(|q| q.into_owned()).unwrap_or_else(|_| t.clone()))
        .collect::<Vec<_>>()
        .join(" ")
}

struct CommandOutput {
    log: String,
    exit_code: Option<i32>,
    timed_out: bool,
    wall_time_s: f64,
}

fn spawn_reader(mut pipe: impl Read + Send + 'static) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        buf
    })
}

fn run_shell(dir: &Path, cmd: &str, timeout: Duration) -> Result<CommandOutput, RunnerError> {
    debug!(%cmd, dir = %dir.display(), "running");
    let mut command = Command::new("sh");
    command
        .arg("-c")
        .arg(cmd)
        .current_dir(dir)
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }
    let start = Instant::now();
    let mut child = command.spawn().map_err(|e| RunnerError::Spawn(e.to_string()))?;
    let out = spawn_reader(child.stdout.take().expect("stdout is piped"));
    let err = spawn_reader(child.stderr.take().expect("stderr is piped"));
    let (exit_code, timed_out) = match child.wait_timeout(timeout)? {
        Some(status) => (status.code(), false),
        None => {
            // kill the whole process group so grandchildren release the pipes
            let _ = Command::new("kill").arg("-KILL").arg("--").arg(format!("-{}", child.id())).status();
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    let mut log = join_lossy(out);
    let stderr = join_lossy(err);
    if !stderr.is_empty() {
        log.push('\n');
        log.push_str(&stderr);
    }
    Ok(CommandOutput { log, exit_code, timed_out, wall_time_s: start.elapsed().as_secs_f64() })
}

fn join_lossy(h: std::thread::JoinHandle<Vec<u8>>) -> String {
    String::from_utf8_lossy(&h.join().unwrap_or_default()).into_owned()
}

/// Run only `test_ids` in the workspace and report one outcome per id.
pub fn run(ws: &Workspace, test_ids: &[String], cfg: &RunnerConfig) -> Result<(ExecutionReport, String), RunnerError> {
    run_in(ws.path(), test_ids, cfg)
}

pub fn run_in(dir: &Path, test_ids: &[String], cfg: &RunnerConfig) -> Result<(ExecutionReport, String), RunnerError> {
    if test_ids.is_empty() {
        return Ok((ExecutionReport { tests: Vec::new(), exit_code: None, wall_time_s: 0.0, timed_out: false }, String::new()));
    }
    let cmd = cfg.test_command_template.replace("{test_ids}", &quote_ids(test_ids)).replace("{coverage_out}", "");
    let out = run_shell(dir, &cmd, Duration::from_secs(cfg.timeout_s))?;
    let mut tests = parse_pytest_log(&out.log, test_ids);
    if out.timed_out {
        warn!(timeout_s = cfg.timeout_s, "test command timed out");
        let reported: BTreeSet<&str> = reported_nodes(&out.log);
        for t in &mut tests {
            if !reported.iter().any(|n| node_matches(n, &t.test_id)) {
                t.status = TestStatus::Error;
                t.phase = Phase::Call;
                t.failure_kind = FailureKind::Timeout;
                t.log_excerpt = format!("timed out after {} s", cfg.timeout_s);
            }
        }
    }
    let report = ExecutionReport { tests, exit_code: out.exit_code, wall_time_s: out.wall_time_s, timed_out: out.timed_out };
    Ok((report, out.log))
}

fn reported_nodes(log: &str) -> BTreeSet<&str> {
    log.lines().filter_map(|l| SUMMARY_RE.captures(l.trim_end()).and_then(|c| c.get(2)).map(|m| m.as_str())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CoverageReport {
    /// relative path -> covered 1-based lines
    pub covered: BTreeMap<String, BTreeSet<usize>>,
    /// relative path -> lines the tool considers executable
    pub coverable: BTreeMap<String, BTreeSet<usize>>,
    pub tests_run: Vec<String>,
    pub reliable: bool,
    pub note: Option<String>,
}

impl CoverageReport {
    pub fn unreliable(tests_run: &[String], note: impl Into<String>) -> Self {
        CoverageReport { tests_run: tests_run.to_vec(), reliable: false, note: Some(note.into()), ..Default::default() }
    }

    pub fn covered_in(&self, path: &str) -> BTreeSet<usize> {
        self.covered.get(path).cloned().unwrap_or_default()
    }

    pub fn coverable_in(&self, path: &str) -> Option<&BTreeSet<usize>> {
        self.coverable.get(path)
    }
}

#[derive(Deserialize)]
struct CovJson {
    files: BTreeMap<String, CovFile>,
}

#[derive(Deserialize)]
struct CovFile {
    #[serde(default)]
    executed_lines: Vec<usize>,
    #[serde(default)]
    missing_lines: Vec<usize>,
}

fn normalize_cov_path(raw: &str, root: &Path) -> Option<String> {
    let p = Path::new(raw);
    let rel = if p.is_absolute() {
        let canon_root = root.canonicalize().unwrap_or_else(|_| root.to_path_buf());
        p.strip_prefix(root).or_else(|_| p.strip_prefix(&canon_root)).ok()?.to_path_buf()
    } else {
        PathBuf::from(raw.trim_start_matches("./"))
    };
    Some(rel.to_string_lossy().replace('\\', "/"))
}

/// Parse a coverage.py JSON report. Paths outside `root` are dropped and
/// line numbers beyond the file's length are discarded.
pub fn parse_coverage_json(text: &str, root: &Path, tests_run: &[String]) -> CoverageReport {
    let parsed: CovJson = match serde_json::from_str(text) {
        Ok(p) => p,
        Err(e) => return CoverageReport::unreliable(tests_run, format!("invalid coverage JSON: {e}")),
    };
    let mut report = CoverageReport { tests_run: tests_run.to_vec(), reliable: true, ..Default::default() };
    for (raw, f) in parsed.files {
        let Some(rel) = normalize_cov_path(&raw, root) else { continue };
        let limit = fs::read_to_string(root.join(&rel)).map(|t| t.lines().count()).unwrap_or(usize::MAX);
        let keep = |ls: &[usize]| ls.iter().copied().filter(|&l| l >= 1 && l <= limit).collect::<BTreeSet<_>>();
        let executed = keep(&f.executed_lines);
        let mut coverable = keep(&f.missing_lines);
        coverable.extend(executed.iter().copied());
        report.covered.insert(rel.clone(), executed);
        report.coverable.insert(rel, coverable);
    }
    report
}

/// Collect line coverage for `test_ids`. Never fails: problems yield an
/// empty report flagged unreliable.
pub fn coverage(ws: &Workspace, test_ids: &[String], cfg: &RunnerConfig) -> CoverageReport {
    coverage_in(ws.path(), test_ids, cfg)
}

pub fn coverage_in(dir: &Path, test_ids: &[String], cfg: &RunnerConfig) -> CoverageReport {
    if !cfg.coverage_reliable {
        return CoverageReport::unreliable(test_ids, "coverage disabled by policy");
    }
    if test_ids.is_empty() {
        return CoverageReport::unreliable(test_ids, "no tests to run");
    }
    let out_path = dir.join(".coverage-report.json");
    let _ = fs::remove_file(&out_path);
    let quoted_out = shlex::try_quote(&out_path.to_string_lossy()).map(|q| q.into_owned()).unwrap_or_default();
    let cmd = cfg
        .coverage_command_template
        .replace("{test_ids}", &quote_ids(test_ids))
        .replace("{coverage_out}", &quoted_out);
    match run_shell(dir, &cmd, Duration::from_secs(cfg.timeout_s)) {
        Ok(out) if out.timed_out => CoverageReport::unreliable(test_ids, "coverage run timed out"),
        Ok(out) => match fs::read_to_string(&out_path) {
            Ok(text) => parse_coverage_json(&text, dir, test_ids),
            Err(_) => {
                let tail: Vec<String> = out.log.lines().map(str::to_string).collect();
                CoverageReport::unreliable(test_ids, format!("no coverage file produced: {}", excerpt(&tail)))
            }
        },
        Err(e) => CoverageReport::unreliable(test_ids, format!("coverage command failed: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    const LOG: &str = "\
============================= test session starts ==============================
collected 4 items

tests/test_a.py .F.F                                                      [100%]

=================================== FAILURES ===================================
____________________________ TestPoly.test_missing _____________________________
tests/test_a.py:10: in test_missing
    assert fit([1, None]) == 1
E   assert 2 == 1
__________________________________ test_boom ___________________________________
tests/test_a.py:20: in test_boom
    boom()
E   ValueError: nope
=========================== short test summary info ============================
PASSED tests/test_a.py::test_ok
PASSED tests/test_a.py::test_param[1]
FAILED tests/test_a.py::TestPoly::test_missing - assert 2 == 1
FAILED tests/test_a.py::test_boom - ValueError: nope
========================= 2 failed, 2 passed in 0.05s ==========================
";

    #[test]
    fn parses_statuses_and_kinds() {
        let out = parse_pytest_log(
            LOG,
            &ids(&["tests/test_a.py::test_ok", "tests/test_a.py::TestPoly::test_missing", "tests/test_a.py::test_boom", "tests/test_a.py::test_param", "tests/test_a.py::test_gone"]),
        );
        let k: Vec<_> = out.iter().map(|t| (t.status, t.phase, t.failure_kind)).collect();
        assert_eq!(
            k,
            vec![
                (TestStatus::Pass, Phase::Call, FailureKind::None),
                (TestStatus::Fail, Phase::Call, FailureKind::Assertion),
                (TestStatus::Fail, Phase::Call, FailureKind::Other),
                (TestStatus::Pass, Phase::Call, FailureKind::None),
                (TestStatus::Error, Phase::Collect, FailureKind::Other),
            ]
        );
        assert!(out[1].log_excerpt.contains("E   assert 2 == 1"));
    }

    #[test]
    fn collection_error_marks_file_tests() {
        let log = "\
==================================== ERRORS ====================================
_______________________ ERROR collecting tests/test_b.py _______________________
ImportError while importing test module
E   ModuleNotFoundError: No module named 'nothere'
=========================== short test summary info ============================
ERROR tests/test_b.py
";
        let out = parse_pytest_log(log, &ids(&["tests/test_b.py::test_x"]));
        assert_eq!((out[0].status, out[0].phase), (TestStatus::Error, Phase::Collect));
        assert!(out[0].log_excerpt.contains("ModuleNotFoundError"));
    }

    fn outcome(status: TestStatus, phase: Phase, kind: FailureKind) -> TestOutcome {
        TestOutcome { test_id: "t.py::x".into(), status, phase, failure_kind: kind, log_excerpt: String::new() }
    }

    fn report(tests: Vec<TestOutcome>) -> ExecutionReport {
        ExecutionReport { tests, exit_code: Some(1), wall_time_s: 0.0, timed_out: false }
    }

    #[test]
    fn classification_rules() {
        use FailureKind as K;
        use Phase::*;
        use TestStatus::*;
        assert_eq!(classify(&report(vec![outcome(Pass, Call, K::None)])), RunClass::Pass);
        assert_eq!(classify(&report(vec![outcome(Fail, Call, K::Assertion)])), RunClass::AssertionFailure);
        assert_eq!(classify(&report(vec![outcome(Fail, Call, K::Other)])), RunClass::OtherFailure);
        assert_eq!(classify(&report(vec![outcome(Error, Collect, K::Other)])), RunClass::Error);
        assert_eq!(classify(&report(vec![outcome(Error, Call, K::Timeout)])), RunClass::Error);
        assert_eq!(
            classify(&report(vec![outcome(Fail, Call, K::Assertion), outcome(Error, Collect, K::Other)])),
            RunClass::Error
        );
        assert_eq!(classify(&report(vec![])), RunClass::Error);
    }

    #[test]
    fn coverage_json_is_normalized() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.py"), "x = 1\ny = 2\n\nz = 3\n").unwrap();
        let abs = dir.path().join("a.py");
        let json = serde_json::json!({"files": {
            abs.to_string_lossy(): {"executed_lines": [1, 2, 99], "missing_lines": [4]},
            "/elsewhere/site.py": {"executed_lines": [1], "missing_lines": []}
        }})
        .to_string();
        let r = parse_coverage_json(&json, dir.path(), &[]);
        assert!(r.reliable);
        assert_eq!(r.covered_in("a.py"), BTreeSet::from([1, 2]));
        assert_eq!(r.coverable_in("a.py").unwrap(), &BTreeSet::from([1, 2, 4]));
        assert_eq!(r.covered.len(), 1);
        assert!(!parse_coverage_json("nope", dir.path(), &[]).reliable);
    }

    #[test]
    fn policy_disables_coverage() {
        let cfg = RunnerConfig { coverage_reliable: false, ..Default::default() };
        let r = coverage_in(Path::new("."), &ids(&["a.py::t"]), &cfg);
        assert!(!r.reliable && r.covered.is_empty());
    }
}
