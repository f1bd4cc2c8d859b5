//! Benchmark metrics: contributed tests, fail-to-pass, adequacy, tddScore,
//! similarity, and code-patch filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::diff::{parse_patch, FilePatch, Patch};
use crate::ensemble::{CandidateClass, VariantId};
use crate::error::{ConfigError, HarnessError};
use crate::repo_model::{FileStructure, SourceIndex};
use crate::runner::{self, classify, CoverageReport, ExecutionReport, RunClass, RunnerConfig, TestStatus};

pub use crate::distance::similarity;

/// Test ids of test functions whose span intersects the lines the patch touched.
pub fn contributed_tests_in_file(fp: &FilePatch, patched: &FileStructure) -> Vec<String> {
    let touched = fp.touched_new_lines();
    patched
        .test_functions()
        .filter(|f| touched.range(f.decorators_start..=f.end_line).next().is_some())
        .map(|f| f.test_id())
        .collect()
}

/// Resolve the tests a patch adds or modifies, reading patched files under `root`.
pub fn resolve_contributed_tests(patch: &Patch, root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for fp in &patch.files {
        if fp.new_path.is_none() {
            continue;
        }
        let path = fp.path();
        let structure = match fs::read_to_string(root.join(path)) {
            Ok(text) => FileStructure::from_source(path, &text),
            Err(e) => {
                warn!(%path, error = %e, "patched file unreadable");
                continue;
            }
        };
        for id in contributed_tests_in_file(fp, &structure) {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

fn not_passing(s: Option<TestStatus>) -> bool {
    !matches!(s, Some(TestStatus::Pass))
}

/// 1 when some test fails or errors on old code and none does on new code.
pub fn fail_to_pass(old: &ExecutionReport, new: &ExecutionReport, test_ids: &[String]) -> u8 {
    if test_ids.is_empty() {
        return 0;
    }
    let reproduces = test_ids.iter().any(|t| not_passing(old.status_of(t)));
    let resolves = test_ids.iter().all(|t| !not_passing(new.status_of(t)));
    u8::from(reproduces && resolves)
}

/// Changed-line sets of a code patch: D in old numbering, A in new numbering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ChangedLines {
    pub deleted: BTreeMap<String, BTreeSet<usize>>,
    pub added: BTreeMap<String, BTreeSet<usize>>,
}

impl ChangedLines {
    pub fn from_patch(patch: &Patch) -> Self {
        let mut c = ChangedLines::default();
        for fp in &patch.files {
            if let Some(old) = &fp.old_path {
                let d = fp.deleted_lines();
                if !d.is_empty() {
                    c.deleted.entry(old.clone()).or_default().extend(d);
                }
            }
            if let Some(new) = &fp.new_path {
                let a = fp.added_lines();
                if !a.is_empty() {
                    c.added.entry(new.clone()).or_default().extend(a);
                }
            }
        }
        c
    }

    /// Keep only lines the coverage tool reports as executable. Files the tool
    /// knows nothing about are kept whole.
    pub fn executable(&self, cov_old: &CoverageReport, cov_new: &CoverageReport) -> ChangedLines {
        let restrict = |m: &BTreeMap<String, BTreeSet<usize>>, cov: &CoverageReport| {
            m.iter()
                .map(|(p, ls)| {
                    let kept = match cov.coverable_in(p) {
                        Some(ok) => ls.intersection(ok).copied().collect(),
                        None => ls.clone(),
                    };
                    (p.clone(), kept)
                })
                .collect()
        };
        ChangedLines { deleted: restrict(&self.deleted, cov_old), added: restrict(&self.added, cov_new) }
    }

    pub fn total(&self) -> usize {
        self.deleted.values().chain(self.added.values()).map(BTreeSet::len).sum()
    }
}

/// Covered-line maps: path -> covered lines.
pub type Covered = BTreeMap<String, BTreeSet<usize>>;

/// (|cov_old ∩ D| + |cov_new ∩ A|) / (|D| + |A|); `None` when D and A are both empty.
pub fn adequacy(cov_old: &Covered, cov_new: &Covered, lines: &ChangedLines) -> Option<f64> {
    let denom = lines.total();
    if denom == 0 {
        return None;
    }
    let hits = |sets: &BTreeMap<String, BTreeSet<usize>>, cov: &Covered| -> usize {
        sets.iter()
            .map(|(p, ls)| cov.get(p).map_or(0, |c| ls.intersection(c).count()))
            .sum()
    };
    let num = hits(&lines.deleted, cov_old) + hits(&lines.added, cov_new);
    Some(num as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Adequacy {
    Value(f64),
    /// Coverage unreliable; left out by policy.
    Excluded,
    /// The code patch changes no executable line.
    Undefined,
}

/// failToPass × adequacy; adequacy that is excluded or undefined leaves failToPass alone.
pub fn tdd_score_instance(fail_to_pass: u8, adequacy: Adequacy) -> f64 {
    let f = f64::from(fail_to_pass);
    match adequacy {
        Adequacy::Value(a) => f * a,
        Adequacy::Excluded | Adequacy::Undefined => f,
    }
}

/// 100 × mean of instance scores.
pub fn tdd_score_suite(scores: &[f64]) -> Result<f64, HarnessError> {
    if scores.is_empty() {
        return Err(HarnessError::EmptySuite);
    }
    Ok(100.0 * scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TddResult {
    pub instance_id: String,
    pub test_ids: Vec<String>,
    pub fail_to_pass: u8,
    pub adequacy: Adequacy,
    pub tdd_score: f64,
    pub coverage_reliable: bool,
    pub class_on_old: Option<RunClass>,
    pub flags: Vec<String>,
}

/// Everything a harness run produced, for dumping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub result: TddResult,
    pub old: ExecutionReport,
    pub new: ExecutionReport,
    pub coverage_old: CoverageReport,
    pub coverage_new: CoverageReport,
    pub log_old: String,
    pub log_new: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub instance_id: String,
    pub issue_text: String,
    pub snapshot: PathBuf,
    pub golden_code_patch: PathBuf,
    #[serde(default)]
    pub golden_test_patch: Option<PathBuf>,
    #[serde(default)]
    pub run_config: RunnerConfig,
    /// Short repository name shown to the whole-file baseline.
    #[serde(default)]
    pub repo_name: Option<String>,
}

impl InstanceSpec {
    fn resolve(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.snapshot);
        fix(&mut self.golden_code_patch);
        if let Some(p) = self.golden_test_patch.as_mut() {
            fix(p);
        }
        self
    }

    pub fn code_patch_text(&self) -> Result<String, HarnessError> {
        read_text(&self.golden_code_patch)
    }

    pub fn golden_test_text(&self) -> Result<String, HarnessError> {
        let p = self.golden_test_patch.as_ref().ok_or_else(|| HarnessError::MissingGoldenTests(self.instance_id.clone()))?;
        read_text(p)
    }

    pub fn repo_label(&self) -> String {
        self.repo_name.clone().unwrap_or_else(|| {
            self.snapshot.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| self.instance_id.clone())
        })
    }
}

fn read_text(p: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(p).map_err(|e| HarnessError::Runner(runner_io(p, e)))
}

fn runner_io(p: &Path, e: std::io::Error) -> crate::error::RunnerError {
    crate::error::RunnerError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<InstanceSpec>,
}

/// Load an instance manifest; relative paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<InstanceSpec>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let m: Manifest = serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = BTreeSet::new();
    for i in &m.instances {
        if !seen.insert(i.instance_id.clone()) {
            return Err(ConfigError::Invalid(format!("duplicate instance id {}", i.instance_id)));
        }
    }
    Ok(m.instances.into_iter().map(|i| i.resolve(base)).collect())
}

/// Run `test_patch` on old and new code and score it.
pub fn evaluate(instance: &InstanceSpec, test_patch: &str) -> Result<Evaluation, HarnessError> {
    let cfg = &instance.run_config;
    let code_patch_text = instance.code_patch_text()?;
    let code_patch = parse_patch(&code_patch_text)?;
    let tests = parse_patch(test_patch)?;
    let mut flags = Vec::new();

    let ws_old = runner::prepare(&instance.snapshot, &[("test_patch", test_patch)])?;
    let test_ids = resolve_contributed_tests(&tests, ws_old.path());
    if test_ids.is_empty() {
        flags.push("patch contributes no test functions".to_string());
    }
    let (old, log_old) = runner::run(&ws_old, &test_ids, cfg)?;
    let coverage_old = runner::coverage(&ws_old, &test_ids, cfg);
    drop(ws_old);

    let ws_new = runner::prepare(&instance.snapshot, &[("test_patch", test_patch), ("golden_code_patch", &code_patch_text)])?;
    let (new, log_new) = runner::run(&ws_new, &test_ids, cfg)?;
    let coverage_new = runner::coverage(&ws_new, &test_ids, cfg);
    drop(ws_new);

    let f2p = fail_to_pass(&old, &new, &test_ids);
    let reliable = coverage_old.reliable && coverage_new.reliable;
    let adequacy = if !reliable {
        for note in [&coverage_old.note, &coverage_new.note].into_iter().flatten() {
            flags.push(format!("coverage unreliable: {note}"));
        }
        Adequacy::Excluded
    } else {
        let lines = ChangedLines::from_patch(&code_patch).executable(&coverage_old, &coverage_new);
        match adequacy(&coverage_old.covered, &coverage_new.covered, &lines) {
            Some(a) => {
                if a == 0.0 {
                    flags.push("zero line coverage of the code change".into());
                }
                Adequacy::Value(a)
            }
            None => {
                flags.push("code patch changes no executable line; adequacy undefined".into());
                Adequacy::Undefined
            }
        }
    };
    let result = TddResult {
        instance_id: instance.instance_id.clone(),
        class_on_old: (!test_ids.is_empty()).then(|| classify(&old)),
        test_ids,
        fail_to_pass: f2p,
        tdd_score: tdd_score_instance(f2p, adequacy),
        adequacy,
        coverage_reliable: reliable,
        flags,
    };
    info!(instance = %result.instance_id, f2p, score = result.tdd_score, "evaluated");
    Ok(Evaluation { result, old, new, coverage_old, coverage_new, log_old, log_new })
}

/// Score the golden tests themselves; instances that do not reach
/// fail_to_pass = 1 are the ones a dataset filter would drop.
pub fn golden_validation(instance: &InstanceSpec) -> Result<GoldenCheck, HarnessError> {
    let tests = instance.golden_test_text()?;
    let eval = evaluate(instance, &tests)?;
    let mut reasons = Vec::new();
    if eval.result.fail_to_pass == 0 {
        reasons.push("tests do not have the expected fail-to-pass behavior".to_string());
    }
    if eval.result.adequacy == Adequacy::Value(0.0) {
        reasons.push("zero line coverage".to_string());
    }
    Ok(GoldenCheck { keep: reasons.is_empty(), reasons, evaluation: eval })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub keep: bool,
    pub reasons: Vec<String>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub instance_id: String,
    pub fail_to_pass: u8,
    pub adequacy: Adequacy,
    pub tdd_score: f64,
    pub selected_variant: Option<VariantId>,
    pub classes: BTreeMap<VariantId, CandidateClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub fail_to_pass_count: usize,
    pub fail_to_pass_pct: f64,
    pub tdd_score: f64,
}

impl SuiteReport {
    pub fn new(rows: Vec<SuiteRow>) -> Result<Self, HarnessError> {
        let scores: Vec<f64> = rows.iter().map(|r| r.tdd_score).collect();
        let tdd_score = tdd_score_suite(&scores)?;
        let fail_to_pass_count = rows.iter().filter(|r| r.fail_to_pass == 1).count();
        let fail_to_pass_pct = 100.0 * fail_to_pass_count as f64 / rows.len() as f64;
        Ok(SuiteReport { rows, fail_to_pass_count, fail_to_pass_pct, tdd_score })
    }

    pub fn render(&self) -> String {
        let mut out = String::from("instance\tfail_to_pass\tadequacy\ttdd_score\tselected\n");
        for r in &self.rows {
            let a = match r.adequacy {
                Adequacy::Value(v) => format!("{v:.3}"),
                Adequacy::Excluded => "excluded".into(),
                Adequacy::Undefined => "undefined".into(),
            };
            let sel = r.selected_variant.map_or("-".to_string(), |v| v.to_string());
            out.push_str(&format!("{}\t{}\t{a}\t{:.3}\t{sel}\n", r.instance_id, r.fail_to_pass, r.tdd_score));
        }
        out.push_str(&format!(
            "\n# of fail-to-pass test\t%\ttddScore\n{}\t{:.1}\t{:.1}\n",
            self.fail_to_pass_count, self.fail_to_pass_pct, self.tdd_score
        ));
        out
    }
}

/// Source text of every test function in the index, for similarity scoring.
pub fn repo_test_texts(index: &SourceIndex) -> Vec<String> {
    index
        .modules
        .values()
        .flat_map(|m| m.test_functions())
        .filter_map(|f| index.function_source(f).ok())
        .collect()
}

/// Text of the contributed tests in a patched tree.
pub fn contributed_test_texts(patch: &Patch, root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for fp in &patch.files {
        let Some(path) = &fp.new_path else { continue };
        let Ok(text) = fs::read_to_string(root.join(path)) else { continue };
        let s = FileStructure::from_source(path, &text);
        for f in s.test_functions() {
            if fp.touched_new_lines().range(f.decorators_start..=f.end_line).next().is_some() {
                out.push(crate::repo_model::slice_lines(&text, f.decorators_start, f.end_line));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub system: String,
    pub instance_id: String,
    pub survived: bool,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRow {
    pub system: String,
    pub total: usize,
    pub correct: usize,
    pub survived: usize,
    pub survived_correct: usize,
    /// `None` when nothing survived.
    pub precision: Option<f64>,
    pub recall: f64,
    pub precision_before: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub entries: Vec<FilterEntry>,
    pub rows: Vec<FilterRow>,
    pub missing_truth: Vec<String>,
}

/// Aggregate survival and correctness into per-system precision and recall.
pub fn filter_metrics(entries: Vec<FilterEntry>) -> FilterOutcome {
    let mut by_system: BTreeMap<&str, Vec<&FilterEntry>> = BTreeMap::new();
    for e in &entries {
        by_system.entry(&e.system).or_default().push(e);
    }
    let rows = by_system
        .into_iter()
        .map(|(system, es)| {
            let total = es.len();
            let correct = es.iter().filter(|e| e.correct).count();
            let survived = es.iter().filter(|e| e.survived).count();
            let survived_correct = es.iter().filter(|e| e.survived && e.correct).count();
            FilterRow {
                system: system.to_string(),
                total,
                correct,
                survived,
                survived_correct,
                precision: (survived > 0).then(|| survived_correct as f64 / survived as f64),
                recall: if correct == 0 { 0.0 } else { survived_correct as f64 / correct as f64 },
                precision_before: (total > 0).then(|| correct as f64 / total as f64),
            }
        })
        .collect();
    FilterOutcome { entries, rows, missing_truth: Vec::new() }
}

impl FilterOutcome {
    pub fn render(&self) -> String {
        let mut out = String::from("system\tpatches\tcorrect\tsurvived\tprecision_before\tprecision\trecall\n");
        let fmt = |p: Option<f64>| p.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\n",
                r.system,
                r.total,
                r.correct,
                r.survived,
                fmt(r.precision_before),
                fmt(r.precision),
                r.recall
            ));
        }
        if !self.missing_truth.is_empty() {
            out.push_str(&format!("missing truth entries (excluded): {}\n", self.missing_truth.join(", ")));
        }
        out
    }
}

/// Does a candidate code patch survive the generated tests? It survives when
/// at least one contributed test passes on `c_old ⊕ code_patch ⊕ tests`.
pub fn survives(
    instance: &InstanceSpec,
    code_patch: &str,
    test_patches: &[String],
    cfg: &RunnerConfig,
) -> Result<bool, HarnessError> {
    if test_patches.is_empty() {
        warn!(instance = %instance.instance_id, "no generated tests; patch filtered out");
        return Ok(false);
    }
    for (i, tp) in test_patches.iter().enumerate() {
        let id = format!("tests_{i}");
        let ws = match runner::prepare(&instance.snapshot, &[("code_patch", code_patch), (&id, tp)]) {
            Ok(ws) => ws,
            Err(e) => {
                warn!(instance = %instance.instance_id, error = %e, "candidate workspace failed");
                continue;
            }
        };
        let test_ids = resolve_contributed_tests(&parse_patch(tp)?, ws.path());
        let (report, _) = runner::run(&ws, &test_ids, cfg)?;
        if report.tests.iter().any(|t| t.status == TestStatus::Pass) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(pairs: &[(&str, &[usize])]) -> Covered {
        pairs.iter().map(|(p, ls)| (p.to_string(), ls.iter().copied().collect())).collect()
    }

    #[test]
    fn adequacy_formula() {
        let lines = ChangedLines {
            deleted: BTreeMap::from([("a.py".to_string(), BTreeSet::from([10, 11]))]),
            added: BTreeMap::from([("a.py".to_string(), BTreeSet::from([12, 13, 14]))]),
        };
        let a = adequacy(&cov(&[("a.py", &[10, 3])]), &cov(&[("a.py", &[12, 13, 14])]), &lines).unwrap();
        assert!((a - 0.8).abs() < 1e-12);
        assert_eq!(adequacy(&cov(&[]), &cov(&[]), &lines), Some(0.0));
        assert_eq!(adequacy(&cov(&[]), &cov(&[]), &ChangedLines::default()), None);
    }

    #[test]
    fn scores() {
        assert_eq!(tdd_score_instance(1, Adequacy::Value(0.8)), 0.8);
        assert_eq!(tdd_score_instance(0, Adequacy::Value(0.9)), 0.0);
        assert_eq!(tdd_score_instance(1, Adequacy::Excluded), 1.0);
        assert_eq!(tdd_score_suite(&[1.0, 0.0]).unwrap(), 50.0);
        assert!(tdd_score_suite(&[]).is_err());
    }

    #[test]
    fn filter_example() {
        let mut entries = Vec::new();
        for i in 0..10 {
            let correct = i < 6;
            let survived = matches!(i, 0 | 1 | 2 | 7);
            entries.push(FilterEntry { system: "s".into(), instance_id: i.to_string(), survived, correct });
        }
        let out = filter_metrics(entries);
        assert_eq!(out.rows[0].precision, Some(0.75));
        assert_eq!(out.rows[0].recall, 0.5);
        let none = filter_metrics(vec![FilterEntry { system: "s".into(), instance_id: "x".into(), survived: false, correct: true }]);
        assert_eq!(none.rows[0].precision, None);
        assert!(none.render().contains("n/a"));
    }
}
