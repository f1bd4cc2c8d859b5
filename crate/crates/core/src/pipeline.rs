//! End-to-end orchestration for one instance: localization, planning,
//! generation, and (for the ensemble) candidate execution and selection.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::diff::parse_patch;
use crate::ensemble::{build_variants, CandidateClass, CandidateResult, EnsembleResult, VariantId, VariantSpec};
use crate::error::StageError;
use crate::eval::{resolve_contributed_tests, InstanceSpec};
use crate::generator::{gather_context, gather_context_for, synthesize, zero_shot, Candidate, GeneratorConfig, Linter, TestPatch};
use crate::llm::{Gateway, Stage};
use crate::localizer::{localize, LocKind, Localization, LocalizerConfig};
use crate::planner::{default_target, run_planner, Action, Plan, PlannerConfig};
use crate::repo_model::SourceIndex;
use crate::runner::{self, classify, RunnerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Otter,
    OtterPlusPlus,
    ZeroShot,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "otter" => Ok(Mode::Otter),
            "otter-plus-plus" | "otter++" => Ok(Mode::OtterPlusPlus),
            "zero-shot" => Ok(Mode::ZeroShot),
            other => Err(format!("unknown mode {other:?} (expected otter, otter-plus-plus, zero-shot)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub localizer: LocalizerConfig,
    pub planner: PlannerConfig,
    pub generator: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localizations {
    pub test: Localization,
    pub focal: Localization,
}

/// Test and focal localization, each run once per instance.
pub fn localize_both(
    issue: &str,
    index: &SourceIndex,
    gw: &mut Gateway,
    cfg: &LocalizerConfig,
) -> Result<Localizations, StageError> {
    let test = localize(issue, index, LocKind::Test, gw, cfg).map_err(|e| StageError::new("test-localization", e))?;
    let focal = localize(issue, index, LocKind::Focal, gw, cfg).map_err(|e| StageError::new("focal-localization", e))?;
    Ok(Localizations { test, focal })
}

/// Plan, then generate from the plan.
pub fn otter(
    issue: &str,
    index: &SourceIndex,
    locs: &Localizations,
    gw: &mut Gateway,
    linter: &dyn Linter,
    opts: &PipelineOptions,
) -> Result<(Plan, Candidate), (Option<Plan>, StageError)> {
    let plan = run_planner(issue, &locs.test, &locs.focal, index, gw, &opts.planner)
        .map_err(|e| (None, StageError::new("plan", e)))?;
    let candidate = gather_context(issue, &plan, index, &opts.generator)
        .and_then(|ctx| synthesize(&ctx, index, gw, linter, Stage::ActionPlusGenerate))
        .map_err(|e| (Some(plan.clone()), StageError::new("generate", e)))?;
    Ok((plan, candidate))
}

/// READ actions a planner-free variant sees: focal functions, then test functions.
pub fn variant_reads(spec: &VariantSpec, locs: &Localizations) -> Vec<Action> {
    let mut reads = Vec::new();
    let mut push = |loc: &Localization| {
        for f in &loc.functions {
            let a = Action::read(&f.file, f.suite.as_deref(), &f.name);
            if !reads.contains(&a) {
                reads.push(a);
            }
        }
    };
    if spec.uses_focal_loc {
        push(&locs.focal);
    }
    if spec.uses_test_loc {
        push(&locs.test);
    }
    reads
}

/// One planner-free variant (T2 to T5).
pub fn planless_variant(
    spec: &VariantSpec,
    issue: &str,
    index: &SourceIndex,
    locs: &Localizations,
    gw: &mut Gateway,
    linter: &dyn Linter,
    opts: &PipelineOptions,
) -> Result<Candidate, StageError> {
    let target = default_target(&locs.test, index).map_err(|e| StageError::new("generate", e))?;
    let reads = variant_reads(spec, locs);
    let ctx = gather_context_for(issue, &reads, &target, index, &opts.generator).map_err(|e| StageError::new("generate", e))?;
    synthesize(&ctx, index, gw, linter, Stage::ExtraVariants).map_err(|e| StageError::new("generate", e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantOutput {
    pub variant: VariantId,
    pub candidate: Option<Candidate>,
    pub error: Option<String>,
}

/// Everything produced for one instance. Fields stay `None` when the run
/// stopped before reaching them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunArtifacts {
    pub instance_id: String,
    pub localizations: Option<Localizations>,
    pub plan: Option<Plan>,
    pub variants: Vec<VariantOutput>,
    pub ensemble: Option<EnsembleResult>,
    pub zero_shot: Option<TestPatch>,
    pub error: Option<String>,
}

impl RunArtifacts {
    /// The patch the run settled on: T1 for the single pipeline, the selected candidate for the ensemble.
    pub fn final_patch(&self) -> Option<&TestPatch> {
        if let Some(z) = &self.zero_shot {
            return Some(z);
        }
        let chosen = match &self.ensemble {
            Some(e) => e.selected?,
            None => VariantId::T1,
        };
        self.variants.iter().find(|v| v.variant == chosen).and_then(|v| v.candidate.as_ref()).map(|c| &c.patch)
    }
}

/// Run the candidate patch on the old snapshot and classify the outcome.
pub fn classify_on_old(snapshot: &Path, patch: &TestPatch, cfg: &RunnerConfig) -> (CandidateClass, Vec<String>, Option<String>) {
    let ws = match runner::prepare(snapshot, &[("candidate", &patch.diff)]) {
        Ok(ws) => ws,
        Err(e) => return (CandidateClass::Error, Vec::new(), Some(e.to_string())),
    };
    let ids = match parse_patch(&patch.diff) {
        Ok(p) => resolve_contributed_tests(&p, ws.path()),
        Err(e) => return (CandidateClass::Error, Vec::new(), Some(e.to_string())),
    };
    if ids.is_empty() {
        return (CandidateClass::Error, ids, Some("patch contributes no test functions".into()));
    }
    match runner::run(&ws, &ids, cfg) {
        Ok((report, _)) => (classify(&report).into(), ids, None),
        Err(e) => (CandidateClass::Error, ids, Some(e.to_string())),
    }
}

/// Run one instance in the given mode. Model calls are issued sequentially
/// in a fixed order so replay transcripts line up; test execution for the
/// ensemble candidates runs in parallel.
pub fn run_instance(
    inst: &InstanceSpec,
    mode: Mode,
    gw: &mut Gateway,
    linter: &dyn Linter,
    opts: &PipelineOptions,
) -> RunArtifacts {
    let mut art = RunArtifacts { instance_id: inst.instance_id.clone(), ..Default::default() };
    let issue = inst.issue_text.as_str();

    if mode == Mode::ZeroShot {
        let existing = std::fs::read_to_string(inst.snapshot.join(crate::generator::ZERO_SHOT_PATH)).ok();
        match zero_shot(issue, &inst.repo_label(), existing.as_deref(), gw, Stage::ActionPlusGenerate) {
            Ok(p) => art.zero_shot = Some(p),
            Err(e) => art.error = Some(StageError::new("zero-shot", e).to_string()),
        }
        return art;
    }

    let index = match SourceIndex::build(&inst.snapshot) {
        Ok(i) => i,
        Err(e) => {
            art.error = Some(StageError::new("index", e).to_string());
            return art;
        }
    };
    let locs = match localize_both(issue, &index, gw, &opts.localizer) {
        Ok(l) => l,
        Err(e) => {
            art.error = Some(e.to_string());
            return art;
        }
    };
    art.localizations = Some(locs.clone());

    match otter(issue, &index, &locs, gw, linter, opts) {
        Ok((plan, cand)) => {
            art.plan = Some(plan);
            art.variants.push(VariantOutput { variant: VariantId::T1, candidate: Some(cand), error: None });
        }
        Err((plan, e)) => {
            art.plan = plan;
            if mode == Mode::Otter {
                art.error = Some(e.to_string());
                return art;
            }
            warn!(instance = %inst.instance_id, error = %e, "T1 failed to generate");
            art.variants.push(VariantOutput { variant: VariantId::T1, candidate: None, error: Some(e.to_string()) });
        }
    }
    if mode == Mode::Otter {
        return art;
    }

    for spec in &build_variants()[1..] {
        let out = match planless_variant(spec, issue, &index, &locs, gw, linter, opts) {
            Ok(c) => VariantOutput { variant: spec.id, candidate: Some(c), error: None },
            Err(e) => {
                warn!(instance = %inst.instance_id, variant = %spec.id, error = %e, "variant failed to generate");
                VariantOutput { variant: spec.id, candidate: None, error: Some(e.to_string()) }
            }
        };
        art.variants.push(out);
    }

    let results: Vec<CandidateResult> = art
        .variants
        .par_iter()
        .map(|v| match &v.candidate {
            Some(c) => {
                let (class, ids, note) = classify_on_old(&inst.snapshot, &c.patch, &inst.run_config);
                CandidateResult {
                    variant: v.variant,
                    class_on_old: class,
                    patch_path: Some(patch_file_name(v.variant)),
                    test_ids: ids,
                    note,
                }
            }
            None => CandidateResult {
                variant: v.variant,
                class_on_old: CandidateClass::FailedToGenerate,
                patch_path: None,
                test_ids: Vec::new(),
                note: v.error.clone(),
            },
        })
        .collect();
    let ens = EnsembleResult::new(&inst.instance_id, results);
    info!(instance = %inst.instance_id, selected = ?ens.selected, "ensemble selection");
    art.ensemble = Some(ens);
    art
}

/// File name under the instance output directory for a variant's patch.
pub fn patch_file_name(v: VariantId) -> String {
    format!("{}.patch", v.as_str())
}
