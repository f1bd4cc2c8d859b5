use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use issuetest::config::RunConfig;
use issuetest::diff::parse_patch;
use issuetest::ensemble::{CandidateClass, VariantId};
use issuetest::eval::{
    self, contributed_test_texts, filter_metrics, golden_validation, load_manifest, repo_test_texts, survives, FilterEntry,
    InstanceSpec, SuiteReport, SuiteRow,
};
use issuetest::llm::{cost_report, CostLedger, Gateway, TranscriptMode};
use issuetest::pipeline::{localize_both, patch_file_name, run_instance, Mode, RunArtifacts};
use issuetest::planner::run_planner;
use issuetest::repo_model::SourceIndex;
use issuetest::runner;
use rayon::prelude::*;
use serde::Serialize;

use crate::Cmd;

pub enum Failure {
    Config(String),
    Stage(String),
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn stage_err(e: impl std::fmt::Display) -> Failure {
    Failure::Stage(e.to_string())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(stage_err)?;
    fs::write(dir.join(name), text).map_err(|e| stage_err(format!("cannot write {}: {e}", dir.join(name).display())))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(stage_err)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn load_instances(cfg: &RunConfig, only: &[String]) -> Result<Vec<InstanceSpec>, Failure> {
    let path = cfg.manifest.as_ref().ok_or_else(|| config_err("no instance manifest given (--manifest or config key)"))?;
    let mut all = load_manifest(&cfg.resolve(path)).map_err(config_err)?;
    for id in only {
        if !all.iter().any(|i| &i.instance_id == id) {
            return Err(config_err(format!("instance {id} is not in the manifest")));
        }
    }
    if !only.is_empty() {
        all.retain(|i| only.contains(&i.instance_id));
    }
    if let Some(t) = cfg.test_timeout_s {
        for i in &mut all {
            i.run_config.timeout_s = t;
        }
    }
    Ok(all)
}

/// Run `f` over instances on `parallelism` threads, keeping input order.
fn for_each_instance<T: Send>(
    cfg: &RunConfig,
    instances: &[InstanceSpec],
    f: impl Fn(&InstanceSpec) -> Result<T, Failure> + Sync,
) -> Result<Vec<(String, Result<T, Failure>)>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism.max(1)).build().map_err(stage_err)?;
    Ok(pool.install(|| instances.par_iter().map(|i| (i.instance_id.clone(), f(i))).collect()))
}

/// Config errors win over stage errors; stage errors are reported together.
fn summarize<T>(results: Vec<(String, Result<T, Failure>)>) -> Result<Vec<(String, T)>, Failure> {
    let mut ok = Vec::new();
    let mut stage = Vec::new();
    for (id, r) in results {
        match r {
            Ok(v) => ok.push((id, v)),
            Err(Failure::Config(m)) => return Err(Failure::Config(format!("{id}: {m}"))),
            Err(Failure::Stage(m)) => stage.push(format!("{id}: {m}")),
        }
    }
    if stage.is_empty() {
        Ok(ok)
    } else {
        Err(Failure::Stage(stage.join("\n")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Depth {
    Localize,
    Plan,
    Full(Mode),
}

fn finish_gateway(cfg: &RunConfig, inst: &InstanceSpec, gw: &Gateway, dir: &Path) -> Result<(), Failure> {
    if cfg.transcript.mode == TranscriptMode::Record {
        let path = cfg.transcript_path(&inst.instance_id);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(stage_err)?;
        }
        gw.transcript.save(&path).map_err(stage_err)?;
    }
    write_json(dir, "cost_ledger.json", &gw.ledger)?;
    write_text(dir, "cost_report.txt", &cost_report(&gw.ledger, Some(1)).render())
}

fn write_run_artifacts(dir: &Path, art: &RunArtifacts) -> Result<(), Failure> {
    if let Some(l) = &art.localizations {
        write_json(dir, "test_localization.json", &l.test.dump_json())?;
        write_json(dir, "focal_localization.json", &l.focal.dump_json())?;
    }
    if let Some(p) = &art.plan {
        write_json(dir, "plan.json", &p.dump_json())?;
        write_json(dir, "plan_log.json", &p.validation_log)?;
    }
    let mut logs = BTreeMap::new();
    for v in &art.variants {
        match &v.candidate {
            Some(c) => {
                write_text(dir, &patch_file_name(v.variant), &c.patch.diff)?;
                logs.insert(v.variant, serde_json::json!({
                    "target_file": c.patch.target_file,
                    "test_ids": c.patch.test_ids,
                    "function": c.draft.function_name,
                    "imports_inserted": c.imports.inserted,
                    "imports_rewritten": c.imports.rewritten,
                    "log": c.log,
                }));
            }
            None => {
                logs.insert(v.variant, serde_json::json!({ "error": v.error }));
            }
        }
    }
    if !logs.is_empty() {
        write_json(dir, "candidates.json", &logs)?;
    }
    if let Some(e) = &art.ensemble {
        write_json(dir, "ensemble.json", e)?;
    }
    if let Some(z) = &art.zero_shot {
        write_text(dir, "zero_shot.patch", &z.diff)?;
    }
    if let Some(p) = art.final_patch() {
        write_text(dir, "selected.patch", &p.diff)?;
    } else if art.ensemble.is_some() {
        let _ = fs::remove_file(dir.join("selected.patch"));
    }
    Ok(())
}

fn run_one(cfg: &RunConfig, inst: &InstanceSpec, depth: Depth) -> Result<(), Failure> {
    let dir = cfg.output_dir.join(&inst.instance_id);
    let mut gw = cfg.gateway(&inst.instance_id).map_err(config_err)?;
    let linter = cfg.lint.clone();
    let opts = &cfg.pipeline;
    let issue = inst.issue_text.as_str();

    let result = match depth {
        Depth::Full(mode) => {
            let art = run_instance(inst, mode, &mut gw, &linter, opts);
            write_run_artifacts(&dir, &art)?;
            art.error.map_or(Ok(()), |e| Err(Failure::Stage(e)))
        }
        Depth::Localize | Depth::Plan => {
            let index = SourceIndex::build(&inst.snapshot).map_err(stage_err)?;
            match localize_both(issue, &index, &mut gw, &opts.localizer) {
                Err(e) => Err(stage_err(e)),
                Ok(locs) => {
                    write_json(&dir, "test_localization.json", &locs.test.dump_json())?;
                    write_json(&dir, "focal_localization.json", &locs.focal.dump_json())?;
                    if depth == Depth::Plan {
                        match run_planner(issue, &locs.test, &locs.focal, &index, &mut gw, &opts.planner) {
                            Ok(plan) => {
                                write_json(&dir, "plan.json", &plan.dump_json())?;
                                write_json(&dir, "plan_log.json", &plan.validation_log)
                            }
                            Err(e) => Err(Failure::Stage(format!("[plan] {e}"))),
                        }
                    } else {
                        Ok(())
                    }
                }
            }
        }
    };
    finish_gateway(cfg, inst, &gw, &dir)?;
    result
}

fn evaluate_all(cfg: &RunConfig, instances: &[InstanceSpec], patch: Option<&Path>, patches_dir: Option<&Path>) -> Result<(), Failure> {
    if patch.is_some() && instances.len() != 1 {
        return Err(config_err("--patch needs exactly one instance (use --instance)"));
    }
    let results = for_each_instance(cfg, instances, |inst| {
        let path = match (patch, patches_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => d.join(format!("{}.patch", inst.instance_id)),
            (None, None) => cfg.output_dir.join(&inst.instance_id).join("selected.patch"),
        };
        let dir = cfg.output_dir.join(&inst.instance_id);
        let row_base = |f2p, adequacy, score| {
            let (selected_variant, classes) = ensemble_summary(&dir);
            SuiteRow { instance_id: inst.instance_id.clone(), fail_to_pass: f2p, adequacy, tdd_score: score, selected_variant, classes }
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(_) => {
                // no test produced: the instance scores zero
                return Ok(row_base(0, eval::Adequacy::Excluded, 0.0));
            }
        };
        let ev = eval::evaluate(inst, &text).map_err(|e| Failure::Stage(format!("[evaluate] {e}")))?;
        write_json(&dir, "evaluation.json", &ev)?;
        Ok(row_base(ev.result.fail_to_pass, ev.result.adequacy, ev.result.tdd_score))
    })?;
    let rows: Vec<SuiteRow> = summarize(results)?.into_iter().map(|(_, r)| r).collect();
    let report = SuiteReport::new(rows).map_err(stage_err)?;
    write_json(&cfg.output_dir, "suite_report.json", &report)?;
    let rendered = report.render();
    write_text(&cfg.output_dir, "suite_report.txt", &rendered)?;
    print!("{rendered}");
    Ok(())
}

fn ensemble_summary(dir: &Path) -> (Option<VariantId>, BTreeMap<VariantId, CandidateClass>) {
    let Ok(text) = fs::read_to_string(dir.join("ensemble.json")) else { return (None, BTreeMap::new()) };
    let Ok(e) = serde_json::from_str::<issuetest::ensemble::EnsembleResult>(&text) else { return (None, BTreeMap::new()) };
    (e.selected, e.candidates.iter().map(|c| (c.variant, c.class_on_old)).collect())
}

fn golden_check(cfg: &RunConfig, instances: &[InstanceSpec]) -> Result<(), Failure> {
    let results = for_each_instance(cfg, instances, |inst| {
        let check = golden_validation(inst).map_err(|e| Failure::Stage(format!("[golden-check] {e}")))?;
        write_json(&cfg.output_dir.join(&inst.instance_id), "golden_check.json", &check)?;
        Ok(serde_json::json!({
            "instance_id": inst.instance_id,
            "keep": check.keep,
            "reasons": check.reasons,
            "fail_to_pass": check.evaluation.result.fail_to_pass,
            "adequacy": check.evaluation.result.adequacy,
        }))
    })?;
    let rows: Vec<serde_json::Value> = summarize(results)?.into_iter().map(|(_, r)| r).collect();
    for r in &rows {
        let reasons: Vec<&str> = r["reasons"].as_array().into_iter().flatten().filter_map(|v| v.as_str()).collect();
        println!("{}\t{}\t{}", r["instance_id"].as_str().unwrap_or(""), if r["keep"] == true { "keep" } else { "drop" }, reasons.join("; "));
    }
    write_json(&cfg.output_dir, "golden_check.json", &rows)
}

fn filter(cfg: &RunConfig, instances: &[InstanceSpec], tests_dir: &Path, patches_dir: &Path, truth: &Path) -> Result<(), Failure> {
    let truth_text = fs::read_to_string(truth).map_err(|e| config_err(format!("{}: {e}", truth.display())))?;
    let truth: BTreeMap<String, BTreeMap<String, bool>> = serde_json::from_str(&truth_text).map_err(config_err)?;
    let mut systems: Vec<PathBuf> = fs::read_dir(patches_dir)
        .map_err(|e| config_err(format!("{}: {e}", patches_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    systems.sort();
    let mut jobs = Vec::new();
    let mut missing = Vec::new();
    for sys_dir in &systems {
        let system = sys_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for inst in instances {
            let patch = sys_dir.join(format!("{}.patch", inst.instance_id));
            if !patch.is_file() {
                continue;
            }
            match truth.get(&system).and_then(|m| m.get(&inst.instance_id)) {
                Some(&correct) => jobs.push((system.clone(), inst, patch, correct)),
                None => missing.push(format!("{system}/{}", inst.instance_id)),
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism.max(1)).build().map_err(stage_err)?;
    let entries: Vec<Result<FilterEntry, Failure>> = pool.install(|| {
        jobs.par_iter()
            .map(|(system, inst, patch, correct)| {
                let code = fs::read_to_string(patch).map_err(stage_err)?;
                let tests: Vec<String> = fs::read_to_string(tests_dir.join(format!("{}.patch", inst.instance_id))).into_iter().collect();
                let survived = survives(inst, &code, &tests, &inst.run_config).map_err(stage_err)?;
                Ok(FilterEntry { system: system.clone(), instance_id: inst.instance_id.clone(), survived, correct: *correct })
            })
            .collect()
    });
    let entries = entries.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut outcome = filter_metrics(entries);
    outcome.missing_truth = missing;
    write_json(&cfg.output_dir, "filter_report.json", &outcome)?;
    let rendered = outcome.render();
    write_text(&cfg.output_dir, "filter_report.txt", &rendered)?;
    print!("{rendered}");
    Ok(())
}

fn similarity(instances: &[InstanceSpec], patch: &Path) -> Result<(), Failure> {
    let [inst] = instances else {
        return Err(config_err("similarity needs exactly one instance (use --instance)"));
    };
    let text = fs::read_to_string(patch).map_err(|e| config_err(format!("{}: {e}", patch.display())))?;
    let parsed = parse_patch(&text).map_err(stage_err)?;
    let ws = runner::prepare(&inst.snapshot, &[("test_patch", &text)]).map_err(stage_err)?;
    let generated = contributed_test_texts(&parsed, ws.path());
    let index = SourceIndex::build(&inst.snapshot).map_err(stage_err)?;
    let existing = repo_test_texts(&index);
    let scores: Vec<f64> = generated.iter().map(|g| eval::similarity(g, &existing)).collect();
    let best = scores.iter().copied().fold(0.0_f64, f64::max);
    println!("{}", serde_json::json!({ "instance_id": inst.instance_id, "tests": scores, "similarity": best }));
    Ok(())
}

fn cost(cfg: &RunConfig, samples: Option<u64>) -> Result<(), Failure> {
    let mut total = CostLedger::new(cfg.prices);
    let mut runs = 0u64;
    let mut dirs: Vec<PathBuf> = fs::read_dir(&cfg.output_dir)
        .map_err(|e| config_err(format!("{}: {e}", cfg.output_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    dirs.sort();
    for d in dirs {
        let Ok(text) = fs::read_to_string(d.join("cost_ledger.json")) else { continue };
        let ledger: CostLedger = serde_json::from_str(&text).map_err(|e| stage_err(format!("{}: {e}", d.display())))?;
        total.merge(&ledger);
        runs += 1;
    }
    let report = cost_report(&total, samples.or(Some(runs)));
    write_json(&cfg.output_dir, "cost_report.json", &report)?;
    let rendered = report.render();
    write_text(&cfg.output_dir, "cost_report.txt", &rendered)?;
    print!("{rendered}");
    Ok(())
}

pub fn dispatch(cmd: &Cmd, only: &[String], cfg: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| config_err(format!("{}: {e}", cfg.output_dir.display())))?;
    let depth = match cmd {
        Cmd::Run { mode } => Some(Depth::Full(*mode)),
        Cmd::Localize => Some(Depth::Localize),
        Cmd::Plan => Some(Depth::Plan),
        Cmd::Generate => Some(Depth::Full(Mode::Otter)),
        Cmd::Ensemble => Some(Depth::Full(Mode::OtterPlusPlus)),
        _ => None,
    };
    if let Some(depth) = depth {
        let instances = load_instances(cfg, only)?;
        let results = for_each_instance(cfg, &instances, |inst| run_one(cfg, inst, depth))?;
        summarize(results)?;
        return Ok(());
    }
    match cmd {
        Cmd::Evaluate { patch, patches_dir } => {
            evaluate_all(cfg, &load_instances(cfg, only)?, patch.as_deref(), patches_dir.as_deref())
        }
        Cmd::GoldenCheck => golden_check(cfg, &load_instances(cfg, only)?),
        Cmd::Filter { tests_dir, patches_dir, truth } => {
            filter(cfg, &load_instances(cfg, only)?, tests_dir, patches_dir, truth)
        }
        Cmd::Similarity { patch } => similarity(&load_instances(cfg, only)?, patch),
        Cmd::CostReport { samples } => cost(cfg, *samples),
        _ => unreachable!("pipeline commands handled above"),
    }
}
