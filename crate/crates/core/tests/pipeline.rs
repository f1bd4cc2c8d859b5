mod common;

use issuetest::ensemble::{CandidateClass, VariantId};
use issuetest::llm::TemplateId;
use issuetest::pipeline::{run_instance, variant_reads, Mode, PipelineOptions};
use issuetest::planner::{ActionKind, Verdict};

#[test]
fn otter_replay_writes_into_the_localized_suite() {
    let inst = common::instance("polyfit");
    let mut gw = common::replay_gateway("polyfit");
    let art = run_instance(&inst, Mode::Otter, &mut gw, &common::linter(), &PipelineOptions::default());
    assert!(art.error.is_none(), "{:?}", art.error);
    let plan = art.plan.as_ref().unwrap();
    assert_eq!(plan.verdicts, [Verdict::Unsure, Verdict::Satisfied]);
    let target = plan.target().unwrap();
    assert_eq!((target.kind, target.suite.as_deref(), target.function.as_str()), (ActionKind::Write, Some("TestPolyFit"), "test_missing_data"));

    let locs = art.localizations.as_ref().unwrap();
    assert!(locs.focal.repaired.iter().any(|r| r.from == "seaborn_lite/regresion.py" && r.to == "seaborn_lite/regression.py"));
    assert!(locs.focal.dropped.iter().any(|d| d.contains("stats.py")));

    assert_eq!(art.variants.len(), 1);
    let cand = art.variants[0].candidate.as_ref().unwrap();
    assert_eq!(cand.imports.inserted, ["from seaborn_lite.utils import remove_na"]);
    assert_eq!(cand.patch.test_ids, ["tests/test_regression.py::TestPolyFit::test_missing_data"]);
    assert!(art.ensemble.is_none());
}

#[test]
fn modify_plan_replaces_the_existing_test() {
    let inst = common::instance("cfgparse");
    let mut gw = common::replay_gateway("cfgparse");
    let art = run_instance(&inst, Mode::Otter, &mut gw, &common::linter(), &PipelineOptions::default());
    let plan = art.plan.as_ref().unwrap();
    assert_eq!(plan.turns, 5);
    assert!(plan.verdicts.iter().all(|v| *v == Verdict::Unsure));
    assert_eq!(plan.target().unwrap().kind, ActionKind::Modify);
    let patch = &art.final_patch().unwrap();
    assert_eq!(patch.test_ids, ["tests/test_values.py::TestParseBool::test_true_words"]);
    assert!(!patch.diff.lines().any(|l| l.starts_with('-') && !l.starts_with("---")));
}

#[test]
fn ensemble_classifies_and_selects() {
    let inst = common::instance("polyfit");
    let mut gw = common::replay_gateway("polyfit");
    let art = run_instance(&inst, Mode::OtterPlusPlus, &mut gw, &common::linter(), &PipelineOptions::default());
    let ens = art.ensemble.as_ref().unwrap();
    let class = |v| ens.candidates.iter().find(|c| c.variant == v).unwrap().class_on_old;
    assert_eq!(class(VariantId::T1), CandidateClass::OtherFailure);
    assert_eq!(class(VariantId::T3), CandidateClass::Pass);
    assert_eq!(class(VariantId::T4), CandidateClass::FailedToGenerate);
    assert_eq!(class(VariantId::T5), CandidateClass::AssertionFailure);
    assert_eq!(ens.selected, Some(VariantId::T5));
    assert!(art.final_patch().unwrap().test_ids[0].ends_with("test_none_values_dropped"));
}

#[test]
fn t1_generation_failure_does_not_stop_the_ensemble() {
    let inst = common::instance("textkit");
    let mut script = common::instance_script("textkit");
    script.get_mut(&TemplateId::GenWrite).unwrap()[0] = "No code this time.".into();
    let responses: Vec<_> = script.into_iter().collect();
    let mut gw = common::scripted_gateway(&responses);
    let art = run_instance(&inst, Mode::OtterPlusPlus, &mut gw, &common::linter(), &PipelineOptions::default());
    let ens = art.ensemble.as_ref().unwrap();
    assert_eq!(ens.candidates[0].class_on_old, CandidateClass::FailedToGenerate);
    assert_eq!(ens.selected, Some(VariantId::T2));
}

#[test]
fn changed_issue_misses_the_transcript() {
    let mut inst = common::instance("textkit");
    inst.issue_text.push_str("\nOne more detail.");
    let mut gw = common::replay_gateway("textkit");
    let art = run_instance(&inst, Mode::Otter, &mut gw, &common::linter(), &PipelineOptions::default());
    let err = art.error.unwrap();
    assert!(err.contains("localization") && err.contains("no recorded response"), "{err}");
}

#[test]
fn zero_shot_emits_a_new_file() {
    let inst = common::instance("textkit");
    let code = "```python\nfrom textkit import slugify\n\n\ndef test_runs():\n    assert slugify(\"a  b\") == \"a-b\"\n```";
    let mut gw = common::scripted_gateway(&[(TemplateId::ZeroShot, vec![code.to_string()])]);
    let art = run_instance(&inst, Mode::ZeroShot, &mut gw, &common::linter(), &PipelineOptions::default());
    let patch = art.final_patch().unwrap();
    assert_eq!(patch.target_file, "tests/test_issue_repro.py");
    assert!(patch.diff.contains("--- /dev/null"));
    assert_eq!(patch.test_ids, ["tests/test_issue_repro.py::test_runs"]);

    let mut gw = common::scripted_gateway(&[(TemplateId::ZeroShot, vec!["I cannot help.".into()])]);
    let art = run_instance(&inst, Mode::ZeroShot, &mut gw, &common::linter(), &PipelineOptions::default());
    assert!(art.final_patch().is_none() && art.error.is_some());
}

#[test]
fn planless_variants_see_the_documented_context() {
    let inst = common::instance("polyfit");
    let mut gw = common::replay_gateway("polyfit");
    let art = run_instance(&inst, Mode::Otter, &mut gw, &common::linter(), &PipelineOptions::default());
    let locs = art.localizations.unwrap();
    let reads = |v: VariantId| variant_reads(&v.spec(), &locs);
    let t2 = reads(VariantId::T2);
    let focal_n = locs.focal.functions.len();
    assert!(t2[..focal_n].iter().all(|a| !a.file.starts_with("tests/")));
    assert!(t2[focal_n..].iter().all(|a| a.file.starts_with("tests/")));
    assert!(reads(VariantId::T3).iter().all(|a| a.file.starts_with("tests/")));
    assert!(reads(VariantId::T4).iter().all(|a| !a.file.starts_with("tests/")));
    assert!(reads(VariantId::T5).is_empty());
}
