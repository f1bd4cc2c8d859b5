mod common;

use issuetest::eval::{evaluate, golden_validation, load_manifest, survives, Adequacy, SuiteReport, SuiteRow};
use issuetest::runner::RunnerConfig;

#[test]
fn golden_tests_score_full_marks() {
    let inst = common::instance("polyfit");
    let ev = evaluate(&inst, &inst.golden_test_text().unwrap()).unwrap();
    assert_eq!(ev.result.test_ids, ["tests/test_regression.py::TestPolyFit::test_missing_data"]);
    assert_eq!(ev.result.fail_to_pass, 1);
    assert_eq!(ev.result.adequacy, Adequacy::Value(1.0));
    assert!(ev.result.flags.is_empty(), "{:?}", ev.result.flags);
}

#[test]
fn stale_golden_tests_are_dropped() {
    let stale = load_manifest(&common::fixtures().join("stale_manifest.json")).unwrap();
    let check = golden_validation(&stale[0]).unwrap();
    assert!(!check.keep);
    assert_eq!(check.evaluation.result.fail_to_pass, 0);
}

#[test]
fn patch_without_tests_scores_zero() {
    let inst = common::instance("textkit");
    let patch = "\
diff --git a/tests/helpers.py b/tests/helpers.py
new file mode 100644
--- /dev/null
+++ b/tests/helpers.py
@@ -0,0 +1 @@
+VALUE = 1
";
    let ev = evaluate(&inst, patch).unwrap();
    assert!(ev.result.test_ids.is_empty());
    assert_eq!(ev.result.tdd_score, 0.0);
    assert!(ev.result.flags.iter().any(|f| f.contains("no test functions")));
}

#[test]
fn excluded_coverage_falls_back_to_fail_to_pass() {
    let mut inst = common::instance("textkit");
    inst.run_config.coverage_reliable = false;
    let ev = evaluate(&inst, &inst.golden_test_text().unwrap()).unwrap();
    assert_eq!(ev.result.adequacy, Adequacy::Excluded);
    assert_eq!(ev.result.tdd_score, 1.0);
}

#[test]
fn golden_code_survives_and_noop_patch_does_not() {
    let inst = common::instance("textkit");
    let tests = vec![inst.golden_test_text().unwrap()];
    let golden = inst.code_patch_text().unwrap();
    assert!(survives(&inst, &golden, &tests, &RunnerConfig::default()).unwrap());
    let noop = golden.replace("+    return \"-\".join(cleaned.split())", "+    return cleaned.replace(\" \", \"-\")  # unchanged");
    assert_ne!(noop, golden);
    assert!(!survives(&inst, &noop, &tests, &RunnerConfig::default()).unwrap());
    assert!(!survives(&inst, &golden, &[], &RunnerConfig::default()).unwrap());
}

#[test]
fn suite_report_renders_table_columns() {
    let rows = vec![
        SuiteRow { instance_id: "a".into(), fail_to_pass: 1, adequacy: Adequacy::Value(0.5), tdd_score: 0.5, selected_variant: None, classes: Default::default() },
        SuiteRow { instance_id: "b".into(), fail_to_pass: 0, adequacy: Adequacy::Undefined, tdd_score: 0.0, selected_variant: None, classes: Default::default() },
    ];
    let report = SuiteReport::new(rows).unwrap();
    let text = report.render();
    assert!(text.contains("# of fail-to-pass test\t%\ttddScore"), "{text}");
    assert!(text.contains("1\t50.0\t25.0"), "{text}");
}
